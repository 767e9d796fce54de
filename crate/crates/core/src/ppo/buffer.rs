use rand::Rng;
use rand_distr::StandardNormal;

use super::loss::{PolicyHead, HIDDEN};
use crate::agent::TrainError;
use crate::env::{Space, StepResult, VecEnv};
use crate::nn::dist::log_softmax;
use crate::nn::{gaussian_log_prob, mlp_forward, Matrix, ParamSet};

/// On-policy storage for one iteration, time-major: sample `(t, i)` is at
/// `t * nr_envs + i`.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    pub nr_steps: usize,
    pub nr_envs: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub observations: Vec<f32>,
    pub actions: Vec<f32>,
    pub log_probs: Vec<f32>,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    pub values: Vec<f64>,
    pub final_values: Vec<f64>,
    /// Value of each env's state after the last step.
    pub bootstrap: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(nr_steps: usize, nr_envs: usize, obs_dim: usize, act_dim: usize) -> Self {
        let cap = nr_steps * nr_envs;
        Self {
            nr_steps,
            nr_envs,
            obs_dim,
            act_dim,
            observations: Vec::with_capacity(cap * obs_dim),
            actions: Vec::with_capacity(cap * act_dim),
            log_probs: Vec::with_capacity(cap),
            rewards: Vec::with_capacity(cap),
            terminated: Vec::with_capacity(cap),
            truncated: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            final_values: Vec::with_capacity(cap),
            bootstrap: Vec::with_capacity(nr_envs),
        }
    }

    pub fn capacity(&self) -> usize {
        self.nr_steps * self.nr_envs
    }

    /// Samples stored so far.
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity() && self.bootstrap.len() == self.nr_envs
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.terminated.clear();
        self.truncated.clear();
        self.values.clear();
        self.final_values.clear();
        self.bootstrap.clear();
    }

    pub fn observation_matrix(&self) -> Matrix<f32> {
        Matrix::from_vec(self.len(), self.obs_dim, self.observations.clone())
    }
}

pub(crate) fn to_matrix(rows: &[Vec<f64>], cols: usize) -> Matrix<f32> {
    let mut data = Vec::with_capacity(rows.len() * cols);
    for r in rows {
        data.extend(r.iter().map(|&x| x as f32));
    }
    Matrix::from_vec(rows.len(), cols, data)
}

fn sample_action<R: Rng + ?Sized>(
    head: PolicyHead,
    out: &[f32],
    rng: &mut R,
) -> Result<(Vec<f32>, f32), TrainError> {
    match head {
        PolicyHead::Gaussian { log_std } => {
            let std = log_std.exp() as f32;
            let action: Vec<f32> = out
                .iter()
                .map(|&m| m + std * rng.sample::<f32, _>(StandardNormal))
                .collect();
            let ls = vec![log_std as f32; out.len()];
            let lp = gaussian_log_prob(out, &ls, &action)?;
            Ok((action, lp))
        }
        PolicyHead::Categorical => {
            let lsm = log_softmax(out);
            let u: f32 = rng.random();
            let mut acc = 0.0f32;
            let mut index = lsm.len() - 1;
            for (k, &l) in lsm.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    index = k;
                    break;
                }
            }
            Ok((vec![index as f32], lsm[index]))
        }
    }
}

/// The action actually sent to the environment.
pub(crate) fn env_action(head: PolicyHead, space: &Space, action: &[f32]) -> Vec<f64> {
    let raw: Vec<f64> = action.iter().map(|&a| f64::from(a)).collect();
    match head {
        PolicyHead::Gaussian { .. } => space.clip(&raw),
        PolicyHead::Categorical => raw,
    }
}

/// Fills `buffer` with `nr_steps` batched steps starting from `observations`,
/// which is advanced in place. `on_step` sees every batched step's results.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollout<R, F>(
    policy: &ParamSet<f32>,
    value: &ParamSet<f32>,
    head: PolicyHead,
    env: &mut VecEnv,
    observations: &mut Vec<Vec<f64>>,
    buffer: &mut RolloutBuffer,
    rng: &mut R,
    mut on_step: F,
) -> Result<(), TrainError>
where
    R: Rng + ?Sized,
    F: FnMut(&[StepResult]) -> Result<(), TrainError>,
{
    if !buffer.is_empty() {
        return Err(TrainError::Config("rollout buffer must be empty before collection".into()));
    }
    if env.len() != buffer.nr_envs || observations.len() != buffer.nr_envs {
        return Err(TrainError::Config(format!(
            "rollout buffer expects {} envs, vector env has {}",
            buffer.nr_envs,
            env.len()
        )));
    }
    let action_space = env.action_space().clone();
    for _ in 0..buffer.nr_steps {
        let obs = to_matrix(observations, buffer.obs_dim);
        let out = mlp_forward(policy, &obs, HIDDEN)?;
        let values = mlp_forward(value, &obs, HIDDEN)?;
        let mut actions = Vec::with_capacity(buffer.nr_envs);
        for i in 0..buffer.nr_envs {
            let (action, lp) = sample_action(head, out.row(i), rng)?;
            actions.push(env_action(head, &action_space, &action));
            buffer.actions.extend_from_slice(&action);
            buffer.log_probs.push(lp);
        }
        let results = env.step(&actions)?;

        let truncated_rows: Vec<usize> = (0..results.len()).filter(|&i| results[i].truncated).collect();
        let mut final_values = vec![0.0; buffer.nr_envs];
        if !truncated_rows.is_empty() {
            let finals: Vec<Vec<f64>> = truncated_rows
                .iter()
                .map(|&i| {
                    results[i]
                        .final_observation
                        .clone()
                        .unwrap_or_else(|| results[i].observation.clone())
                })
                .collect();
            let v = mlp_forward(value, &to_matrix(&finals, buffer.obs_dim), HIDDEN)?;
            for (row, &i) in truncated_rows.iter().enumerate() {
                final_values[i] = f64::from(v.get(row, 0));
            }
        }

        buffer.observations.extend_from_slice(obs.as_slice());
        for (i, r) in results.iter().enumerate() {
            buffer.rewards.push(r.reward);
            buffer.terminated.push(r.terminated);
            buffer.truncated.push(r.truncated);
            buffer.values.push(f64::from(values.get(i, 0)));
            buffer.final_values.push(final_values[i]);
        }
        on_step(&results)?;
        for (o, r) in observations.iter_mut().zip(results) {
            *o = r.observation;
        }
    }
    let v = mlp_forward(value, &to_matrix(observations, buffer.obs_dim), HIDDEN)?;
    buffer.bootstrap.extend(v.as_slice().iter().map(|&x| f64::from(x)));
    Ok(())
}
