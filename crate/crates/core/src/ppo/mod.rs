//! Proximal policy optimization over vectorized environments.

mod buffer;
mod config;
mod gae;
mod loss;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use buffer::{collect_rollout, RolloutBuffer};
pub use config::PpoConfig;
pub use gae::{compute_gae, Gae, GaeInputs};
pub use loss::{
    log_probs, normalize_advantages, ppo_loss, LossCoefs, Minibatch, PolicyHead, PpoDiagnostics,
    PpoLoss, HIDDEN,
};

use crate::agent::{
    derive_seed, Agent, TrainError, TrainHooks, TrainSummary, STREAM_ACTIONS, STREAM_INIT,
    STREAM_SHUFFLE,
};
use crate::env::{check_compatibility, AlgorithmCaps, EpisodeStats, Space, SpaceKind, VecEnv};
use crate::nn::{
    adam_step, clip_global_grad_norm, init_mlp, mlp_forward, Adam, AdamState, Matrix, ParamSet,
};

pub fn caps() -> AlgorithmCaps {
    AlgorithmCaps {
        name: "ppo".into(),
        action_kinds: vec![SpaceKind::ContinuousBox, SpaceKind::Discrete],
    }
}

/// Averages over every minibatch of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub diagnostics: PpoDiagnostics,
    pub grad_norm: f64,
    pub minibatches: usize,
}

pub struct PpoAgent {
    config: PpoConfig,
    head: PolicyHead,
    obs_dim: usize,
    act_dim: usize,
    action_space: Space,
    policy: ParamSet<f32>,
    value: ParamSet<f32>,
    policy_adam: AdamState<f32>,
    value_adam: AdamState<f32>,
    action_rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    learning_rate: f64,
}

impl PpoAgent {
    pub fn new(
        config: PpoConfig,
        observation_space: &Space,
        action_space: &Space,
        seed: u64,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        check_compatibility(&caps(), observation_space, action_space)?;
        let obs_dim = observation_space.flat_dim();
        let (head, out_dim, act_dim) = match action_space {
            Space::Discrete { n } => (PolicyHead::Categorical, *n, 1),
            Space::ContinuousBox { .. } => {
                let d = action_space.flat_dim();
                (
                    PolicyHead::Gaussian {
                        log_std: config.std_dev.ln(),
                    },
                    d,
                    d,
                )
            }
        };
        let h = config.nr_hidden_units;
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT));
        let hidden_gain = 2f64.sqrt();
        let policy = init_mlp(&[obs_dim, h, h, out_dim], hidden_gain, 0.01, &mut init_rng);
        let value = init_mlp(&[obs_dim, h, h, 1], hidden_gain, 1.0, &mut init_rng);
        Ok(Self {
            learning_rate: config.learning_rate,
            policy_adam: AdamState::new(&policy),
            value_adam: AdamState::new(&value),
            config,
            head,
            obs_dim,
            act_dim,
            action_space: action_space.clone(),
            policy,
            value,
            action_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_ACTIONS)),
            shuffle_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SHUFFLE)),
        })
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    pub fn head(&self) -> PolicyHead {
        self.head
    }

    pub fn policy(&self) -> &ParamSet<f32> {
        &self.policy
    }

    pub fn value(&self) -> &ParamSet<f32> {
        &self.value
    }

    pub fn new_buffer(&self) -> RolloutBuffer {
        RolloutBuffer::new(self.config.nr_steps, self.config.nr_envs, self.obs_dim, self.act_dim)
    }

    /// Fills `buffer` from `env` with the current policy.
    pub fn collect(
        &mut self,
        env: &mut VecEnv,
        observations: &mut Vec<Vec<f64>>,
        buffer: &mut RolloutBuffer,
    ) -> Result<(), TrainError> {
        collect_rollout(
            &self.policy,
            &self.value,
            self.head,
            env,
            observations,
            buffer,
            &mut self.action_rng,
            |_| Ok(()),
        )
    }

    /// `nr_epochs` passes of shuffled minibatches over a full buffer.
    pub fn update(&mut self, buffer: &RolloutBuffer) -> Result<UpdateStats, TrainError> {
        if !buffer.is_full() {
            return Err(TrainError::Config("update needs a full rollout buffer".into()));
        }
        let gae = compute_gae(
            &GaeInputs {
                rewards: &buffer.rewards,
                values: &buffer.values,
                final_values: &buffer.final_values,
                bootstrap: &buffer.bootstrap,
                terminated: &buffer.terminated,
                truncated: &buffer.truncated,
                nr_envs: buffer.nr_envs,
            },
            self.config.gamma,
            self.config.gae_lambda,
        )?;
        let coefs = LossCoefs {
            clip_range: self.config.clip_range,
            critic_coef: self.config.critic_coef,
            entropy_coef: self.config.entropy_coef,
        };
        let adam = Adam::new(self.learning_rate);
        let n = buffer.len();
        let mb = self.config.minibatch_size;
        let mut order: Vec<usize> = (0..n).collect();
        let mut stats = UpdateStats::default();
        let mut sums = [0.0f64; 6];
        for epoch in 0..self.config.nr_epochs {
            order.shuffle(&mut self.shuffle_rng);
            for (k, idx) in order.chunks(mb).enumerate() {
                let batch = gather(buffer, &gae, idx);
                let context = |what: &str| format!("{what} (epoch {epoch}, minibatch {k})");
                let mut out = ppo_loss(&self.policy, &self.value, self.head, &batch, &coefs)
                    .map_err(|e| match e {
                        TrainError::Numeric { detail, .. } => TrainError::Numeric {
                            context: context("ppo loss"),
                            detail,
                        },
                        other => other,
                    })?;
                let norm = clip_global_grad_norm(
                    &mut [&mut out.policy_grad, &mut out.value_grad],
                    self.config.max_grad_norm,
                );
                let numeric = |e: crate::nn::NnError| TrainError::Numeric {
                    context: context("adam step"),
                    detail: e.to_string(),
                };
                adam_step(&mut self.policy, &out.policy_grad, &mut self.policy_adam, &adam)
                    .map_err(numeric)?;
                adam_step(&mut self.value, &out.value_grad, &mut self.value_adam, &adam)
                    .map_err(numeric)?;
                let d = out.diagnostics;
                for (s, v) in sums.iter_mut().zip([
                    d.policy_loss,
                    d.value_loss,
                    d.entropy,
                    d.clip_fraction,
                    d.approx_kl,
                    norm,
                ]) {
                    *s += v;
                }
                stats.minibatches += 1;
            }
        }
        let m = stats.minibatches.max(1) as f64;
        stats.diagnostics = PpoDiagnostics {
            policy_loss: sums[0] / m,
            value_loss: sums[1] / m,
            entropy: sums[2] / m,
            clip_fraction: sums[3] / m,
            approx_kl: sums[4] / m,
        };
        stats.grad_norm = sums[5] / m;
        Ok(stats)
    }
}

fn gather(buffer: &RolloutBuffer, gae: &Gae, idx: &[usize]) -> Minibatch<f32> {
    let (od, ad) = (buffer.obs_dim, buffer.act_dim);
    let mut obs = Vec::with_capacity(idx.len() * od);
    let mut act = Vec::with_capacity(idx.len() * ad);
    let mut old = Vec::with_capacity(idx.len());
    let mut adv = Vec::with_capacity(idx.len());
    let mut ret = Vec::with_capacity(idx.len());
    for &j in idx {
        obs.extend_from_slice(&buffer.observations[j * od..(j + 1) * od]);
        act.extend_from_slice(&buffer.actions[j * ad..(j + 1) * ad]);
        old.push(buffer.log_probs[j]);
        adv.push(gae.advantages[j]);
        ret.push(gae.returns[j] as f32);
    }
    normalize_advantages(&mut adv);
    Minibatch {
        observations: Matrix::from_vec(idx.len(), od, obs),
        actions: Matrix::from_vec(idx.len(), ad, act),
        old_log_probs: old,
        advantages: adv.into_iter().map(|a| a as f32).collect(),
        returns: ret,
    }
}

impl Agent for PpoAgent {
    fn train(
        &mut self,
        env: &mut VecEnv,
        total_steps: u64,
        hooks: &mut dyn TrainHooks,
    ) -> Result<TrainSummary, TrainError> {
        let batch = self.config.batch_size() as u64;
        let iterations = total_steps / batch;
        if iterations == 0 {
            return Err(TrainError::Config(format!(
                "total_steps {total_steps} is less than one iteration of nr_steps x nr_envs = {batch}"
            )));
        }
        if env.len() != self.config.nr_envs {
            return Err(TrainError::Config(format!(
                "algorithm.nr_envs is {} but the environment runs {} copies",
                self.config.nr_envs,
                env.len()
            )));
        }
        check_compatibility(&caps(), env.observation_space(), env.action_space())?;
        let nr_envs = env.len();
        let mut observations = env.reset()?;
        let mut stats = EpisodeStats::new(nr_envs);
        let mut buffer = self.new_buffer();
        let mut step = 0u64;
        let mut updates = 0u64;
        for it in 0..iterations {
            if self.config.anneal_learning_rate {
                self.learning_rate =
                    self.config.learning_rate * (1.0 - it as f64 / iterations as f64);
            }
            buffer.clear();
            collect_rollout(
                &self.policy,
                &self.value,
                self.head,
                env,
                &mut observations,
                &mut buffer,
                &mut self.action_rng,
                |results| {
                    step += nr_envs as u64;
                    for (i, r) in results.iter().enumerate() {
                        if let Some(ep) = stats.update(i, r) {
                            hooks.episode(step, &ep)?;
                        }
                    }
                    Ok(())
                },
            )?;
            let u = self.update(&buffer)?;
            updates += u.minibatches as u64;
            let d = u.diagnostics;
            let mut metrics: Vec<(&str, f64)> = Vec::with_capacity(10);
            if let Some(avg) = stats.running_average() {
                metrics.push(("episode_return_running_avg_100", avg));
            }
            if let Some(len) = stats.running_average_length() {
                metrics.push(("episode_length_running_avg_100", len));
            }
            metrics.extend([
                ("policy_loss", d.policy_loss),
                ("value_loss", d.value_loss),
                ("entropy", d.entropy),
                ("clip_fraction", d.clip_fraction),
                ("approx_kl", d.approx_kl),
                ("grad_norm", u.grad_norm),
                ("learning_rate", self.learning_rate),
            ]);
            hooks.metrics(step, &metrics)?;
            if hooks.wants_checkpoint(step) {
                hooks.checkpoint(step, &self.parameters())?;
            }
        }
        Ok(TrainSummary {
            env_steps: step,
            gradient_updates: updates,
        })
    }

    fn parameters(&self) -> ParamSet<f32> {
        ParamSet::merged(&[("policy", &self.policy), ("value", &self.value)])
            .expect("policy and value names are distinct")
    }

    fn load_parameters(&mut self, params: &ParamSet<f32>) -> Result<(), TrainError> {
        let policy = params.scoped("policy");
        let value = params.scoped("value");
        if policy.len() + value.len() != params.len() {
            return Err(TrainError::Config(
                "checkpoint holds entries outside policy.* and value.*".into(),
            ));
        }
        self.policy.ensure_congruent(&policy)?;
        self.value.ensure_congruent(&value)?;
        self.policy.assign(&policy)?;
        self.value.assign(&value)?;
        Ok(())
    }

    fn act_deterministic(&self, observation: &[f64]) -> Result<Vec<f64>, TrainError> {
        if observation.len() != self.obs_dim {
            return Err(TrainError::Config(format!(
                "observation has {} values, expected {}",
                observation.len(),
                self.obs_dim
            )));
        }
        let obs = buffer::to_matrix(&[observation.to_vec()], self.obs_dim);
        let out = mlp_forward(&self.policy, &obs, HIDDEN)?;
        let row = out.row(0);
        Ok(match self.head {
            PolicyHead::Gaussian { .. } => buffer::env_action(self.head, &self.action_space, row),
            PolicyHead::Categorical => {
                let best = row
                    .iter()
                    .enumerate()
                    .fold(0, |b, (k, &v)| if v > row[b] { k } else { b });
                vec![best as f64]
            }
        })
    }
}
