use rayon::prelude::*;

use super::{Env, EnvError, Space, StepResult};

/// Batch of independent environments with immediate autoreset.
///
/// When a sub-environment finishes, the returned observation at its index is
/// the first observation of the next episode and `final_observation` carries
/// the last observation of the finished one.
pub struct VecEnv {
    envs: Vec<Box<dyn Env>>,
    base_seed: u64,
    parallel: bool,
    observation_space: Space,
    action_space: Space,
}

/// Builds `nr_envs` environments from `factory`; sub-env `i` is seeded with
/// `base_seed + i` on [`VecEnv::reset`].
pub fn vectorize<F>(factory: F, nr_envs: usize, base_seed: u64) -> Result<VecEnv, EnvError>
where
    F: Fn(usize) -> Result<Box<dyn Env>, EnvError>,
{
    if nr_envs == 0 {
        return Err(EnvError::Config("nr_envs must be at least 1".into()));
    }
    let envs = (0..nr_envs).map(factory).collect::<Result<Vec<_>, _>>()?;
    let observation_space = envs[0].observation_space().clone();
    let action_space = envs[0].action_space().clone();
    if envs.iter().any(|e| {
        e.observation_space() != &observation_space || e.action_space() != &action_space
    }) {
        return Err(EnvError::Config(
            "sub-environments disagree on their spaces".into(),
        ));
    }
    Ok(VecEnv {
        envs,
        base_seed,
        parallel: false,
        observation_space,
        action_space,
    })
}

impl VecEnv {
    /// Step sub-environments on the rayon pool. Results are still assembled
    /// in index order and match sequential stepping bit for bit.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn observation_space(&self) -> &Space {
        &self.observation_space
    }

    pub fn action_space(&self) -> &Space {
        &self.action_space
    }

    pub fn reset(&mut self) -> Result<Vec<Vec<f64>>, EnvError> {
        let base = self.base_seed;
        let reset_one = |(i, env): (usize, &mut Box<dyn Env>)| env.reset(Some(base.wrapping_add(i as u64)));
        if self.parallel {
            self.envs.par_iter_mut().enumerate().map(reset_one).collect()
        } else {
            self.envs.iter_mut().enumerate().map(reset_one).collect()
        }
    }

    pub fn step(&mut self, actions: &[Vec<f64>]) -> Result<Vec<StepResult>, EnvError> {
        if actions.len() != self.envs.len() {
            return Err(EnvError::Usage(format!(
                "got {} actions for {} environments",
                actions.len(),
                self.envs.len()
            )));
        }
        let step_one = |(env, action): (&mut Box<dyn Env>, &Vec<f64>)| {
            let mut result = env.step(action)?;
            if result.done() {
                let fresh = env.reset(None)?;
                result.final_observation = Some(std::mem::replace(&mut result.observation, fresh));
            }
            Ok(result)
        };
        if self.parallel {
            self.envs.par_iter_mut().zip(actions.par_iter()).map(step_one).collect()
        } else {
            self.envs.iter_mut().zip(actions).map(step_one).collect()
        }
    }
}
