//! Two-armed one-step bandit with a discrete action space.

use crate::env::{Env, EnvError, Space, StepResult};

pub const ARMS: usize = 2;

#[derive(Debug, Clone)]
pub struct Bandit {
    best_arm: usize,
    active: bool,
    observation_space: Space,
    action_space: Space,
}

impl Bandit {
    pub fn new(best_arm: usize) -> Self {
        assert!(best_arm < ARMS, "best arm out of range");
        Self {
            best_arm,
            active: false,
            observation_space: Space::flat_box(vec![0.0], vec![1.0]).expect("static bounds"),
            action_space: Space::discrete(ARMS).expect("static bounds"),
        }
    }
}

impl Env for Bandit {
    fn observation_space(&self) -> &Space {
        &self.observation_space
    }

    fn action_space(&self) -> &Space {
        &self.action_space
    }

    fn reset(&mut self, _seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        self.active = true;
        Ok(vec![1.0])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::Usage("step called on a finished or unreset episode".into()));
        }
        if !self.action_space.contains(action) {
            return Err(EnvError::InvalidAction(format!("{action:?} is not an arm index")));
        }
        self.active = false;
        Ok(StepResult {
            observation: vec![1.0],
            reward: if action[0] as usize == self.best_arm { 1.0 } else { 0.0 },
            terminated: true,
            truncated: false,
            final_observation: None,
        })
    }
}
