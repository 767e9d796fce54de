//! Synthetic environment whose step cost is a fixed busy-wait. Used to
//! calibrate the throughput bench.

use std::time::{Duration, Instant};

use crate::env::{Env, EnvError, Space, StepResult};

pub const EPISODE_LENGTH: u32 = 100;

#[derive(Debug, Clone)]
pub struct SpinStub {
    step_time: Duration,
    step_index: u32,
    active: bool,
    observation_space: Space,
    action_space: Space,
}

impl SpinStub {
    pub fn new(step_time: Duration) -> Self {
        Self {
            step_time,
            step_index: 0,
            active: false,
            observation_space: Space::flat_box(vec![0.0], vec![1.0]).expect("static bounds"),
            action_space: Space::flat_box(vec![-1.0], vec![1.0]).expect("static bounds"),
        }
    }
}

fn spin_for(d: Duration) {
    if d.is_zero() {
        return;
    }
    let start = Instant::now();
    while start.elapsed() < d {
        std::hint::spin_loop();
    }
}

impl Env for SpinStub {
    fn observation_space(&self) -> &Space {
        &self.observation_space
    }

    fn action_space(&self) -> &Space {
        &self.action_space
    }

    fn reset(&mut self, _seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        self.step_index = 0;
        self.active = true;
        Ok(vec![0.0])
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::Usage("step called on a finished or unreset episode".into()));
        }
        if action.len() != 1 {
            return Err(EnvError::InvalidAction(format!("expected one value, got {action:?}")));
        }
        spin_for(self.step_time);
        self.step_index += 1;
        let truncated = self.step_index >= EPISODE_LENGTH;
        self.active = !truncated;
        Ok(StepResult {
            observation: vec![f64::from(self.step_index) / f64::from(EPISODE_LENGTH)],
            reward: 0.0,
            terminated: false,
            truncated,
            final_observation: None,
        })
    }
}
