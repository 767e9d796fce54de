//! Torque-limited pendulum swing-up (θ = 0 is upright).

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Env, EnvError, Space, StepResult};

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_STEPS: u32 = 200;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        x -= 2.0 * PI;
    }
    x
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    step_index: u32,
    active: bool,
    rng: ChaCha8Rng,
    observation_space: Space,
    action_space: Space,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            theta: 0.0,
            theta_dot: 0.0,
            step_index: 0,
            active: false,
            rng: ChaCha8Rng::seed_from_u64(0),
            observation_space: Space::flat_box(
                vec![-1.0, -1.0, -MAX_SPEED],
                vec![1.0, 1.0, MAX_SPEED],
            )
            .expect("static bounds"),
            action_space: Space::flat_box(vec![-MAX_TORQUE], vec![MAX_TORQUE])
                .expect("static bounds"),
        }
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.active = true;
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Env for Pendulum {
    fn observation_space(&self) -> &Space {
        &self.observation_space
    }

    fn action_space(&self) -> &Space {
        &self.action_space
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.theta = self.rng.random_range(-PI..PI);
        self.theta_dot = self.rng.random_range(-1.0..1.0);
        self.step_index = 0;
        self.active = true;
        Ok(self.observation())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::Usage("step called on a finished or unreset episode".into()));
        }
        if action.len() != 1 || !action[0].is_finite() {
            return Err(EnvError::InvalidAction(format!("expected one finite value, got {action:?}")));
        }
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;
        self.step_index += 1;
        let truncated = self.step_index >= MAX_STEPS;
        self.active = !truncated;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated: false,
            truncated,
            final_observation: None,
        })
    }
}
