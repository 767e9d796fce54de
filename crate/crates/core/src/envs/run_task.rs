//! Point-mass running task: accelerate toward a goal 30 m away within 8 s.
//!
//! The reward each step is the reduction in distance to the goal, so an
//! episode's return telescopes to `30 − final distance`.

use crate::env::{Env, EnvError, Space, StepResult};

pub const GOAL_POSITION: f64 = 30.0;
pub const DT: f64 = 0.05;
pub const MAX_STEPS: u32 = 160;
pub const MAX_SPEED: f64 = 2.0;
pub const MAX_ACCEL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunTaskState {
    pub position: f64,
    pub velocity: f64,
    pub step_index: u32,
}

#[derive(Debug, Clone)]
pub struct RunTask {
    state: RunTaskState,
    active: bool,
    observation_space: Space,
    action_space: Space,
}

impl Default for RunTask {
    fn default() -> Self {
        Self::new()
    }
}

impl RunTask {
    pub fn new() -> Self {
        Self {
            state: RunTaskState {
                position: 0.0,
                velocity: 0.0,
                step_index: 0,
            },
            active: false,
            // Distance stays within [30 − 16, 30 + 16] m, so its normalized
            // value lies inside [0, 2].
            observation_space: Space::flat_box(vec![0.0, -1.0, 0.0], vec![2.0, 1.0, 1.0])
                .expect("static bounds"),
            action_space: Space::flat_box(vec![-MAX_ACCEL], vec![MAX_ACCEL]).expect("static bounds"),
        }
    }

    /// Places the mass in an arbitrary mid-episode state.
    pub fn set_state(&mut self, state: RunTaskState) {
        self.state = state;
        self.active = state.step_index < MAX_STEPS;
    }

    pub fn state(&self) -> RunTaskState {
        self.state
    }

    pub fn distance_to_goal(&self) -> f64 {
        (GOAL_POSITION - self.state.position).abs()
    }

    fn observation(&self) -> Vec<f64> {
        vec![
            self.distance_to_goal() / GOAL_POSITION,
            self.state.velocity / MAX_SPEED,
            1.0 - f64::from(self.state.step_index) / f64::from(MAX_STEPS),
        ]
    }
}

impl Env for RunTask {
    fn observation_space(&self) -> &Space {
        &self.observation_space
    }

    fn action_space(&self) -> &Space {
        &self.action_space
    }

    fn reset(&mut self, _seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        self.state = RunTaskState {
            position: 0.0,
            velocity: 0.0,
            step_index: 0,
        };
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
        let accel = action[0].clamp(-MAX_ACCEL, MAX_ACCEL);
        let before = self.distance_to_goal();
        let s = &mut self.state;
        s.velocity = (s.velocity + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        s.position += s.velocity * DT;
        s.step_index += 1;
        let reward = before - self.distance_to_goal();
        let terminated = self.state.position >= GOAL_POSITION;
        let truncated = !terminated && self.state.step_index >= MAX_STEPS;
        self.active = !(terminated || truncated);
        Ok(StepResult {
            observation: self.observation(),
            reward,
            terminated,
            truncated,
            final_observation: None,
        })
    }
}
