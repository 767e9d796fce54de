//! Generic interface between algorithms and environments.
//!
//! Any [`Env`] whose spaces an algorithm supports can be trained on. Actions
//! are flat `f64` slices; a discrete action is a single integral value.

mod compat;
mod space;
mod stats;
mod vec_env;

use thiserror::Error;

pub use compat::{check_compatibility, AlgorithmCaps, Mismatch};
pub use space::{Space, SpaceKind};
pub use stats::{running_mean, CompletedEpisode, EpisodeStats, RUNNING_WINDOW};
pub use vec_env::{vectorize, VecEnv};

#[derive(Debug, Error)]
pub enum EnvError {
    /// Contract violation by the caller, e.g. stepping a finished episode.
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("environment configuration error: {0}")]
    Config(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("remote environment error [{code}]: {message}")]
    Remote { code: String, message: String },
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// The episode reached a terminal state; nothing is bootstrapped past it.
    pub terminated: bool,
    /// The episode hit its time limit; the value of the last state still counts.
    pub truncated: bool,
    /// Set by [`VecEnv`] when an autoreset replaced `observation`.
    pub final_observation: Option<Vec<f64>>,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

pub trait Env: Send {
    fn observation_space(&self) -> &Space;

    fn action_space(&self) -> &Space;

    /// Starts a new episode. `Some(seed)` reseeds the environment; `None`
    /// continues its random stream.
    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError>;

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
}

impl<E: Env + ?Sized> Env for Box<E> {
    fn observation_space(&self) -> &Space {
        (**self).observation_space()
    }

    fn action_space(&self) -> &Space {
        (**self).action_space()
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        (**self).reset(seed)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        (**self).step(action)
    }
}
