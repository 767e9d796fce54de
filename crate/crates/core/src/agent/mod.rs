//! What the runner needs from an algorithm.

use thiserror::Error;

use crate::env::{CompletedEpisode, EnvError, Mismatch, VecEnv};
use crate::nn::{NnError, ParamSet};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Incompatible(#[from] Mismatch),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("numeric error during {context}: {detail}")]
    Numeric { context: String, detail: String },
    #[error("{0}")]
    Hook(String),
}

/// Callbacks invoked by a training loop. `step` always counts environment
/// transitions summed over all sub-environments.
pub trait TrainHooks {
    fn episode(&mut self, step: u64, episode: &CompletedEpisode) -> Result<(), TrainError>;

    fn metrics(&mut self, step: u64, metrics: &[(&str, f64)]) -> Result<(), TrainError>;

    fn wants_checkpoint(&mut self, _step: u64) -> bool {
        false
    }

    fn checkpoint(&mut self, _step: u64, _params: &ParamSet<f32>) -> Result<(), TrainError> {
        Ok(())
    }
}

/// Hooks that discard everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullHooks;

impl TrainHooks for NullHooks {
    fn episode(&mut self, _step: u64, _episode: &CompletedEpisode) -> Result<(), TrainError> {
        Ok(())
    }

    fn metrics(&mut self, _step: u64, _metrics: &[(&str, f64)]) -> Result<(), TrainError> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSummary {
    pub env_steps: u64,
    pub gradient_updates: u64,
}

pub trait Agent {
    /// Trains for at most `total_steps` environment transitions.
    fn train(
        &mut self,
        env: &mut VecEnv,
        total_steps: u64,
        hooks: &mut dyn TrainHooks,
    ) -> Result<TrainSummary, TrainError>;

    /// All network parameters under stable names, suitable for checkpoints.
    fn parameters(&self) -> ParamSet<f32>;

    fn load_parameters(&mut self, params: &ParamSet<f32>) -> Result<(), TrainError>;

    /// Noise-free action for evaluation, already inside the action space.
    fn act_deterministic(&self, observation: &[f64]) -> Result<Vec<f64>, TrainError>;
}

/// splitmix64 finalizer applied to `master + stream · golden gamma`.
///
/// Streams used by this crate: 1 network init, 2 action sampling,
/// 3 minibatch shuffling, 4 replay sampling.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const STREAM_INIT: u64 = 1;
pub const STREAM_ACTIONS: u64 = 2;
pub const STREAM_SHUFFLE: u64 = 3;
pub const STREAM_REPLAY: u64 = 4;
