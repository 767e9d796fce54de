//! Minimal dense-network numerical core.
//!
//! Everything here is generic over [`Real`] so the same code paths that train
//! in `f32` can be verified against finite differences in `f64`.

mod adam;
mod checkpoint;
mod clip;
pub mod dist;
mod gradcheck;
mod matrix;
mod mlp;
mod params;
mod real;

use thiserror::Error;

pub use adam::{adam_step, Adam, AdamState};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_HEADER,
};
pub use clip::clip_global_grad_norm;
pub use dist::{gaussian_entropy, gaussian_log_prob, squashed_sample_and_log_prob};
pub use gradcheck::{finite_difference_check, numeric_gradient, GradCheckReport};
pub use matrix::{gemm, Matrix, Op};
pub use mlp::{
    init_mlp, layer_dims, mlp_backward, mlp_backward_tape, mlp_forward, mlp_forward_tape,
    orthogonal, Activation, Tape,
};
pub use params::{ParamEntry, ParamSet};
pub use real::Real;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite value in {entry}")]
    NonFinite { entry: String },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
