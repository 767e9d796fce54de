use thiserror::Error;

use super::{Space, SpaceKind};

/// What an algorithm can consume.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmCaps {
    pub name: String,
    pub action_kinds: Vec<SpaceKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{algorithm} cannot run on this environment: {axis} space: {detail}")]
pub struct Mismatch {
    pub algorithm: String,
    /// `"action"` or `"observation"`.
    pub axis: &'static str,
    pub detail: String,
}

/// All algorithms require flat continuous-box observations; action support
/// is per algorithm.
pub fn check_compatibility(
    caps: &AlgorithmCaps,
    observation_space: &Space,
    action_space: &Space,
) -> Result<(), Mismatch> {
    if !observation_space.is_flat_box() {
        return Err(Mismatch {
            algorithm: caps.name.clone(),
            axis: "observation",
            detail: match observation_space.kind() {
                SpaceKind::Discrete => "discrete unsupported".into(),
                SpaceKind::ContinuousBox => "only flat boxes are supported".into(),
            },
        });
    }
    let kind = action_space.kind();
    if !caps.action_kinds.contains(&kind) {
        return Err(Mismatch {
            algorithm: caps.name.clone(),
            axis: "action",
            detail: format!("{kind} unsupported"),
        });
    }
    if kind == SpaceKind::ContinuousBox && !action_space.is_flat_box() {
        return Err(Mismatch {
            algorithm: caps.name.clone(),
            axis: "action",
            detail: "only flat boxes are supported".into(),
        });
    }
    Ok(())
}
