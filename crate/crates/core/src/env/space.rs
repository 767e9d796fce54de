use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceKind {
    ContinuousBox,
    Discrete,
}

impl std::fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpaceKind::ContinuousBox => "continuous_box",
            SpaceKind::Discrete => "discrete",
        })
    }
}

/// Action or observation space descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    ContinuousBox {
        low: Vec<f64>,
        high: Vec<f64>,
        shape: Vec<usize>,
    },
    Discrete {
        n: usize,
    },
}

impl Space {
    /// A flat box with the given bounds.
    pub fn flat_box(low: Vec<f64>, high: Vec<f64>) -> Result<Self, EnvError> {
        let shape = vec![low.len()];
        let space = Space::ContinuousBox { low, high, shape };
        space.validate()?;
        Ok(space)
    }

    pub fn discrete(n: usize) -> Result<Self, EnvError> {
        let space = Space::Discrete { n };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        match self {
            Space::ContinuousBox { low, high, shape } => {
                let len: usize = shape.iter().product();
                if low.len() != len || high.len() != len || len == 0 {
                    return Err(EnvError::Config(format!(
                        "box bounds of length {}/{} do not match shape {shape:?}",
                        low.len(),
                        high.len()
                    )));
                }
                if let Some(i) = (0..len).find(|&i| !(low[i] < high[i])) {
                    return Err(EnvError::Config(format!(
                        "box bound {i}: low {} is not below high {}",
                        low[i], high[i]
                    )));
                }
                Ok(())
            }
            Space::Discrete { n } if *n == 0 => {
                Err(EnvError::Config("discrete space needs n >= 1".into()))
            }
            Space::Discrete { .. } => Ok(()),
        }
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            Space::ContinuousBox { .. } => SpaceKind::ContinuousBox,
            Space::Discrete { .. } => SpaceKind::Discrete,
        }
    }

    pub fn is_flat_box(&self) -> bool {
        matches!(self, Space::ContinuousBox { shape, .. } if shape.len() == 1)
    }

    /// Number of scalars in one element: box size, or 1 for a discrete index.
    pub fn flat_dim(&self) -> usize {
        match self {
            Space::ContinuousBox { shape, .. } => shape.iter().product(),
            Space::Discrete { .. } => 1,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Space::ContinuousBox { low, high, .. } => {
                x.len() == low.len()
                    && x
                        .iter()
                        .zip(low.iter().zip(high))
                        .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
            }
            Space::Discrete { n } => {
                x.len() == 1 && x[0] >= 0.0 && x[0].fract() == 0.0 && (x[0] as usize) < *n
            }
        }
    }

    /// Clips a continuous action into the box; discrete spaces are returned
    /// untouched.
    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Space::ContinuousBox { low, high, .. } => x
                .iter()
                .zip(low.iter().zip(high))
                .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
                .collect(),
            Space::Discrete { .. } => x.to_vec(),
        }
    }
}
