use std::fmt;
use std::str::FromStr;

use crate::agent::TrainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetEntropy {
    /// `−dim(A)`.
    Auto,
    Fixed(f64),
}

impl TargetEntropy {
    pub fn resolve(self, action_dim: usize) -> f64 {
        match self {
            TargetEntropy::Auto => -(action_dim as f64),
            TargetEntropy::Fixed(v) => v,
        }
    }
}

impl fmt::Display for TargetEntropy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetEntropy::Auto => f.write_str("auto"),
            TargetEntropy::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for TargetEntropy {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(TargetEntropy::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(TargetEntropy::Fixed)
            .ok_or_else(|| {
                TrainError::Config(format!("target_entropy must be \"auto\" or a number, got {s:?}"))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacConfig {
    pub batch_size: usize,
    pub buffer_size: usize,
    pub learning_starts: u64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub target_entropy: TargetEntropy,
    pub tau: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub nr_hidden_units: usize,
    pub nr_envs: usize,
    /// Environment steps between metric rows.
    pub metrics_interval: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            batch_size: 256,
            buffer_size: 1_000_000,
            learning_starts: 5000,
            log_std_min: -20.0,
            log_std_max: 2.0,
            target_entropy: TargetEntropy::Auto,
            tau: 0.005,
            gamma: 0.99,
            learning_rate: 0.0003,
            nr_hidden_units: 64,
            nr_envs: 1,
            metrics_interval: 1000,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |msg: String| Err(TrainError::Config(msg));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return err(format!("algorithm.tau must lie in (0, 1], got {}", self.tau));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return err(format!("algorithm.gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return err(format!(
                "algorithm.learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.log_std_min < self.log_std_max) {
            return err(format!(
                "algorithm.log_std_min {} must be below log_std_max {}",
                self.log_std_min, self.log_std_max
            ));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("buffer_size", self.buffer_size),
            ("nr_hidden_units", self.nr_hidden_units),
            ("metrics_interval", self.metrics_interval as usize),
        ] {
            if v == 0 {
                return err(format!("algorithm.{name} must be at least 1"));
            }
        }
        if self.nr_envs != 1 {
            return err(format!(
                "SAC trains on exactly one environment, algorithm.nr_envs is {}",
                self.nr_envs
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_entropy_is_minus_action_dim() {
        assert_eq!(TargetEntropy::Auto.resolve(1), -1.0);
        assert_eq!(TargetEntropy::Auto.resolve(6), -6.0);
        assert_eq!("auto".parse::<TargetEntropy>().unwrap(), TargetEntropy::Auto);
        assert_eq!("-2.5".parse::<TargetEntropy>().unwrap(), TargetEntropy::Fixed(-2.5));
        assert!("often".parse::<TargetEntropy>().is_err());
    }

    #[test]
    fn defaults_validate() {
        SacConfig::default().validate().unwrap();
        let bad = SacConfig {
            tau: 0.0,
            ..SacConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
