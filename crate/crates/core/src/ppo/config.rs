use crate::agent::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip_range: f64,
    pub critic_coef: f64,
    pub entropy_coef: f64,
    pub gae_lambda: f64,
    pub max_grad_norm: f64,
    pub minibatch_size: usize,
    pub nr_epochs: usize,
    pub nr_steps: usize,
    /// Fixed standard deviation of the Gaussian policy.
    pub std_dev: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Linear decay of the learning rate to zero over the run.
    pub anneal_learning_rate: bool,
    pub nr_hidden_units: usize,
    pub nr_envs: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip_range: 0.2,
            critic_coef: 0.5,
            entropy_coef: 0.0,
            gae_lambda: 0.95,
            max_grad_norm: 0.5,
            minibatch_size: 1536,
            nr_epochs: 10,
            nr_steps: 2048,
            std_dev: 0.3,
            gamma: 0.99,
            learning_rate: 0.0003,
            anneal_learning_rate: false,
            nr_hidden_units: 64,
            nr_envs: 24,
        }
    }
}

impl PpoConfig {
    /// Samples collected per iteration.
    pub fn batch_size(&self) -> usize {
        self.nr_steps * self.nr_envs
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let err = |msg: String| Err(TrainError::Config(msg));
        for (name, v) in [
            ("clip_range", self.clip_range),
            ("max_grad_norm", self.max_grad_norm),
            ("std_dev", self.std_dev),
            ("learning_rate", self.learning_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(format!("algorithm.{name} must be positive and finite, got {v}"));
            }
        }
        for (name, v) in [("critic_coef", self.critic_coef), ("entropy_coef", self.entropy_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                return err(format!("algorithm.{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("algorithm.{name} must lie in [0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("minibatch_size", self.minibatch_size),
            ("nr_epochs", self.nr_epochs),
            ("nr_steps", self.nr_steps),
            ("nr_hidden_units", self.nr_hidden_units),
            ("nr_envs", self.nr_envs),
        ] {
            if v == 0 {
                return err(format!("algorithm.{name} must be at least 1"));
            }
        }
        if self.batch_size() % self.minibatch_size != 0 {
            return err(format!(
                "algorithm.minibatch_size {} does not divide nr_steps x nr_envs = {}",
                self.minibatch_size,
                self.batch_size()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_split_into_32_minibatches() {
        let c = PpoConfig::default();
        assert_eq!(c.batch_size(), 49152);
        assert_eq!(c.batch_size() / c.minibatch_size, 32);
        c.validate().unwrap();
    }

    #[test]
    fn non_dividing_minibatch_is_rejected() {
        let c = PpoConfig {
            nr_envs: 1,
            ..PpoConfig::default()
        };
        assert!(matches!(c.validate(), Err(TrainError::Config(_))));
    }
}
