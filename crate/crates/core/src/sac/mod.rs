//! Soft actor-critic with twin critics and automatic temperature.

mod config;
mod loss;
mod replay;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use config::{SacConfig, TargetEntropy};
pub use loss::{
    actor_distribution, actor_loss, alpha_loss, critic_loss, critic_target, polyak_update,
    q_values, sample_actions, ActorLoss, CriticLoss, LogStdBounds, HIDDEN,
};
pub use replay::{ReplayBuffer, SacBatch, Transition};

use crate::agent::{
    derive_seed, Agent, TrainError, TrainHooks, TrainSummary, STREAM_ACTIONS, STREAM_INIT,
    STREAM_REPLAY,
};
use crate::env::{check_compatibility, AlgorithmCaps, EpisodeStats, Space, SpaceKind, VecEnv};
use crate::nn::{adam_step, init_mlp, Adam, AdamState, Matrix, NnError, ParamSet};

pub fn caps() -> AlgorithmCaps {
    AlgorithmCaps {
        name: "sac".into(),
        action_kinds: vec![SpaceKind::ContinuousBox],
    }
}

/// Losses of one gradient step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepLosses {
    pub critic: f64,
    pub actor: f64,
    pub alpha: f64,
}

pub struct SacAgent {
    config: SacConfig,
    obs_dim: usize,
    act_dim: usize,
    low: Vec<f64>,
    high: Vec<f64>,
    target_entropy: f64,
    bounds: LogStdBounds,
    actor: ParamSet<f32>,
    q1: ParamSet<f32>,
    q2: ParamSet<f32>,
    q1_target: ParamSet<f32>,
    q2_target: ParamSet<f32>,
    log_alpha: ParamSet<f32>,
    actor_adam: AdamState<f32>,
    q1_adam: AdamState<f32>,
    q2_adam: AdamState<f32>,
    alpha_adam: AdamState<f32>,
    replay: ReplayBuffer,
    action_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    updates: u64,
}

impl SacAgent {
    pub fn new(
        config: SacConfig,
        observation_space: &Space,
        action_space: &Space,
        seed: u64,
    ) -> Result<Self, TrainError> {
        config.validate()?;
        check_compatibility(&caps(), observation_space, action_space)?;
        let (low, high) = match action_space {
            Space::ContinuousBox { low, high, .. } => (low.clone(), high.clone()),
            Space::Discrete { .. } => unreachable!("compatibility check admits boxes only"),
        };
        if low.iter().chain(&high).any(|x| !x.is_finite()) {
            return Err(TrainError::Config("SAC needs a bounded action box".into()));
        }
        let obs_dim = observation_space.flat_dim();
        let act_dim = action_space.flat_dim();
        let h = config.nr_hidden_units;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT));
        let g = 2f64.sqrt();
        let actor = init_mlp(&[obs_dim, h, h, 2 * act_dim], g, 0.01, &mut rng);
        let q1 = init_mlp(&[obs_dim + act_dim, h, h, 1], g, 1.0, &mut rng);
        let q2 = init_mlp(&[obs_dim + act_dim, h, h, 1], g, 1.0, &mut rng);
        let mut log_alpha = ParamSet::new();
        log_alpha.push("log_alpha", vec![1], vec![0.0f32])?;
        Ok(Self {
            target_entropy: config.target_entropy.resolve(act_dim),
            bounds: LogStdBounds {
                min: config.log_std_min,
                max: config.log_std_max,
            },
            replay: ReplayBuffer::new(config.buffer_size, obs_dim, act_dim),
            actor_adam: AdamState::new(&actor),
            q1_adam: AdamState::new(&q1),
            q2_adam: AdamState::new(&q2),
            alpha_adam: AdamState::new(&log_alpha),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            config,
            obs_dim,
            act_dim,
            low,
            high,
            actor,
            q1,
            q2,
            log_alpha,
            action_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_ACTIONS)),
            replay_rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_REPLAY)),
            updates: 0,
        })
    }

    pub fn config(&self) -> &SacConfig {
        &self.config
    }

    pub fn alpha(&self) -> f64 {
        f64::from(self.log_alpha.values(0)[0]).exp()
    }

    pub fn gradient_updates(&self) -> u64 {
        self.updates
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    pub fn actor(&self) -> &ParamSet<f32> {
        &self.actor
    }

    /// Maps a squashed action in `[−1, 1]` onto the action box.
    fn to_env(&self, squashed: &[f64]) -> Vec<f64> {
        squashed
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(&a, (&l, &h))| (l + 0.5 * (a + 1.0) * (h - l)).clamp(l, h))
            .collect()
    }

    fn noise(&mut self, rows: usize) -> Matrix<f32> {
        let data = (0..rows * self.act_dim)
            .map(|_| self.action_rng.sample::<f32, _>(StandardNormal))
            .collect();
        Matrix::from_vec(rows, self.act_dim, data)
    }

    /// Stochastic squashed action for `observation`.
    fn act_stochastic(&mut self, observation: &[f64]) -> Result<Vec<f64>, TrainError> {
        let obs = Matrix::from_vec(1, self.obs_dim, observation.iter().map(|&x| x as f32).collect());
        let noise = self.noise(1);
        let (a, _) = sample_actions(&self.actor, &obs, &noise, self.bounds)?;
        Ok(a.row(0).iter().map(|&x| f64::from(x)).collect())
    }

    /// One critic, actor, temperature and target update from a replay batch.
    pub fn gradient_step(&mut self) -> Result<StepLosses, TrainError> {
        let batch: SacBatch<f32> = self
            .replay
            .sample(self.config.batch_size, &mut self.replay_rng)?;
        let alpha = self.alpha() as f32;
        let next_noise = self.noise(batch.len());
        let y = critic_target(
            &batch,
            &self.q1_target,
            &self.q2_target,
            &self.actor,
            alpha,
            self.config.gamma,
            &next_noise,
            self.bounds,
        )?;
        let adam = Adam::new(self.config.learning_rate);
        let step = self.updates;
        let numeric = |what: &'static str| {
            move |e: NnError| TrainError::Numeric {
                context: format!("{what} update {step}"),
                detail: e.to_string(),
            }
        };
        let c = critic_loss(&self.q1, &self.q2, &batch, &y)?;
        adam_step(&mut self.q1, &c.grad1, &mut self.q1_adam, &adam).map_err(numeric("critic"))?;
        adam_step(&mut self.q2, &c.grad2, &mut self.q2_adam, &adam).map_err(numeric("critic"))?;

        let noise = self.noise(batch.len());
        let a = actor_loss(
            &self.actor,
            &self.q1,
            &self.q2,
            alpha,
            &batch.observations,
            &noise,
            self.bounds,
        )?;
        adam_step(&mut self.actor, &a.grad, &mut self.actor_adam, &adam).map_err(numeric("actor"))?;

        let (al, ag) = alpha_loss(self.log_alpha.values(0)[0], &a.log_probs, self.target_entropy);
        let mut grad = self.log_alpha.zeros_like();
        grad.values_mut(0)[0] = ag;
        adam_step(&mut self.log_alpha, &grad, &mut self.alpha_adam, &adam)
            .map_err(numeric("alpha"))?;

        polyak_update(&mut self.q1_target, &self.q1, self.config.tau)?;
        polyak_update(&mut self.q2_target, &self.q2, self.config.tau)?;
        self.updates += 1;
        Ok(StepLosses {
            critic: f64::from(c.loss),
            actor: f64::from(a.loss),
            alpha: f64::from(al),
        })
    }
}

impl Agent for SacAgent {
    fn train(
        &mut self,
        env: &mut VecEnv,
        total_steps: u64,
        hooks: &mut dyn TrainHooks,
    ) -> Result<TrainSummary, TrainError> {
        if env.len() != 1 {
            return Err(TrainError::Config(format!(
                "SAC trains on exactly one environment, got {}",
                env.len()
            )));
        }
        if self.config.learning_starts > total_steps {
            return Err(TrainError::Config(format!(
                "algorithm.learning_starts {} exceeds total_steps {total_steps}",
                self.config.learning_starts
            )));
        }
        check_compatibility(&caps(), env.observation_space(), env.action_space())?;
        let mut observation = env.reset()?.pop().expect("one env");
        let mut stats = EpisodeStats::new(1);
        let start_updates = self.updates;
        let mut window = (StepLosses::default(), 0u64);
        for s in 0..total_steps {
            let squashed: Vec<f64> = if s < self.config.learning_starts {
                (0..self.act_dim)
                    .map(|_| self.action_rng.random_range(-1.0..=1.0))
                    .collect()
            } else {
                self.act_stochastic(&observation)?
            };
            let action = self.to_env(&squashed);
            let result = env.step(&[action])?.pop().expect("one env");
            let next = match &result.final_observation {
                Some(f) => f.clone(),
                None => result.observation.clone(),
            };
            self.replay.insert(&Transition {
                observation: std::mem::take(&mut observation),
                action: squashed,
                reward: result.reward,
                next_observation: next,
                terminated: result.terminated,
            })?;
            let step = s + 1;
            if let Some(ep) = stats.update(0, &result) {
                hooks.episode(step, &ep)?;
            }
            observation = result.observation;

            if step > self.config.learning_starts {
                let l = self.gradient_step()?;
                window.0.critic += l.critic;
                window.0.actor += l.actor;
                window.0.alpha += l.alpha;
                window.1 += 1;
            }
            if step % self.config.metrics_interval == 0 || step == total_steps {
                let mut metrics: Vec<(&str, f64)> = Vec::with_capacity(7);
                if let Some(avg) = stats.running_average() {
                    metrics.push(("episode_return_running_avg_100", avg));
                }
                if let Some(len) = stats.running_average_length() {
                    metrics.push(("episode_length_running_avg_100", len));
                }
                if window.1 > 0 {
                    let k = window.1 as f64;
                    metrics.extend([
                        ("critic_loss", window.0.critic / k),
                        ("actor_loss", window.0.actor / k),
                        ("alpha_loss", window.0.alpha / k),
                    ]);
                }
                metrics.push(("alpha", self.alpha()));
                hooks.metrics(step, &metrics)?;
                window = (StepLosses::default(), 0);
            }
            if hooks.wants_checkpoint(step) {
                hooks.checkpoint(step, &self.parameters())?;
            }
        }
        Ok(TrainSummary {
            env_steps: total_steps,
            gradient_updates: self.updates - start_updates,
        })
    }

    fn parameters(&self) -> ParamSet<f32> {
        ParamSet::merged(&[
            ("actor", &self.actor),
            ("q1", &self.q1),
            ("q2", &self.q2),
            ("q1_target", &self.q1_target),
            ("q2_target", &self.q2_target),
            ("alpha", &self.log_alpha),
        ])
        .expect("network prefixes are distinct")
    }

    fn load_parameters(&mut self, params: &ParamSet<f32>) -> Result<(), TrainError> {
        let parts = [
            params.scoped("actor"),
            params.scoped("q1"),
            params.scoped("q2"),
            params.scoped("q1_target"),
            params.scoped("q2_target"),
            params.scoped("alpha"),
        ];
        if parts.iter().map(|p| p.len()).sum::<usize>() != params.len() {
            return Err(TrainError::Config(
                "checkpoint holds entries outside the SAC networks".into(),
            ));
        }
        let dests = [
            &self.actor,
            &self.q1,
            &self.q2,
            &self.q1_target,
            &self.q2_target,
            &self.log_alpha,
        ];
        for (d, p) in dests.iter().zip(&parts) {
            d.ensure_congruent(p)?;
        }
        let [actor, q1, q2, q1t, q2t, alpha] = parts;
        self.actor.assign(&actor)?;
        self.q1.assign(&q1)?;
        self.q2.assign(&q2)?;
        self.q1_target.assign(&q1t)?;
        self.q2_target.assign(&q2t)?;
        self.log_alpha.assign(&alpha)?;
        Ok(())
    }

    fn act_deterministic(&self, observation: &[f64]) -> Result<Vec<f64>, TrainError> {
        if observation.len() != self.obs_dim {
            return Err(TrainError::Config(format!(
                "observation has {} values, expected {}",
                observation.len(),
                self.obs_dim
            )));
        }
        let obs = Matrix::from_vec(1, self.obs_dim, observation.iter().map(|&x| x as f32).collect());
        let (mean, _) = actor_distribution(&self.actor, &obs, self.bounds)?;
        let squashed: Vec<f64> = mean.row(0).iter().map(|&m| f64::from(m.tanh())).collect();
        Ok(self.to_env(&squashed))
    }
}
