use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use super::config::{ConfigTree, ConfigValue};
use super::RunError;
use crate::agent::Agent;
use crate::bridge::RemoteEnv;
use crate::env::{AlgorithmCaps, Env, EnvError, Space};
use crate::envs::{Bandit, Pendulum, RunTask, SpinStub};
use crate::ppo::{self, PpoAgent, PpoConfig};
use crate::sac::{self, SacAgent, SacConfig, TargetEntropy};

/// Builds sub-environment `index` of a vectorized run.
pub type EnvMaker = Arc<dyn Fn(usize) -> Result<Box<dyn Env>, EnvError> + Send + Sync>;

pub type EnvBuilder = Arc<dyn Fn(&ConfigTree) -> Result<EnvMaker, RunError> + Send + Sync>;

pub type AgentBuilder = Arc<
    dyn Fn(&ConfigTree, &Space, &Space, u64) -> Result<Box<dyn Agent>, RunError> + Send + Sync,
>;

/// A default setting as `(namespace, key, value)`.
pub type DefaultSetting = (&'static str, &'static str, ConfigValue);

#[derive(Clone)]
pub struct AlgorithmEntry {
    pub caps: AlgorithmCaps,
    /// Usually `algorithm.*`; may also adjust `runner.*` defaults.
    pub defaults: Vec<DefaultSetting>,
    pub build: AgentBuilder,
}

#[derive(Clone)]
pub struct EnvironmentEntry {
    /// `environment.*` settings besides `name` and `parallel`.
    pub defaults: Vec<DefaultSetting>,
    /// Observation and action spaces when they are known without
    /// constructing the environment.
    pub spaces: Option<(Space, Space)>,
    pub build: EnvBuilder,
}

#[derive(Clone, Default)]
pub struct Registry {
    algorithms: BTreeMap<String, AlgorithmEntry>,
    environments: BTreeMap<String, EnvironmentEntry>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with ppo, sac and every built-in environment.
    pub fn builtin() -> Self {
        let mut r = Self::new();
        r.register_algorithm("ppo", ppo_entry()).expect("fresh registry");
        r.register_algorithm("sac", sac_entry()).expect("fresh registry");
        for (name, entry) in builtin_environments() {
            r.register_environment(name, entry).expect("fresh registry");
        }
        r
    }

    pub fn register_algorithm(&mut self, name: &str, entry: AlgorithmEntry) -> Result<(), RunError> {
        if self.algorithms.contains_key(name) {
            return Err(RunError::Startup(format!("algorithm {name:?} is already registered")));
        }
        self.algorithms.insert(name.to_string(), entry);
        Ok(())
    }

    pub fn register_environment(
        &mut self,
        name: &str,
        entry: EnvironmentEntry,
    ) -> Result<(), RunError> {
        if self.environments.contains_key(name) {
            return Err(RunError::Startup(format!("environment {name:?} is already registered")));
        }
        self.environments.insert(name.to_string(), entry);
        Ok(())
    }

    pub fn algorithm_names(&self) -> Vec<&str> {
        self.algorithms.keys().map(String::as_str).collect()
    }

    pub fn environment_names(&self) -> Vec<&str> {
        self.environments.keys().map(String::as_str).collect()
    }

    pub fn algorithm(&self, name: &str) -> Result<&AlgorithmEntry, RunError> {
        self.algorithms.get(name).ok_or_else(|| {
            RunError::Usage(format!(
                "unknown algorithm {name:?}; available: {}",
                self.algorithm_names().join(", ")
            ))
        })
    }

    pub fn environment(&self, name: &str) -> Result<&EnvironmentEntry, RunError> {
        self.environments.get(name).ok_or_else(|| {
            RunError::Usage(format!(
                "unknown environment {name:?}; available: {}",
                self.environment_names().join(", ")
            ))
        })
    }
}

fn int(v: i64) -> ConfigValue {
    ConfigValue::Int(v)
}

fn real(v: f64) -> ConfigValue {
    ConfigValue::Real(v)
}

fn usize_of(config: &ConfigTree, key: &str) -> Result<usize, RunError> {
    let v = config.count("algorithm", key)?;
    usize::try_from(v).map_err(|_| RunError::Usage(format!("algorithm.{key} is too large")))
}

pub fn ppo_config_from(config: &ConfigTree) -> Result<PpoConfig, RunError> {
    Ok(PpoConfig {
        clip_range: config.real("algorithm", "clip_range")?,
        critic_coef: config.real("algorithm", "critic_coef")?,
        entropy_coef: config.real("algorithm", "entropy_coef")?,
        gae_lambda: config.real("algorithm", "gae_lambda")?,
        max_grad_norm: config.real("algorithm", "max_grad_norm")?,
        minibatch_size: usize_of(config, "minibatch_size")?,
        nr_epochs: usize_of(config, "nr_epochs")?,
        nr_steps: usize_of(config, "nr_steps")?,
        std_dev: config.real("algorithm", "std_dev")?,
        gamma: config.real("algorithm", "gamma")?,
        learning_rate: config.real("algorithm", "learning_rate")?,
        anneal_learning_rate: config.boolean("algorithm", "anneal_learning_rate")?,
        nr_hidden_units: usize_of(config, "nr_hidden_units")?,
        nr_envs: usize_of(config, "nr_envs")?,
    })
}

pub fn sac_config_from(config: &ConfigTree) -> Result<SacConfig, RunError> {
    let target_entropy: TargetEntropy = config
        .text("algorithm", "target_entropy")?
        .parse()
        .map_err(|e: crate::agent::TrainError| RunError::Usage(e.to_string()))?;
    Ok(SacConfig {
        batch_size: usize_of(config, "batch_size")?,
        buffer_size: usize_of(config, "buffer_size")?,
        learning_starts: config.count("algorithm", "learning_starts")?,
        log_std_min: config.real("algorithm", "log_std_min")?,
        log_std_max: config.real("algorithm", "log_std_max")?,
        target_entropy,
        tau: config.real("algorithm", "tau")?,
        gamma: config.real("algorithm", "gamma")?,
        learning_rate: config.real("algorithm", "learning_rate")?,
        nr_hidden_units: usize_of(config, "nr_hidden_units")?,
        nr_envs: usize_of(config, "nr_envs")?,
        metrics_interval: config.count("algorithm", "metrics_interval")?,
    })
}

fn ppo_entry() -> AlgorithmEntry {
    let d = PpoConfig::default();
    AlgorithmEntry {
        caps: ppo::caps(),
        defaults: vec![
            ("algorithm", "clip_range", real(d.clip_range)),
            ("algorithm", "critic_coef", real(d.critic_coef)),
            ("algorithm", "entropy_coef", real(d.entropy_coef)),
            ("algorithm", "gae_lambda", real(d.gae_lambda)),
            ("algorithm", "max_grad_norm", real(d.max_grad_norm)),
            ("algorithm", "minibatch_size", int(d.minibatch_size as i64)),
            ("algorithm", "nr_epochs", int(d.nr_epochs as i64)),
            ("algorithm", "nr_steps", int(d.nr_steps as i64)),
            ("algorithm", "std_dev", real(d.std_dev)),
            ("algorithm", "gamma", real(d.gamma)),
            ("algorithm", "learning_rate", real(d.learning_rate)),
            ("algorithm", "anneal_learning_rate", ConfigValue::Bool(d.anneal_learning_rate)),
            ("algorithm", "nr_hidden_units", int(d.nr_hidden_units as i64)),
            ("algorithm", "nr_envs", int(d.nr_envs as i64)),
            ("runner", "total_steps", int(500_000)),
        ],
        build: Arc::new(|config, obs, act, seed| {
            let agent = PpoAgent::new(ppo_config_from(config)?, obs, act, seed)?;
            Ok(Box::new(agent) as Box<dyn Agent>)
        }),
    }
}

fn sac_entry() -> AlgorithmEntry {
    let d = SacConfig::default();
    AlgorithmEntry {
        caps: sac::caps(),
        defaults: vec![
            ("algorithm", "batch_size", int(d.batch_size as i64)),
            ("algorithm", "buffer_size", int(d.buffer_size as i64)),
            ("algorithm", "learning_starts", int(d.learning_starts as i64)),
            ("algorithm", "log_std_min", real(d.log_std_min)),
            ("algorithm", "log_std_max", real(d.log_std_max)),
            ("algorithm", "target_entropy", ConfigValue::Text(d.target_entropy.to_string())),
            ("algorithm", "tau", real(d.tau)),
            ("algorithm", "gamma", real(d.gamma)),
            ("algorithm", "learning_rate", real(d.learning_rate)),
            ("algorithm", "nr_hidden_units", int(d.nr_hidden_units as i64)),
            ("algorithm", "nr_envs", int(d.nr_envs as i64)),
            ("algorithm", "metrics_interval", int(d.metrics_interval as i64)),
            ("runner", "total_steps", int(50_000)),
        ],
        build: Arc::new(|config, obs, act, seed| {
            let agent = SacAgent::new(sac_config_from(config)?, obs, act, seed)?;
            Ok(Box::new(agent) as Box<dyn Agent>)
        }),
    }
}

fn fixed<E: Env + 'static>(make: fn() -> E) -> EnvBuilder {
    Arc::new(move |_| Ok(Arc::new(move |_| Ok(Box::new(make()) as Box<dyn Env>)) as EnvMaker))
}

fn spaces_of(env: &dyn Env) -> Option<(Space, Space)> {
    Some((env.observation_space().clone(), env.action_space().clone()))
}

fn builtin_environments() -> Vec<(&'static str, EnvironmentEntry)> {
    vec![
        (
            "run_task",
            EnvironmentEntry {
                defaults: vec![],
                spaces: spaces_of(&RunTask::new()),
                build: fixed(RunTask::new),
            },
        ),
        (
            "pendulum",
            EnvironmentEntry {
                defaults: vec![],
                spaces: spaces_of(&Pendulum::new()),
                build: fixed(Pendulum::new),
            },
        ),
        (
            "bandit",
            EnvironmentEntry {
                defaults: vec![("environment", "best_arm", int(1))],
                spaces: spaces_of(&Bandit::new(1)),
                build: Arc::new(|config| {
                    let arm = config.count("environment", "best_arm")? as usize;
                    if arm >= crate::envs::bandit::ARMS {
                        return Err(RunError::Usage(format!(
                            "environment.best_arm must be below {}, got {arm}",
                            crate::envs::bandit::ARMS
                        )));
                    }
                    Ok(Arc::new(move |_| Ok(Box::new(Bandit::new(arm)) as Box<dyn Env>)) as EnvMaker)
                }),
            },
        ),
        (
            "spin_stub",
            EnvironmentEntry {
                defaults: vec![("environment", "step_time_us", int(100))],
                spaces: spaces_of(&SpinStub::new(Duration::ZERO)),
                build: Arc::new(|config| {
                    let us = config.count("environment", "step_time_us")?;
                    let d = Duration::from_micros(us);
                    Ok(Arc::new(move |_| Ok(Box::new(SpinStub::new(d)) as Box<dyn Env>)) as EnvMaker)
                }),
            },
        ),
        (
            "remote",
            EnvironmentEntry {
                defaults: vec![("environment", "address", ConfigValue::Text("127.0.0.1:5555".into()))],
                spaces: None,
                build: Arc::new(|config| {
                    let address = config.text("environment", "address")?.to_string();
                    Ok(Arc::new(move |_| {
                        Ok(Box::new(RemoteEnv::connect(&address)?) as Box<dyn Env>)
                    }) as EnvMaker)
                }),
            },
        ),
    ]
}
