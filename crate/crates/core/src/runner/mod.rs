//! Registry-driven experiment runner.
//!
//! A run is described by a [`ConfigTree`] with `algorithm.*`, `environment.*`
//! and `runner.*` settings. Defaults come from the selected registry entries;
//! `--<namespace>.<key>=<value>` tokens override them.

mod config;
mod logger;
mod registry;
mod run_dir;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{parse_token, ConfigTree, ConfigValue, NAMESPACES};
pub use logger::{RunLogger, EPISODES_HEADER, METRICS_HEADER};
pub use registry::{
    ppo_config_from, sac_config_from, AgentBuilder, AlgorithmEntry, DefaultSetting, EnvBuilder,
    EnvMaker, EnvironmentEntry, Registry,
};
pub use run_dir::{
    create_run_dir, is_safe_name, RunDir, CHECKPOINT_DIR, EPISODES_FILE, METRICS_FILE,
    SNAPSHOT_FILE,
};

use crate::agent::{Agent, TrainError, TrainSummary};
use crate::env::{check_compatibility, vectorize, CompletedEpisode, Env, EnvError, Mismatch, VecEnv};
use crate::nn::{load_checkpoint, NnError};

pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const EMERGENCY_CHECKPOINT: &str = "emergency.ckpt";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error("startup error: {0}")]
    Startup(String),
    #[error("startup error: {0}")]
    Incompatible(#[from] Mismatch),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("training stopped at a failure: {source}{}", emergency_note(.emergency_checkpoint))]
    Aborted {
        source: TrainError,
        emergency_checkpoint: Option<PathBuf>,
    },
    #[error("environment error: {0}")]
    Env(#[from] EnvError),
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] NnError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

fn emergency_note(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("; emergency checkpoint at {}", p.display()),
        None => String::new(),
    }
}

/// Defaults for `runner.*` shared by every run.
pub fn runner_defaults() -> Vec<DefaultSetting> {
    use ConfigValue::*;
    vec![
        ("runner", "mode", Text("train".into())),
        ("runner", "seed", Int(0)),
        ("runner", "total_steps", Int(500_000)),
        ("runner", "root", Text("runs".into())),
        ("runner", "project", Text("default".into())),
        ("runner", "experiment", Text("default".into())),
        ("runner", "checkpoint_interval", Int(100_000)),
        ("runner", "checkpoint_path", Text(String::new())),
        ("runner", "test_episodes", Int(10)),
        ("runner", "record_wall_time", Bool(false)),
    ]
}

/// Materializes defaults for the named algorithm and environment.
pub fn default_config(
    registry: &Registry,
    algorithm: &str,
    environment: &str,
) -> Result<ConfigTree, RunError> {
    let algo = registry.algorithm(algorithm)?;
    let env = registry.environment(environment)?;
    let mut tree = ConfigTree::new();
    let base = [
        ("algorithm", "name", ConfigValue::Text(algorithm.into())),
        ("environment", "name", ConfigValue::Text(environment.into())),
        ("environment", "parallel", ConfigValue::Bool(false)),
    ];
    for (ns, key, value) in base
        .into_iter()
        .chain(runner_defaults())
        .chain(env.defaults.iter().cloned())
        .chain(algo.defaults.iter().cloned())
    {
        tree.set_default(ns, key, value);
    }
    Ok(tree)
}

fn name_from_tokens(
    tokens: &[(String, String, String)],
    ns: &str,
    available: &[&str],
) -> Result<String, RunError> {
    tokens
        .iter()
        .rev()
        .find(|(n, k, _)| n == ns && k == "name")
        .map(|(_, _, v)| v.clone())
        .ok_or_else(|| {
            RunError::Usage(format!(
                "missing --{ns}.name=<name>; available: {}",
                available.join(", ")
            ))
        })
}

/// Resolves `--<namespace>.<key>=<value>` tokens against the registry.
pub fn parse_cli<S: AsRef<str>>(registry: &Registry, argv: &[S]) -> Result<ConfigTree, RunError> {
    let tokens = argv
        .iter()
        .map(|t| parse_token(t.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let algorithm = name_from_tokens(&tokens, "algorithm", &registry.algorithm_names())?;
    let environment = name_from_tokens(&tokens, "environment", &registry.environment_names())?;
    let mut tree = default_config(registry, &algorithm, &environment)?;
    for (ns, key, value) in &tokens {
        tree.apply_override(ns, key, value)?;
    }
    Ok(tree)
}

/// Reads a config snapshot and applies further override tokens to it.
pub fn config_from_snapshot<S: AsRef<str>>(
    registry: &Registry,
    path: &Path,
    argv: &[S],
) -> Result<ConfigTree, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Usage(format!("cannot read snapshot {}: {e}", path.display())))?;
    let mut tree = ConfigTree::from_toml(&text)?;
    registry.algorithm(tree.text("algorithm", "name")?)?;
    registry.environment(tree.text("environment", "name")?)?;
    for token in argv {
        let (ns, key, value) = parse_token(token.as_ref())?;
        if key == "name" {
            return Err(RunError::Usage(format!(
                "{} cannot change the name stored in a snapshot",
                token.as_ref()
            )));
        }
        tree.apply_override(&ns, &key, &value)?;
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Test,
}

impl Mode {
    fn parse(s: &str) -> Result<Self, RunError> {
        match s {
            "train" => Ok(Mode::Train),
            "test" => Ok(Mode::Test),
            other => Err(RunError::Usage(format!(
                "runner.mode must be train or test, got {other:?}"
            ))),
        }
    }
}

enum Target {
    Train(VecEnv),
    Test(Box<dyn Env>),
}

/// A run whose environment, networks and run directory exist, ready to go.
pub struct PreparedRun {
    config: ConfigTree,
    run_dir: RunDir,
    agent: Box<dyn Agent>,
    target: Target,
    logger: RunLogger,
    seed: u64,
    total_steps: u64,
    test_episodes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Trained {
        run_dir: PathBuf,
        summary: TrainSummary,
        final_checkpoint: PathBuf,
    },
    Tested {
        run_dir: PathBuf,
        returns: Vec<f64>,
        mean_return: f64,
    },
}

impl RunOutcome {
    pub fn run_dir(&self) -> &Path {
        match self {
            RunOutcome::Trained { run_dir, .. } | RunOutcome::Tested { run_dir, .. } => run_dir,
        }
    }
}

/// Checks the algorithm against the environment's declared spaces, if the
/// registry knows them without building the environment.
pub fn check_pair(registry: &Registry, algorithm: &str, environment: &str) -> Result<(), RunError> {
    let algo = registry.algorithm(algorithm)?;
    let env = registry.environment(environment)?;
    if let Some((obs, act)) = &env.spaces {
        check_compatibility(&algo.caps, obs, act)?;
    }
    Ok(())
}

/// Performs every startup step: compatibility check, environment and
/// network construction, checkpoint loading in test mode and run directory
/// creation.
pub fn prepare(registry: &Registry, config: &ConfigTree) -> Result<PreparedRun, RunError> {
    let algorithm = config.text("algorithm", "name")?;
    let environment = config.text("environment", "name")?;
    check_pair(registry, algorithm, environment)?;
    let algo = registry.algorithm(algorithm)?;
    let env_entry = registry.environment(environment)?;
    let mode = Mode::parse(config.text("runner", "mode")?)?;
    let seed = config.count("runner", "seed")?;
    let total_steps = config.count("runner", "total_steps")?;
    let test_episodes = config.count("runner", "test_episodes")?;
    let nr_envs = match config.get("algorithm", "nr_envs") {
        Some(_) => config.count("algorithm", "nr_envs")? as usize,
        None => 1,
    };
    let maker = (env_entry.build)(config)?;
    let target = match mode {
        Mode::Train => {
            let env = vectorize(|i| maker(i), nr_envs, seed)?
                .with_parallel(config.boolean("environment", "parallel")?);
            Target::Train(env)
        }
        Mode::Test => Target::Test(maker(0)?),
    };
    let (obs_space, act_space) = match &target {
        Target::Train(env) => (env.observation_space().clone(), env.action_space().clone()),
        Target::Test(env) => (env.observation_space().clone(), env.action_space().clone()),
    };
    check_compatibility(&algo.caps, &obs_space, &act_space)?;
    let mut agent = (algo.build)(config, &obs_space, &act_space, seed)?;
    if mode == Mode::Test {
        let path = config.text("runner", "checkpoint_path")?;
        if path.is_empty() {
            return Err(RunError::Usage(
                "test mode needs --runner.checkpoint_path=<file>".into(),
            ));
        }
        let params = load_checkpoint(Path::new(path))?;
        agent.load_parameters(&params)?;
    }
    let run_dir = create_run_dir(
        Path::new(config.text("runner", "root")?),
        config.text("runner", "project")?,
        config.text("runner", "experiment")?,
    )?;
    fs::write(run_dir.snapshot(), config.to_toml())?;
    let logger = RunLogger::create(
        &run_dir,
        config.count("runner", "checkpoint_interval")?,
        config.boolean("runner", "record_wall_time")?,
    )?;
    log::info!("run directory {}", run_dir.path().display());
    for line in config.describe().lines() {
        log::info!("config {line}");
    }
    Ok(PreparedRun {
        config: config.clone(),
        run_dir,
        agent,
        target,
        logger,
        seed,
        total_steps,
        test_episodes,
    })
}

impl PreparedRun {
    pub fn config(&self) -> &ConfigTree {
        &self.config
    }

    pub fn run_dir(&self) -> &RunDir {
        &self.run_dir
    }

    pub fn execute(self) -> Result<RunOutcome, RunError> {
        let PreparedRun {
            run_dir,
            mut agent,
            target,
            mut logger,
            seed,
            total_steps,
            test_episodes,
            ..
        } = self;
        logger.restart_clock();
        match target {
            Target::Train(mut env) => {
                let result = agent.train(&mut env, total_steps, &mut logger);
                logger.flush()?;
                let summary = match result {
                    Ok(s) => s,
                    Err(source) => {
                        let emergency_checkpoint = match &source {
                            TrainError::Numeric { .. } => {
                                match logger.save(EMERGENCY_CHECKPOINT, &agent.parameters()) {
                                    Ok(p) => Some(p),
                                    Err(e) => {
                                        log::error!("emergency checkpoint failed: {e}");
                                        None
                                    }
                                }
                            }
                            _ => None,
                        };
                        return Err(RunError::Aborted {
                            source,
                            emergency_checkpoint,
                        });
                    }
                };
                let final_checkpoint = logger.save(FINAL_CHECKPOINT, &agent.parameters())?;
                log::info!(
                    "trained {} environment steps with {} gradient updates",
                    summary.env_steps,
                    summary.gradient_updates
                );
                Ok(RunOutcome::Trained {
                    run_dir: run_dir.path().to_path_buf(),
                    summary,
                    final_checkpoint,
                })
            }
            Target::Test(mut env) => {
                let (returns, steps) =
                    evaluate(agent.as_ref(), env.as_mut(), seed, test_episodes, &mut logger)?;
                let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
                logger.write_metric(steps, "test_mean_return", mean_return)?;
                logger.flush()?;
                log::info!("mean return over {} test episodes: {mean_return}", returns.len());
                Ok(RunOutcome::Tested {
                    run_dir: run_dir.path().to_path_buf(),
                    returns,
                    mean_return,
                })
            }
        }
    }
}

/// Runs deterministic-policy episodes; the first reset uses `seed`. Returns
/// the episode returns and the number of steps taken.
fn evaluate(
    agent: &dyn Agent,
    env: &mut dyn Env,
    seed: u64,
    episodes: u64,
    logger: &mut RunLogger,
) -> Result<(Vec<f64>, u64), RunError> {
    let mut returns = Vec::with_capacity(episodes as usize);
    let mut step = 0u64;
    for k in 0..episodes {
        let mut obs = env.reset(if k == 0 { Some(seed) } else { None })?;
        let mut total = 0.0;
        let mut length = 0u64;
        loop {
            let action = agent.act_deterministic(&obs)?;
            let r = env.step(&action)?;
            total += r.reward;
            length += 1;
            step += 1;
            if r.done() {
                break;
            }
            obs = r.observation;
        }
        logger.write_episode(
            step,
            &CompletedEpisode {
                env_index: 0,
                episode_return: total,
                length,
            },
        )?;
        returns.push(total);
    }
    Ok((returns, step))
}

/// Prepares and executes a run.
pub fn run(registry: &Registry, config: &ConfigTree) -> Result<RunOutcome, RunError> {
    prepare(registry, config)?.execute()
}
