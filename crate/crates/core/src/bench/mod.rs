//! Throughput benchmark: timed training runs over several seeds,
//! normalized against a baseline configuration.
//!
//! The timed window covers the training loop only, including environment
//! stepping, updates, metric logging and the final checkpoint. Environment
//! construction and network initialization happen before it starts.

mod report;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Deserialize;
use thiserror::Error;

pub use report::{parse_report_csv, relative_report, ParsedReport, Report, ReportRow};

use crate::runner::{is_safe_name, parse_cli, prepare, Registry, RunError, RunOutcome};

pub const MIN_STEP_BUDGET: u64 = 1000;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("malformed report: {0}")]
    Report(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// One benchmarked configuration: a label and runner override tokens.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct BenchConfig {
    pub label: String,
    pub args: Vec<String>,
}

#[derive(Deserialize)]
struct BenchFile {
    configurations: Vec<BenchConfig>,
}

/// Parses `[[configurations]]` tables with `label` and `args`.
pub fn parse_bench_file(text: &str) -> Result<Vec<BenchConfig>, BenchError> {
    let file: BenchFile =
        toml::from_str(text).map_err(|e| BenchError::Usage(format!("invalid bench file: {e}")))?;
    if file.configurations.is_empty() {
        return Err(BenchError::Usage("bench file lists no configurations".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for c in &file.configurations {
        if !is_safe_name(&c.label) {
            return Err(BenchError::Usage(format!(
                "label {:?} must use letters, digits, '-', '_' or '.'",
                c.label
            )));
        }
        if !seen.insert(c.label.as_str()) {
            return Err(BenchError::Usage(format!("duplicate label {:?}", c.label)));
        }
    }
    Ok(file.configurations)
}

pub fn load_bench_file(path: &Path) -> Result<Vec<BenchConfig>, BenchError> {
    parse_bench_file(&fs::read_to_string(path)?)
}

/// Desk-scale budget per algorithm, or the long budget with `long_budget`.
pub fn default_budget(algorithm: &str, long_budget: bool) -> u64 {
    match (algorithm, long_budget) {
        ("sac", false) => 10_000,
        ("sac", true) => 50_000,
        (_, false) => 50_000,
        (_, true) => 500_000,
    }
}

/// Runs `f` and returns its result with the elapsed wall time.
pub fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

/// Throughput of one configuration; `None` marks a failed seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub label: String,
    pub seeds: Vec<u64>,
    pub steps_per_second: Vec<Option<f64>>,
}

impl BenchResult {
    pub fn completed(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps_per_second.iter().flatten().copied()
    }

    pub fn failed(&self) -> usize {
        self.steps_per_second.iter().filter(|v| v.is_none()).count()
    }

    /// Mean over completed seeds; NaN when none completed.
    pub fn mean(&self) -> f64 {
        mean(&self.completed().collect::<Vec<_>>())
    }

    /// Sample standard deviation over completed seeds; 0 for one seed.
    pub fn std(&self) -> f64 {
        sample_std(&self.completed().collect::<Vec<_>>())
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => f64::NAN,
        1 => 0.0,
        n => {
            let m = mean(xs);
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        }
    }
}

/// Label of the algorithm a configuration selects.
pub fn algorithm_of(registry: &Registry, config: &BenchConfig) -> Result<String, BenchError> {
    let tree = parse_cli(registry, &config.args)?;
    Ok(tree.text("algorithm", "name").map_err(BenchError::from)?.to_string())
}

/// Trains `config` once per seed for `step_budget` steps, sequentially,
/// writing run directories under `root/bench/<label>/`.
///
/// Steps per second are the environment steps actually trained divided by
/// the timed window. A seed whose run fails is reported as `None`.
pub fn measure_throughput(
    registry: &Registry,
    config: &BenchConfig,
    step_budget: u64,
    seeds: &[u64],
    root: &Path,
) -> Result<BenchResult, BenchError> {
    if step_budget < MIN_STEP_BUDGET {
        return Err(BenchError::Usage(format!(
            "step budget must be at least {MIN_STEP_BUDGET}, got {step_budget}"
        )));
    }
    if seeds.is_empty() {
        return Err(BenchError::Usage("at least one seed is required".into()));
    }
    let mut steps_per_second = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut argv = config.args.clone();
        argv.extend([
            format!("--runner.total_steps={step_budget}"),
            format!("--runner.seed={seed}"),
            format!("--runner.root={}", root.display()),
            "--runner.project=bench".to_string(),
            format!("--runner.experiment={}", config.label),
            "--runner.mode=train".to_string(),
            "--runner.checkpoint_interval=0".to_string(),
        ]);
        let tree = parse_cli(registry, &argv)?;
        let measured = prepare(registry, &tree).and_then(|p| {
            let (outcome, elapsed) = timed(|| p.execute());
            match outcome? {
                RunOutcome::Trained { summary, .. } => {
                    Ok(summary.env_steps as f64 / elapsed.as_secs_f64())
                }
                RunOutcome::Tested { .. } => unreachable!("bench forces train mode"),
            }
        });
        match measured {
            Ok(sps) => {
                log::info!("bench {} seed {seed}: {sps:.1} steps/s", config.label);
                steps_per_second.push(Some(sps));
            }
            Err(e) => {
                log::warn!("bench {} seed {seed} failed: {e}", config.label);
                steps_per_second.push(None);
            }
        }
    }
    Ok(BenchResult {
        label: config.label.clone(),
        seeds: seeds.to_vec(),
        steps_per_second,
    })
}
