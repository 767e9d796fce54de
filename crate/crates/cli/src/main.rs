use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use rlxkit::bench::{
    algorithm_of, default_budget, load_bench_file, measure_throughput, relative_report, BenchError,
};
use rlxkit::bridge::serve_env;
use rlxkit::runner::{
    config_from_snapshot, parse_cli, parse_token, run, ConfigTree, Registry, RunError, RunOutcome,
};

#[derive(Parser)]
#[command(name = "rlxkit", version, about = "Train, serve and benchmark PPO/SAC agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train or test an agent. Settings are --<namespace>.<key>=<value>
    /// tokens, e.g. --algorithm.name=ppo --environment.name=run_task.
    Run {
        /// Start from a saved config.snapshot instead of registry defaults.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dry_run: bool,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "SETTINGS")]
        settings: Vec<String>,
    },
    /// Serve a registered environment over TCP.
    Serve {
        #[arg(long)]
        env: String,
        #[arg(long, default_value = "127.0.0.1:5555")]
        bind: String,
        /// --environment.<key>=<value> settings for the served environment.
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "SETTINGS")]
        settings: Vec<String>,
    },
    /// Measure training throughput relative to a baseline configuration.
    Bench {
        /// TOML file with [[configurations]] label/args tables.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        baseline: String,
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        /// Environment steps per run; defaults to 50000 for PPO and 10000 for SAC.
        #[arg(long)]
        budget: Option<u64>,
        /// Use 500000 steps for PPO and 50000 for SAC as default budgets.
        #[arg(long)]
        long_budget: bool,
        /// Directory for the benchmark run directories.
        #[arg(long, default_value = "runs")]
        root: PathBuf,
        /// Write the CSV report here as well as printing it.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Other(String),
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Usage(_) => Failure::Usage(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Usage(_) | BenchError::Run(RunError::Usage(_)) => {
                Failure::Usage(e.to_string())
            }
            other => Failure::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn run_command(
    registry: &Registry,
    snapshot: Option<PathBuf>,
    dry_run: bool,
    settings: &[String],
) -> Result<(), Failure> {
    let config = match snapshot {
        Some(path) => config_from_snapshot(registry, &path, settings)?,
        None => parse_cli(registry, settings)?,
    };
    if dry_run {
        print!("{}", config.describe());
        return Ok(());
    }
    match run(registry, &config)? {
        RunOutcome::Trained {
            run_dir,
            summary,
            final_checkpoint,
        } => {
            println!(
                "trained {} steps ({} updates); run directory {}; final checkpoint {}",
                summary.env_steps,
                summary.gradient_updates,
                run_dir.display(),
                final_checkpoint.display()
            );
        }
        RunOutcome::Tested {
            run_dir,
            returns,
            mean_return,
        } => {
            println!(
                "mean return {mean_return} over {} episodes; run directory {}",
                returns.len(),
                run_dir.display()
            );
        }
    }
    Ok(())
}

fn serve_command(
    registry: &Registry,
    env: &str,
    bind: &str,
    settings: &[String],
) -> Result<(), Failure> {
    let entry = registry.environment(env)?;
    let mut tree = ConfigTree::new();
    for (ns, key, value) in entry.defaults.iter().cloned() {
        tree.set_default(ns, key, value);
    }
    for token in settings {
        let (ns, key, value) = parse_token(token)?;
        if ns != "environment" {
            return Err(Failure::Usage(format!("serve only takes --environment.* settings, got {token}")));
        }
        tree.apply_override(&ns, &key, &value)?;
    }
    let maker = (entry.build)(&tree)?;
    let handle = serve_env(Arc::new(move || maker(0)), bind)?;
    log::info!("serving {env} on {}", handle.local_addr());
    println!("serving {env} on {}", handle.local_addr());
    handle.wait();
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bench_command(
    registry: &Registry,
    config: PathBuf,
    baseline: &str,
    seeds: u64,
    budget: Option<u64>,
    long_budget: bool,
    root: PathBuf,
    output: Option<PathBuf>,
) -> Result<(), Failure> {
    let configs = load_bench_file(&config)?;
    if !configs.iter().any(|c| c.label == baseline) {
        return Err(Failure::Usage(format!("baseline {baseline:?} is not in {}", config.display())));
    }
    let seeds: Vec<u64> = (0..seeds).collect();
    let mut results = Vec::with_capacity(configs.len());
    for c in &configs {
        let steps = match budget {
            Some(b) => b,
            None => default_budget(&algorithm_of(registry, c)?, long_budget),
        };
        log::info!("bench {}: {steps} steps x {} seeds", c.label, seeds.len());
        results.push(measure_throughput(registry, c, steps, &seeds, &root)?);
    }
    let report = relative_report(&results, baseline)?;
    print!("{}", report.to_text());
    let csv = report.to_csv();
    match output {
        Some(path) => fs::write(path, csv)?,
        None => print!("\n{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let registry = Registry::builtin();
    let result = match cli.command {
        Command::Run {
            snapshot,
            dry_run,
            settings,
        } => run_command(&registry, snapshot, dry_run, &settings),
        Command::Serve { env, bind, settings } => serve_command(&registry, &env, &bind, &settings),
        Command::Bench {
            config,
            baseline,
            seeds,
            budget,
            long_budget,
            root,
            output,
        } => bench_command(&registry, config, &baseline, seeds, budget, long_budget, root, output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("rlxkit: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("rlxkit: {msg}");
            ExitCode::FAILURE
        }
    }
}
