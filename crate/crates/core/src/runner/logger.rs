use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use crate::agent::{TrainError, TrainHooks};
use crate::env::CompletedEpisode;
use crate::nn::{save_checkpoint, ParamSet};

use super::run_dir::RunDir;

pub const METRICS_HEADER: &str = "step,wall_time_s,metric_name,value";
pub const EPISODES_HEADER: &str = "step,env_index,return,length";

/// Writes metrics.csv, episodes.csv and periodic checkpoints, and mirrors
/// metric rows to the console through `log`.
///
/// Without `record_wall_time` the wall-time column is 0 and throughput rows
/// only reach the console, so the files are a pure function of the config.
pub struct RunLogger {
    metrics: BufWriter<File>,
    episodes: BufWriter<File>,
    checkpoint_dir: PathBuf,
    checkpoint_interval: u64,
    next_checkpoint: u64,
    record_wall_time: bool,
    start: Instant,
    last_report: (Instant, u64),
    saved: Vec<PathBuf>,
}

fn hook_err(e: impl std::fmt::Display) -> TrainError {
    TrainError::Hook(format!("run logging failed: {e}"))
}

impl RunLogger {
    pub fn create(
        run_dir: &RunDir,
        checkpoint_interval: u64,
        record_wall_time: bool,
    ) -> io::Result<Self> {
        let mut metrics = BufWriter::new(File::create(run_dir.metrics())?);
        writeln!(metrics, "{METRICS_HEADER}")?;
        let mut episodes = BufWriter::new(File::create(run_dir.episodes())?);
        writeln!(episodes, "{EPISODES_HEADER}")?;
        metrics.flush()?;
        episodes.flush()?;
        let now = Instant::now();
        Ok(Self {
            metrics,
            episodes,
            checkpoint_dir: run_dir.checkpoints(),
            checkpoint_interval,
            next_checkpoint: checkpoint_interval,
            record_wall_time,
            start: now,
            last_report: (now, 0),
            saved: Vec::new(),
        })
    }

    /// Restarts the wall clock, e.g. after setup work that should not count.
    pub fn restart_clock(&mut self) {
        let now = Instant::now();
        self.start = now;
        self.last_report = (now, 0);
    }

    /// Checkpoints written so far, in order.
    pub fn saved_checkpoints(&self) -> &[PathBuf] {
        &self.saved
    }

    fn wall_time(&self) -> f64 {
        if self.record_wall_time {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    pub fn write_metric(&mut self, step: u64, name: &str, value: f64) -> io::Result<()> {
        let wall = self.wall_time();
        writeln!(self.metrics, "{step},{wall},{name},{value}")
    }

    pub fn write_episode(&mut self, step: u64, episode: &CompletedEpisode) -> io::Result<()> {
        writeln!(
            self.episodes,
            "{step},{},{},{}",
            episode.env_index, episode.episode_return, episode.length
        )
    }

    pub fn save(&mut self, name: &str, params: &ParamSet<f32>) -> Result<PathBuf, TrainError> {
        let path = self.checkpoint_dir.join(name);
        save_checkpoint(params, &path)?;
        log::info!("saved checkpoint {}", path.display());
        self.saved.push(path.clone());
        Ok(path)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.metrics.flush()?;
        self.episodes.flush()
    }
}

impl TrainHooks for RunLogger {
    fn episode(&mut self, step: u64, episode: &CompletedEpisode) -> Result<(), TrainError> {
        self.write_episode(step, episode).map_err(hook_err)
    }

    fn metrics(&mut self, step: u64, metrics: &[(&str, f64)]) -> Result<(), TrainError> {
        let now = Instant::now();
        let (then, then_step) = self.last_report;
        let secs = now.duration_since(then).as_secs_f64();
        let steps_per_second = if secs > 0.0 {
            step.saturating_sub(then_step) as f64 / secs
        } else {
            0.0
        };
        self.last_report = (now, step);
        let mut line = format!("step {step}");
        for (name, value) in metrics {
            self.write_metric(step, name, *value).map_err(hook_err)?;
            line.push_str(&format!(" {name}={value:.6}"));
        }
        if self.record_wall_time {
            self.write_metric(step, "steps_per_second", steps_per_second)
                .map_err(hook_err)?;
        }
        log::info!("{line} steps_per_second={steps_per_second:.1}");
        self.flush().map_err(hook_err)
    }

    fn wants_checkpoint(&mut self, step: u64) -> bool {
        self.checkpoint_interval > 0 && step >= self.next_checkpoint
    }

    fn checkpoint(&mut self, step: u64, params: &ParamSet<f32>) -> Result<(), TrainError> {
        self.save(&format!("step_{step}.ckpt"), params)?;
        self.next_checkpoint = (step / self.checkpoint_interval + 1) * self.checkpoint_interval;
        Ok(())
    }
}
