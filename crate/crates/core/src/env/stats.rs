use std::collections::VecDeque;

use super::StepResult;

/// Number of most recent episodes the running average covers.
pub const RUNNING_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletedEpisode {
    pub env_index: usize,
    pub episode_return: f64,
    pub length: u64,
}

/// Per-environment return accumulators plus a FIFO of the last 100
/// completed episodes.
#[derive(Debug, Clone)]
pub struct EpisodeStats {
    returns: VecDeque<f64>,
    lengths: VecDeque<u64>,
    accumulated_return: Vec<f64>,
    accumulated_length: Vec<u64>,
    total_steps: u64,
    completed: u64,
}

impl EpisodeStats {
    pub fn new(nr_envs: usize) -> Self {
        Self {
            returns: VecDeque::with_capacity(RUNNING_WINDOW + 1),
            lengths: VecDeque::with_capacity(RUNNING_WINDOW + 1),
            accumulated_return: vec![0.0; nr_envs],
            accumulated_length: vec![0; nr_envs],
            total_steps: 0,
            completed: 0,
        }
    }

    /// Records one sub-environment step; returns the finished episode if the
    /// step ended one.
    pub fn update(&mut self, env_index: usize, step: &StepResult) -> Option<CompletedEpisode> {
        self.total_steps += 1;
        self.accumulated_return[env_index] += step.reward;
        self.accumulated_length[env_index] += 1;
        if !step.done() {
            return None;
        }
        let episode = CompletedEpisode {
            env_index,
            episode_return: std::mem::take(&mut self.accumulated_return[env_index]),
            length: std::mem::take(&mut self.accumulated_length[env_index]),
        };
        self.push(episode.episode_return, episode.length);
        Some(episode)
    }

    fn push(&mut self, ret: f64, len: u64) {
        self.returns.push_back(ret);
        self.lengths.push_back(len);
        if self.returns.len() > RUNNING_WINDOW {
            self.returns.pop_front();
            self.lengths.pop_front();
        }
        self.completed += 1;
    }

    /// Mean of the FIFO, summed oldest to newest. `None` before the first
    /// completed episode.
    pub fn running_average(&self) -> Option<f64> {
        running_mean(self.returns.iter().copied())
    }

    pub fn running_average_length(&self) -> Option<f64> {
        running_mean(self.lengths.iter().map(|&l| l as f64))
    }

    pub fn recent_returns(&self) -> impl Iterator<Item = f64> + '_ {
        self.returns.iter().copied()
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn completed_episodes(&self) -> u64 {
        self.completed
    }
}

/// Mean in iteration order; the summation order is part of the logging
/// contract so offline recomputation reproduces it exactly.
pub fn running_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}
