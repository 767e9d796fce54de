use rand::Rng;

use crate::agent::TrainError;
use crate::nn::{Matrix, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    /// True only for environment-defined ends; time limits store false.
    pub terminated: bool,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    observations: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_observations: Vec<f64>,
    terminated: Vec<bool>,
    cursor: usize,
    size: usize,
}

/// Columns of a sampled batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SacBatch<T> {
    pub observations: Matrix<T>,
    pub actions: Matrix<T>,
    pub rewards: Vec<T>,
    pub next_observations: Matrix<T>,
    pub terminated: Vec<bool>,
}

impl<T: Real> SacBatch<T> {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn cast<U: Real>(&self) -> SacBatch<U> {
        SacBatch {
            observations: self.observations.cast(),
            actions: self.actions.cast(),
            rewards: self.rewards.iter().map(|r| U::of(r.as_f64())).collect(),
            next_observations: self.next_observations.cast(),
            terminated: self.terminated.clone(),
        }
    }
}

impl ReplayBuffer {
    /// Storage grows on demand up to `capacity`.
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            act_dim,
            observations: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_observations: Vec::new(),
            terminated: Vec::new(),
            cursor: 0,
            size: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn insert(&mut self, t: &Transition) -> Result<(), TrainError> {
        if t.observation.len() != self.obs_dim
            || t.next_observation.len() != self.obs_dim
            || t.action.len() != self.act_dim
        {
            return Err(TrainError::Config(format!(
                "transition shapes obs {}/{} action {} do not match buffer obs {} action {}",
                t.observation.len(),
                t.next_observation.len(),
                t.action.len(),
                self.obs_dim,
                self.act_dim
            )));
        }
        let slot = self.cursor;
        if slot == self.rewards.len() {
            self.observations.extend_from_slice(&t.observation);
            self.actions.extend_from_slice(&t.action);
            self.rewards.push(t.reward);
            self.next_observations.extend_from_slice(&t.next_observation);
            self.terminated.push(t.terminated);
        } else {
            let (o, a) = (self.obs_dim, self.act_dim);
            self.observations[slot * o..(slot + 1) * o].copy_from_slice(&t.observation);
            self.actions[slot * a..(slot + 1) * a].copy_from_slice(&t.action);
            self.rewards[slot] = t.reward;
            self.next_observations[slot * o..(slot + 1) * o].copy_from_slice(&t.next_observation);
            self.terminated[slot] = t.terminated;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
        Ok(())
    }

    fn slot(&self, logical: usize) -> usize {
        if self.size < self.capacity {
            logical
        } else {
            (self.cursor + logical) % self.capacity
        }
    }

    /// Transition at `logical` position, 0 being the oldest stored.
    pub fn get(&self, logical: usize) -> Option<Transition> {
        if logical >= self.size {
            return None;
        }
        let s = self.slot(logical);
        let (o, a) = (self.obs_dim, self.act_dim);
        Some(Transition {
            observation: self.observations[s * o..(s + 1) * o].to_vec(),
            action: self.actions[s * a..(s + 1) * a].to_vec(),
            reward: self.rewards[s],
            next_observation: self.next_observations[s * o..(s + 1) * o].to_vec(),
            terminated: self.terminated[s],
        })
    }

    /// Uniform logical indices in `[0, len)`, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>, TrainError> {
        if self.size == 0 {
            return Err(TrainError::Config("cannot sample from an empty replay buffer".into()));
        }
        Ok((0..batch_size).map(|_| rng.random_range(0..self.size)).collect())
    }

    pub fn gather<T: Real>(&self, logical: &[usize]) -> SacBatch<T> {
        let (o, a) = (self.obs_dim, self.act_dim);
        let n = logical.len();
        let mut obs = Vec::with_capacity(n * o);
        let mut act = Vec::with_capacity(n * a);
        let mut rew = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n * o);
        let mut term = Vec::with_capacity(n);
        for &l in logical {
            let s = self.slot(l);
            obs.extend(self.observations[s * o..(s + 1) * o].iter().map(|&x| T::of(x)));
            act.extend(self.actions[s * a..(s + 1) * a].iter().map(|&x| T::of(x)));
            rew.push(T::of(self.rewards[s]));
            next.extend(self.next_observations[s * o..(s + 1) * o].iter().map(|&x| T::of(x)));
            term.push(self.terminated[s]);
        }
        SacBatch {
            observations: Matrix::from_vec(n, o, obs),
            actions: Matrix::from_vec(n, a, act),
            rewards: rew,
            next_observations: Matrix::from_vec(n, o, next),
            terminated: term,
        }
    }

    pub fn sample<T: Real, R: Rng + ?Sized>(
        &self,
        batch_size: usize,
        rng: &mut R,
    ) -> Result<SacBatch<T>, TrainError> {
        let idx = self.sample_indices(batch_size, rng)?;
        Ok(self.gather(&idx))
    }
}
