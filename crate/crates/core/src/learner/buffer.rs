use std::collections::VecDeque;

use rand::seq::index::sample;

use crate::diffcore::Tensor2;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// One complete episode as stored for replay. Step `t` holds the
/// observations and state the agents acted on, their joint action and the
/// reward that followed. Every stored episode ends in a terminal step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeBatch {
    pub obs: Vec<Tensor2>,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<usize>>,
    pub rewards: Vec<f64>,
    pub won: bool,
}

impl EpisodeBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.rewards.len();
        if t == 0 || self.obs.len() != t || self.states.len() != t || self.actions.len() != t {
            return Err(Error::Consistency(format!(
                "episode arrays disagree: {} obs, {} states, {} actions, {} rewards",
                self.obs.len(),
                self.states.len(),
                self.actions.len(),
                t
            )));
        }
        Ok(())
    }
}

/// FIFO store of the most recent episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<EpisodeBatch>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            episodes: VecDeque::with_capacity(capacity.min(1024)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn push(&mut self, episode: EpisodeBatch) {
        if self.capacity == 0 {
            return;
        }
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn iter(&self) -> impl Iterator<Item = &EpisodeBatch> {
        self.episodes.iter()
    }

    /// `batch` distinct episodes drawn uniformly.
    pub fn sample(&self, batch: usize, rng: &mut Rng) -> Result<Vec<&EpisodeBatch>> {
        if batch > self.episodes.len() {
            return Err(Error::Training(format!(
                "cannot sample {batch} episodes from a buffer of {}",
                self.episodes.len()
            )));
        }
        Ok(sample(rng, self.episodes.len(), batch)
            .into_iter()
            .map(|i| &self.episodes[i])
            .collect())
    }
}
