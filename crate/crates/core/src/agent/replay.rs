use std::collections::VecDeque;

use rand::Rng;

use crate::environment::ACTION_DIM;
use crate::rng::{self, RunRng, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub done: bool,
}

/// FIFO experience store with uniform sampling (with replacement).
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
    rng: RunRng,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            rng: rng::stream(seed, Stream::Replay),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `None` until at least `batch_size` transitions are stored.
    pub fn sample(&mut self, batch_size: usize) -> Option<Vec<&Transition>> {
        if batch_size == 0 || self.items.len() < batch_size {
            return None;
        }
        let len = self.items.len();
        let picks: Vec<usize> = (0..batch_size).map(|_| self.rng.random_range(0..len)).collect();
        Some(picks.into_iter().map(|i| &self.items[i]).collect())
    }
}
