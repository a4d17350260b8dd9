//! Fixed-capacity experience replay with oldest-first eviction.

use rand::Rng;

use crate::SimRng;

/// One stored transition. `discount` is the bootstrap factor `γ^k`, or 0
/// at a terminal successor.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: Vec<f64>,
    pub discount: f64,
    pub next: Vec<f64>,
    /// Successor reward history (mediator samples only).
    pub next_history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Sample>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), head: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, sample: Sample) {
        if self.items.len() < self.capacity {
            self.items.push(sample);
        } else {
            self.items[self.head] = sample;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Stored samples, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.items[self.head..].iter().chain(&self.items[..self.head])
    }

    /// Uniform sample with replacement.
    pub fn sample_index(&self, rng: &mut SimRng) -> usize {
        rng.gen_range(0..self.items.len())
    }

    pub fn get(&self, index: usize) -> &Sample {
        &self.items[index]
    }
}
