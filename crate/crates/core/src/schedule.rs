//! Exploration schedules.

use serde::{Deserialize, Serialize};

/// Exponentially annealed ε: `start · (end/start)^(episode/total)`,
/// held at `end` after `total` episodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub total: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { start: 0.5, end: 0.01, total: 200_000 }
    }
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, total: u64) -> Self {
        Self { start, end, total }
    }

    pub fn constant(value: f64) -> Self {
        Self { start: value, end: value, total: 1 }
    }

    /// Per-episode multiplicative decay factor.
    pub fn decay(&self) -> f64 {
        if self.start <= 0.0 || self.total == 0 {
            return 1.0;
        }
        (self.end / self.start).powf(1.0 / self.total as f64)
    }

    pub fn at(&self, episode: u64) -> f64 {
        if self.total == 0 || episode >= self.total || self.start <= 0.0 {
            return self.end;
        }
        self.start * (self.end / self.start).powf(episode as f64 / self.total as f64)
    }
}
