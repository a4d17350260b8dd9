//! Interfaces between the training loop and the learners it drives.
//!
//! Tabular and network learners implement the same traits so the runner
//! can mix them freely.

use crate::error::Result;
use crate::game::AgentId;
use crate::SimRng;

/// Which learner updates during an episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Turn {
    /// Only this agent learns (sequential schedule).
    Agent(AgentId),
    /// Only the leader selector learns (sequential schedule).
    Selector,
    /// Everybody learns (simultaneous schedule).
    All,
    /// Nobody learns; greedy evaluation.
    Frozen,
}

impl Turn {
    pub fn agent_learns(self, agent: AgentId) -> bool {
        matches!(self, Turn::All) || self == Turn::Agent(agent)
    }

    pub fn selector_learns(self) -> bool {
        matches!(self, Turn::All | Turn::Selector)
    }
}

/// What a leader sees when it has to act.
#[derive(Clone, Copy, Debug)]
pub struct AgentObs<'a> {
    pub key: u64,
    /// Present when the learner asked for features.
    pub features: Option<&'a [f64]>,
}

/// What a selector sees at a leader-selection stage.
#[derive(Clone, Copy, Debug)]
pub struct SelectionObs<'a> {
    pub key: u64,
    /// Cumulative metric rewards earlier in the episode.
    pub history: &'a [f64],
    /// Zero-based selection stage within the episode.
    pub stage: usize,
    /// Every agent's own observation key, for per-agent voters.
    pub agent_keys: &'a [u64],
    pub features: Option<&'a [f64]>,
}

/// Per-step feedback handed to learners after every environment step.
#[derive(Clone, Copy, Debug)]
pub struct StepFeedback<'a> {
    /// Rewards the agents learn from.
    pub rewards: &'a [f64],
    /// Rewards that count towards fairness.
    pub metric: &'a [f64],
}

/// A self-interested agent's leader policy.
pub trait LeaderPolicy: Send {
    /// Sets the exploration rate and learning flag for the next episode.
    fn prepare(&mut self, learning: bool, epsilon: f64);

    fn needs_features(&self) -> bool {
        false
    }

    /// Chooses an action as leader; settles any earlier leadership first.
    fn lead(&mut self, obs: &AgentObs<'_>, actions: usize, rng: &mut SimRng) -> usize;

    /// This agent's reward for the step just played.
    fn observe(&mut self, reward: f64, rng: &mut SimRng);

    /// Episode end.
    fn finish(&mut self, rng: &mut SimRng);

    fn save(&self) -> String;

    fn load(&mut self, text: &str) -> Result<()>;
}

/// A leader-selection rule that may learn.
pub trait Selector: Send {
    fn name(&self) -> String;

    /// Whether the selector takes its own block in the sequential cycle.
    fn has_turn(&self) -> bool {
        false
    }

    fn needs_features(&self) -> bool {
        false
    }

    fn prepare(&mut self, _turn: Turn, _epsilon: f64) {}

    fn select(&mut self, obs: &SelectionObs<'_>, rng: &mut SimRng) -> AgentId;

    fn observe(&mut self, _feedback: &StepFeedback<'_>, _rng: &mut SimRng) {}

    fn finish(&mut self, _rng: &mut SimRng) {}

    fn save(&self) -> String {
        String::new()
    }

    fn load(&mut self, _text: &str) -> Result<()> {
        Ok(())
    }
}
