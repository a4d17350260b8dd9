//! Episode loop and the sequential / simultaneous training schedules.

use crate::error::Result;
use crate::fairness::min_welfare;
use crate::game::{joint_step, AgentId, Game};
use crate::learner::{AgentObs, LeaderPolicy, SelectionObs, Selector, StepFeedback, Turn};
use crate::schedule::EpsilonSchedule;
use crate::SimRng;

/// How learners share training episodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Schedule {
    /// One learner at a time, in blocks of `block` episodes, cycling over
    /// the agents and then the selector (when it learns).
    Sequential { block: u64 },
    /// Every learner updates in every episode.
    Simultaneous,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Sequential { block: 100 }
    }
}

/// What happened in one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub episode: u64,
    /// Undiscounted metric returns.
    pub returns: Vec<f64>,
    pub min_welfare: f64,
    /// Leader chosen at each selection stage.
    pub leaders: Vec<AgentId>,
    /// Leader of each step.
    pub step_leaders: Vec<AgentId>,
    /// Leader action of each step.
    pub actions: Vec<usize>,
    /// Sum of end-of-game transfers, if any were applied.
    pub transfers: Option<Vec<f64>>,
}

pub struct Trainer<G: Game> {
    pub game: G,
    pub agents: Vec<Box<dyn LeaderPolicy>>,
    pub selector: Box<dyn Selector>,
    pub schedule: Schedule,
    pub epsilon: EpsilonSchedule,
}

impl<G: Game> Trainer<G> {
    pub fn new(game: G, agents: Vec<Box<dyn LeaderPolicy>>, selector: Box<dyn Selector>, schedule: Schedule, epsilon: EpsilonSchedule) -> Self {
        assert_eq!(agents.len(), game.agent_count(), "one policy per agent");
        Self { game, agents, selector, schedule, epsilon }
    }

    /// Number of learners in the sequential cycle.
    pub fn cycle_len(&self) -> u64 {
        self.agents.len() as u64 + u64::from(self.selector.has_turn())
    }

    pub fn turn_for(&self, episode: u64) -> Turn {
        match self.schedule {
            Schedule::Simultaneous => Turn::All,
            Schedule::Sequential { block } => {
                let slot = (episode / block.max(1)) % self.cycle_len();
                if (slot as usize) < self.agents.len() {
                    Turn::Agent(slot as usize)
                } else {
                    Turn::Selector
                }
            }
        }
    }

    /// Plays one episode with the given learning turn and exploration rate.
    pub fn run_episode(&mut self, episode: u64, turn: Turn, epsilon: f64, rng: &mut SimRng) -> Result<EpisodeRecord> {
        let n = self.game.agent_count();
        for (i, a) in self.agents.iter_mut().enumerate() {
            let learns = turn.agent_learns(i);
            a.prepare(learns, if learns { epsilon } else { 0.0 });
        }
        self.selector.prepare(turn, epsilon);

        let mut state = self.game.initial_state(rng);
        let mut returns = vec![0.0; n];
        let mut transfers: Option<Vec<f64>> = None;
        let mut leaders = Vec::new();
        let mut step_leaders = Vec::new();
        let mut actions = Vec::new();
        let mut leader: Option<AgentId> = None;
        let mut agent_keys = vec![0u64; n];

        for _ in 0..self.game.max_steps() {
            if self.game.is_terminal(&state) {
                break;
            }
            if leader.is_none() || self.game.selection_due(&state) {
                for (i, k) in agent_keys.iter_mut().enumerate() {
                    *k = self.game.agent_key(&state, i);
                }
                let features = self
                    .selector
                    .needs_features()
                    .then(|| self.game.mediator_features(&state));
                let obs = SelectionObs {
                    key: self.game.mediator_key(&state),
                    history: &returns,
                    stage: leaders.len(),
                    agent_keys: &agent_keys,
                    features: features.as_deref(),
                };
                let chosen = self.selector.select(&obs, rng);
                leaders.push(chosen);
                leader = Some(chosen);
            }
            let l = leader.expect("selected above");
            let policy = &mut self.agents[l];
            let features = policy.needs_features().then(|| self.game.agent_features(&state, l));
            let obs = AgentObs { key: self.game.agent_key(&state, l), features: features.as_deref() };
            let count = self.game.leader_action_count(&state, l);
            let action = policy.lead(&obs, count, rng);
            let tr = joint_step(&self.game, &state, l, action, rng)?;
            for (a, r) in self.agents.iter_mut().zip(&tr.rewards) {
                a.observe(*r, rng);
            }
            self.selector.observe(
                &StepFeedback { rewards: &tr.rewards, metric: &tr.metric_rewards },
                rng,
            );
            for (ret, r) in returns.iter_mut().zip(&tr.metric_rewards) {
                *ret += r;
            }
            if let Some(theta) = &tr.transfer {
                let total = transfers.get_or_insert_with(|| vec![0.0; n]);
                for (t, x) in total.iter_mut().zip(theta) {
                    *t += x;
                }
            }
            step_leaders.push(l);
            actions.push(action);
            state = tr.next;
        }
        for a in &mut self.agents {
            a.finish(rng);
        }
        self.selector.finish(rng);
        Ok(EpisodeRecord {
            episode,
            min_welfare: min_welfare(&returns),
            returns,
            leaders,
            step_leaders,
            actions,
            transfers,
        })
    }

    /// Trains for `episodes` episodes starting at global index `start`,
    /// handing every record to `sink`.
    pub fn train(&mut self, start: u64, episodes: u64, rng: &mut SimRng, mut sink: impl FnMut(&mut Self, EpisodeRecord) -> Result<()>) -> Result<()> {
        for e in start..start + episodes {
            let turn = self.turn_for(e);
            let eps = self.epsilon.at(e);
            let record = self.run_episode(e, turn, eps, rng)?;
            sink(self, record)?;
        }
        Ok(())
    }

    /// Greedy rollouts with every learner frozen.
    pub fn evaluate(&mut self, episodes: u64, rng: &mut SimRng) -> Result<Vec<EpisodeRecord>> {
        (0..episodes)
            .map(|e| self.run_episode(e, Turn::Frozen, 0.0, rng))
            .collect()
    }

    /// Serialised state of every learner, agents first.
    pub fn snapshot(&self) -> Vec<String> {
        let mut out: Vec<String> = self.agents.iter().map(|a| a.save()).collect();
        out.push(self.selector.save());
        out
    }
}
