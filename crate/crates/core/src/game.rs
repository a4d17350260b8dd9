//! The mediated Stackelberg game model shared by every other module.
//!
//! A [`Game`] is a leader-controller Markov game: at each stage one agent
//! leads, the remaining agents answer with a deterministic naive response,
//! and the next state depends only on the state and the leader's action.

use std::fmt::Debug;

use rand::Rng;

use crate::error::{Error, Result};
use crate::SimRng;

/// Zero-based agent index. Agent `0` is "agent 1" / "A" in reports.
pub type AgentId = usize;

/// Outcome of one stage of play.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    /// Leader action combined with the followers' naive responses.
    pub joint_action: Vec<usize>,
    /// Rewards the agents learn from (may contain shaping or transfers).
    pub rewards: Vec<f64>,
    /// Rewards that count towards reported returns and fairness.
    pub metric_rewards: Vec<f64>,
    /// End-of-game transfer applied on this step, if any.
    pub transfer: Option<Vec<f64>>,
    pub next: S,
}

pub trait Game {
    type State: Clone + Debug;

    fn agent_count(&self) -> usize;

    fn initial_state(&self, rng: &mut SimRng) -> Self::State;

    /// Number of actions available to `leader` at `state`.
    fn leader_action_count(&self, state: &Self::State, leader: AgentId) -> usize;

    /// Full joint action induced by the leader's choice. Deterministic.
    fn follower_response(
        &self,
        state: &Self::State,
        leader: AgentId,
        leader_action: usize,
    ) -> Result<Vec<usize>>;

    /// Plays one stage. Callers go through [`joint_step`], which validates
    /// the arguments first.
    fn step(
        &self,
        state: &Self::State,
        leader: AgentId,
        leader_action: usize,
        rng: &mut SimRng,
    ) -> Result<Transition<Self::State>>;

    fn is_terminal(&self, state: &Self::State) -> bool;

    /// Whether a leader must be (re)selected before acting at `state`.
    fn selection_due(&self, _state: &Self::State) -> bool {
        true
    }

    /// Hashed observation of `agent` for tabular learners.
    fn agent_key(&self, state: &Self::State, agent: AgentId) -> u64;

    /// Hashed environmental state for the mediator's tabular values.
    fn mediator_key(&self, state: &Self::State) -> u64;

    /// Real-valued encoding of `agent`'s observation for function approximation.
    fn agent_features(&self, state: &Self::State, agent: AgentId) -> Vec<f64>;

    /// Real-valued encoding of the environmental state for the mediator.
    fn mediator_features(&self, state: &Self::State) -> Vec<f64>;

    /// Instantaneous metric reward vectors of the leader's alternatives at
    /// `state`, used to judge whether a terminal action was ideal.
    fn leader_alternatives(&self, state: &Self::State, leader: AgentId) -> Vec<Vec<f64>>;

    /// Upper bound on the number of stages in an episode.
    fn max_steps(&self) -> usize;
}

/// Validated single stage of play.
pub fn joint_step<G: Game>(
    game: &G,
    state: &G::State,
    leader: AgentId,
    leader_action: usize,
    rng: &mut SimRng,
) -> Result<Transition<G::State>> {
    if game.is_terminal(state) {
        return Err(Error::Usage("cannot step from a terminal state".into()));
    }
    let n = game.agent_count();
    if leader >= n {
        return Err(Error::Usage(format!("leader {leader} out of range for {n} agents")));
    }
    let count = game.leader_action_count(state, leader);
    if leader_action >= count {
        return Err(Error::Usage(format!(
            "action {leader_action} out of range ({count} available to agent {leader})"
        )));
    }
    game.step(state, leader, leader_action, rng)
}

/// Context handed to a selection policy at a leader-selection stage.
#[derive(Clone, Copy, Debug)]
pub struct SelectionContext<'a> {
    pub mediator_key: u64,
    /// Cumulative metric rewards so far this episode.
    pub history: &'a [f64],
    /// Zero-based index of this selection stage within the episode.
    pub stage: usize,
    pub agent_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionKind {
    Learned,
    Fixed(AgentId),
    Alternating,
    VoteBased,
    ThresholdHistory,
}

/// A leader-selection rule.
pub trait SelectionPolicy {
    fn kind(&self) -> SelectionKind;
    fn select(&mut self, ctx: &SelectionContext<'_>, rng: &mut SimRng) -> AgentId;
}

/// A leader's action rule: `(agent, observation key, action count) -> action`.
pub trait ActionPolicy {
    fn leader_action(&mut self, agent: AgentId, key: u64, actions: usize, rng: &mut SimRng) -> usize;
}

impl<F> ActionPolicy for F
where
    F: FnMut(AgentId, u64, usize) -> usize,
{
    fn leader_action(&mut self, agent: AgentId, key: u64, actions: usize, _rng: &mut SimRng) -> usize {
        self(agent, key, actions)
    }
}

/// Rolls out one episode for at most `horizon` stages and returns the
/// cumulative metric reward vector, discounted by `discount` if given.
/// Transfers are included only when `game` itself applies them.
pub fn episode_return<G: Game>(
    game: &G,
    policies: &mut dyn ActionPolicy,
    selector: &mut dyn SelectionPolicy,
    horizon: usize,
    discount: Option<f64>,
    rng: &mut SimRng,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::Usage("episode horizon must be at least 1".into()));
    }
    let n = game.agent_count();
    let mut state = game.initial_state(rng);
    let mut total = vec![0.0; n];
    let mut history = vec![0.0; n];
    let mut leader = None;
    let mut stage = 0;
    let mut weight = 1.0;
    for _ in 0..horizon {
        if game.is_terminal(&state) {
            break;
        }
        if leader.is_none() || game.selection_due(&state) {
            let ctx = SelectionContext {
                mediator_key: game.mediator_key(&state),
                history: &history,
                stage,
                agent_count: n,
            };
            leader = Some(selector.select(&ctx, rng));
            stage += 1;
        }
        let l = leader.expect("leader chosen above");
        let count = game.leader_action_count(&state, l);
        let action = policies.leader_action(l, game.agent_key(&state, l), count, rng);
        let tr = joint_step(game, &state, l, action, rng)?;
        let step_rewards = match &tr.transfer {
            Some(theta) => tr.metric_rewards.iter().zip(theta).map(|(r, t)| r + t).collect(),
            None => tr.metric_rewards.clone(),
        };
        for i in 0..n {
            total[i] += weight * step_rewards[i];
            history[i] += tr.metric_rewards[i];
        }
        if let Some(g) = discount {
            weight *= g;
        }
        state = tr.next;
    }
    Ok(total)
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_lowest<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if i == 0 || v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

/// Index of the largest value with ties broken uniformly at random.
pub fn argmax_random<I: IntoIterator<Item = f64>>(values: I, rng: &mut SimRng) -> usize {
    let values: Vec<f64> = values.into_iter().collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .map(|(i, _)| i)
        .collect();
    if ties.len() <= 1 {
        return ties.first().copied().unwrap_or(0);
    }
    ties[rng.gen_range(0..ties.len())]
}

/// Tie-breaking rule for greedy choices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    Lowest,
    Random,
}

impl TieBreak {
    pub fn argmax(self, values: impl IntoIterator<Item = f64>, rng: &mut SimRng) -> usize {
        match self {
            TieBreak::Lowest => argmax_lowest(values),
            TieBreak::Random => argmax_random(values, rng),
        }
    }
}
