//! The fair mediator: vector-valued Q-learning over leader choices.
//!
//! Values are stored in truncated form `Q̄(s, a)`, which excludes the
//! rewards already earned this episode. The full value of choosing `a` at
//! `(s, s_r)` is `s_r + Q̄(s, a)`, and leaders are chosen greedily by the
//! fairness of that vector. Between selections the mediator treats the
//! game as a semi-MDP: rewards are discounted per step and the bootstrap
//! is discounted by the elapsed step count.
//!
//! The module also provides the end-of-game transfer stage and the
//! threshold-on-history selector.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fairness::FairnessMeasure;
use crate::game::{argmax_lowest, AgentId, Game, Transition};
use crate::learner::{SelectionObs, Selector, StepFeedback, Turn};
use crate::table::ValueTable;
use crate::SimRng;

/// Cumulative within-episode reward vector `s_r`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryAccumulator {
    s_r: Vec<f64>,
}

impl HistoryAccumulator {
    pub fn new(agents: usize) -> Self {
        Self { s_r: vec![0.0; agents] }
    }

    pub fn accumulate_history(&mut self, rewards: &[f64]) -> &[f64] {
        for (h, r) in self.s_r.iter_mut().zip(rewards) {
            *h += r;
        }
        &self.s_r
    }

    pub fn reset(&mut self) {
        self.s_r.iter_mut().for_each(|h| *h = 0.0);
    }

    pub fn values(&self) -> &[f64] {
        &self.s_r
    }
}

/// Which stages of the mediator are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MediatorVariant {
    pub use_history: bool,
    pub use_endgame: bool,
}

impl MediatorVariant {
    pub const FULL: Self = Self { use_history: true, use_endgame: true };
    pub const PRE_FINAL: Self = Self { use_history: true, use_endgame: false };
    pub const NAIVE: Self = Self { use_history: false, use_endgame: false };

    pub fn label(self) -> &'static str {
        match (self.use_history, self.use_endgame) {
            (true, true) => "jamql",
            (true, false) => "jamql-prefinal",
            (false, false) => "jamql-naive",
            (false, true) => "jamql-endgame-only",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct MediatorPending {
    key: u64,
    leader: AgentId,
    acc: Vec<f64>,
    tau: usize,
}

#[derive(Clone, Debug)]
pub struct MediatorLearner {
    pub table: ValueTable,
    pub phi: FairnessMeasure,
    pub alpha: f64,
    pub gamma: f64,
    pub use_history: bool,
    label: String,
    agents: usize,
    epsilon: f64,
    learning: bool,
    pending: Option<MediatorPending>,
}

impl MediatorLearner {
    pub fn new(agents: usize, phi: FairnessMeasure, alpha: f64, gamma: f64, variant: MediatorVariant) -> Self {
        Self {
            table: ValueTable::new(agents, agents),
            phi,
            alpha,
            gamma,
            use_history: variant.use_history,
            label: variant.label().to_string(),
            agents,
            epsilon: 0.0,
            learning: true,
            pending: None,
        }
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    /// `s_r + Q̄(s, a)`.
    pub fn full_q(&self, key: u64, history: &[f64], leader: AgentId) -> Vec<f64> {
        self.table
            .get(key, leader)
            .iter()
            .zip(history)
            .map(|(q, h)| q + h)
            .collect()
    }

    /// Fairness of each candidate leader at `(key, history)`.
    pub fn candidate_scores(&self, key: u64, history: &[f64]) -> Vec<f64> {
        (0..self.agents)
            .map(|a| {
                if self.use_history {
                    self.phi.score(&self.full_q(key, history, a))
                } else {
                    self.phi.score(self.table.get(key, a))
                }
            })
            .collect()
    }

    /// Greedy leader, lowest index on ties.
    pub fn greedy(&self, key: u64, history: &[f64]) -> AgentId {
        argmax_lowest(self.candidate_scores(key, history))
    }

    /// ε-greedy leader choice.
    pub fn select_leader(&self, key: u64, history: &[f64], rng: &mut SimRng) -> AgentId {
        if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..self.agents)
        } else {
            self.greedy(key, history)
        }
    }

    /// One-step update of `Q̄(s, a)` from reward vector `r`; `next` is the
    /// successor `(key, s'_r)` or `None` at a terminal state.
    pub fn mediator_update(&mut self, key: u64, leader: AgentId, rewards: &[f64], next: Option<(u64, &[f64])>) {
        self.update_semi(key, leader, rewards, 1, next);
    }

    /// Semi-MDP update: `acc` is the discounted reward sum over `tau` steps.
    pub fn update_semi(&mut self, key: u64, leader: AgentId, acc: &[f64], tau: usize, next: Option<(u64, &[f64])>) {
        let discount = self.gamma.powi(tau as i32);
        let bootstrap: Vec<f64> = match next {
            Some((next_key, next_history)) => {
                let a = self.greedy(next_key, next_history);
                self.table.get(next_key, a).iter().map(|q| discount * q).collect()
            }
            None => vec![0.0; self.agents],
        };
        let alpha = self.alpha;
        let q = self.table.get_mut(key, leader);
        for i in 0..q.len() {
            q[i] = (1.0 - alpha) * q[i] + alpha * (acc[i] + bootstrap[i]);
        }
    }

    fn flush(&mut self, next: Option<(u64, &[f64])>) {
        if let Some(p) = self.pending.take() {
            self.update_semi(p.key, p.leader, &p.acc, p.tau, next);
        }
    }
}

impl Selector for MediatorLearner {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn has_turn(&self) -> bool {
        true
    }

    fn prepare(&mut self, turn: Turn, epsilon: f64) {
        self.learning = turn.selector_learns();
        self.epsilon = if self.learning { epsilon } else { 0.0 };
        self.pending = None;
    }

    fn select(&mut self, obs: &SelectionObs<'_>, rng: &mut SimRng) -> AgentId {
        if self.learning {
            self.flush(Some((obs.key, obs.history)));
        }
        let leader = self.select_leader(obs.key, obs.history, rng);
        if self.learning {
            self.pending = Some(MediatorPending {
                key: obs.key,
                leader,
                acc: vec![0.0; self.agents],
                tau: 0,
            });
        }
        leader
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>, _rng: &mut SimRng) {
        if let Some(p) = &mut self.pending {
            let w = self.gamma.powi(p.tau as i32);
            for (a, r) in p.acc.iter_mut().zip(feedback.metric) {
                *a += w * r;
            }
            p.tau += 1;
        }
    }

    fn finish(&mut self, _rng: &mut SimRng) {
        self.flush(None);
    }

    fn save(&self) -> String {
        self.table.to_text()
    }

    fn load(&mut self, text: &str) -> Result<()> {
        let table = ValueTable::from_text(text)?;
        if table.actions() != self.agents || table.width() != self.agents {
            return Err(Error::Incompatible(format!(
                "mediator table is {} × {}, expected {n} × {n}",
                table.actions(),
                table.width(),
                n = self.agents
            )));
        }
        self.table = table;
        Ok(())
    }
}

/// How "ideal" terminal leader performance is judged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IdealRule {
    /// The action maximises the fairness of the episode total `s_r + r`.
    #[default]
    History,
    /// The action maximises the fairness of the instantaneous reward `r`.
    Instantaneous,
}

impl IdealRule {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "history" => Ok(IdealRule::History),
            "instantaneous" => Ok(IdealRule::Instantaneous),
            other => Err(Error::Config(format!("unknown end-game ideal rule `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IdealRule::History => "history",
            IdealRule::Instantaneous => "instantaneous",
        }
    }
}

/// Zero-sum terminal transfer: null for ideal leader performance,
/// otherwise equalising within `±R_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferRule {
    pub phi: FairnessMeasure,
    pub ideal: IdealRule,
}

impl TransferRule {
    pub fn new(phi: FairnessMeasure, ideal: IdealRule) -> Self {
        Self { phi, ideal }
    }

    /// θ for the terminal step. `history` is `s_r` before the step,
    /// `rewards` the step's reward vector and `alternatives` the reward
    /// vectors the leader could have produced instead.
    pub fn endgame_transfer(
        &self,
        terminal: bool,
        history: &[f64],
        rewards: &[f64],
        alternatives: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        if !terminal {
            return Err(Error::Usage("end-game transfers apply to terminal steps only".into()));
        }
        let judge = |r: &[f64]| match self.ideal {
            IdealRule::History => {
                let total: Vec<f64> = history.iter().zip(r).map(|(h, x)| h + x).collect();
                self.phi.score(&total)
            }
            IdealRule::Instantaneous => self.phi.score(r),
        };
        let actual = judge(rewards);
        let best = alternatives.iter().map(|alt| judge(alt)).fold(actual, f64::max);
        if actual >= best - 1e-9 {
            return Ok(vec![0.0; rewards.len()]);
        }
        Ok(equalising_transfer(rewards))
    }
}

/// `θ_i = clamp(mean(r) - r_i, ±R_max)` with `R_max = max_i r_i - min_i r_i`,
/// corrected on the last unclamped coordinate so that `Σθ = 0`.
pub fn equalising_transfer(rewards: &[f64]) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let hi = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = hi - lo;
    let mut theta: Vec<f64> = rewards.iter().map(|r| (mean - r).clamp(-r_max, r_max)).collect();
    let excess: f64 = theta.iter().sum();
    if let Some(i) = theta.iter().rposition(|t| t.abs() < r_max) {
        theta[i] = (theta[i] - excess).clamp(-r_max, r_max);
    }
    theta
}

/// Environment state paired with the cumulative reward so far.
#[derive(Clone, Debug, PartialEq)]
pub struct StagedState<S> {
    pub inner: S,
    pub history: Vec<f64>,
}

/// What an agent's tabular key is built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AgentView {
    /// The environment's own observation only.
    State,
    /// The observation plus the agent's standing in the episode's
    /// cumulative rewards relative to the other agents.
    #[default]
    Standing,
}

impl AgentView {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "state" => Ok(AgentView::State),
            "standing" => Ok(AgentView::Standing),
            other => Err(Error::Config(format!("unknown agent view `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentView::State => "state",
            AgentView::Standing => "standing",
        }
    }
}

/// Code in `0..9` comparing `history[agent]` with the smallest and the
/// largest of the other agents' totals.
pub fn standing_code(history: &[f64], agent: AgentId) -> u64 {
    let mine = history[agent];
    let others = history.iter().enumerate().filter(|(j, _)| *j != agent).map(|(_, v)| *v);
    let (lo, hi) = others.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let cmp = |other: f64| -> u64 {
        if mine < other - 1e-9 {
            0
        } else if mine > other + 1e-9 {
            2
        } else {
            1
        }
    };
    3 * cmp(lo) + cmp(hi)
}

/// Wraps a game with the episode's reward history, an optional
/// end-of-game transfer stage and the agents' view of the history.
/// Agents learn from `r + θ`; metric rewards stay untouched and θ is
/// reported in [`Transition::transfer`].
#[derive(Clone, Debug)]
pub struct EndGameStage<G> {
    pub inner: G,
    pub rule: Option<TransferRule>,
    pub view: AgentView,
}

impl<G: Game> EndGameStage<G> {
    pub fn new(inner: G, rule: Option<TransferRule>) -> Self {
        Self { inner, rule, view: AgentView::State }
    }

    pub fn passthrough(inner: G) -> Self {
        Self::new(inner, None)
    }

    pub fn with_view(mut self, view: AgentView) -> Self {
        self.view = view;
        self
    }
}

impl<G: Game> Game for EndGameStage<G> {
    type State = StagedState<G::State>;

    fn agent_count(&self) -> usize {
        self.inner.agent_count()
    }

    fn initial_state(&self, rng: &mut SimRng) -> Self::State {
        StagedState {
            inner: self.inner.initial_state(rng),
            history: vec![0.0; self.inner.agent_count()],
        }
    }

    fn leader_action_count(&self, state: &Self::State, leader: AgentId) -> usize {
        self.inner.leader_action_count(&state.inner, leader)
    }

    fn follower_response(&self, state: &Self::State, leader: AgentId, leader_action: usize) -> Result<Vec<usize>> {
        self.inner.follower_response(&state.inner, leader, leader_action)
    }

    fn step(&self, state: &Self::State, leader: AgentId, leader_action: usize, rng: &mut SimRng) -> Result<Transition<Self::State>> {
        let tr = self.inner.step(&state.inner, leader, leader_action, rng)?;
        let history: Vec<f64> = state
            .history
            .iter()
            .zip(&tr.metric_rewards)
            .map(|(h, r)| h + r)
            .collect();
        let mut rewards = tr.rewards;
        let mut transfer = tr.transfer;
        if let Some(rule) = &self.rule {
            if self.inner.is_terminal(&tr.next) {
                let alternatives = self.inner.leader_alternatives(&state.inner, leader);
                let theta = rule.endgame_transfer(true, &state.history, &tr.metric_rewards, &alternatives)?;
                for (r, t) in rewards.iter_mut().zip(&theta) {
                    *r += t;
                }
                transfer = Some(theta);
            }
        }
        Ok(Transition {
            joint_action: tr.joint_action,
            rewards,
            metric_rewards: tr.metric_rewards,
            transfer,
            next: StagedState { inner: tr.next, history },
        })
    }

    fn is_terminal(&self, state: &Self::State) -> bool {
        self.inner.is_terminal(&state.inner)
    }

    fn selection_due(&self, state: &Self::State) -> bool {
        self.inner.selection_due(&state.inner)
    }

    fn agent_key(&self, state: &Self::State, agent: AgentId) -> u64 {
        let key = self.inner.agent_key(&state.inner, agent);
        match self.view {
            AgentView::State => key,
            AgentView::Standing => key.wrapping_mul(16).wrapping_add(standing_code(&state.history, agent)),
        }
    }

    fn mediator_key(&self, state: &Self::State) -> u64 {
        self.inner.mediator_key(&state.inner)
    }

    fn agent_features(&self, state: &Self::State, agent: AgentId) -> Vec<f64> {
        let mut v = self.inner.agent_features(&state.inner, agent);
        if self.view == AgentView::Standing {
            let code = standing_code(&state.history, agent) as usize;
            v.extend((0..9).map(|c| if c == code { 1.0 } else { 0.0 }));
        }
        v
    }

    fn mediator_features(&self, state: &Self::State) -> Vec<f64> {
        self.inner.mediator_features(&state.inner)
    }

    fn leader_alternatives(&self, state: &Self::State, leader: AgentId) -> Vec<Vec<f64>> {
        self.inner.leader_alternatives(&state.inner, leader)
    }

    fn max_steps(&self) -> usize {
        self.inner.max_steps()
    }
}

/// Two-player rule: A leads whenever its history is at most B's. The
/// first leader of each episode is drawn uniformly.
#[derive(Clone, Debug)]
pub struct ThresholdSelector;

impl ThresholdSelector {
    pub fn new(agents: usize) -> Result<Self> {
        if agents != 2 {
            return Err(Error::Config("the threshold mediator is defined for two agents".into()));
        }
        Ok(Self)
    }

    pub fn threshold_history_mediator(history: &[f64]) -> AgentId {
        if history[0] <= history[1] {
            0
        } else {
            1
        }
    }
}

impl Selector for ThresholdSelector {
    fn name(&self) -> String {
        "threshold".into()
    }

    fn select(&mut self, obs: &SelectionObs<'_>, rng: &mut SimRng) -> AgentId {
        if obs.stage == 0 {
            rng.gen_range(0..2)
        } else {
            Self::threshold_history_mediator(obs.history)
        }
    }
}
