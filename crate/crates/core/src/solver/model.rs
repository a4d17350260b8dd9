//! Explicit finite models of leader-controller games.
//!
//! Text format, one transition per `t` line:
//!
//! ```text
//! # fairlead model v1
//! agents 2
//! actions 2
//! states 3
//! initial 0 1
//! terminal 2
//! history 1 2 1
//! t 0 0 1 1 1 3 -2
//! t 0 0 1 1 1 3 -2 | 0.5 0.5
//! ```
//!
//! `t s leader action next prob r_1..r_N` gives the metric rewards of the
//! step; an optional `| u_1..u_N` tail gives the rewards the agents learn
//! from when they differ (end-of-game transfers). `history` attaches the
//! cumulative reward vector reached with a state; it defaults to zeros.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::env::MatrixGameEnv;
use crate::error::{Error, Result};
use crate::game::{AgentId, Game};
use crate::mediator::{EndGameStage, StagedState, TransferRule};
use crate::SimRng;

pub const MODEL_HEADER: &str = "# fairlead model v1";

/// Largest state count accepted from text.
pub const MAX_STATES: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub next: usize,
    pub prob: f64,
    pub reward: Vec<f64>,
    pub agent_reward: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitModel {
    pub agents: usize,
    pub actions: usize,
    pub states: usize,
    /// Indexed by `(state · agents + leader) · actions + action`.
    pub rows: Vec<Vec<Outcome>>,
    pub initial: Vec<(usize, f64)>,
    pub terminal: Vec<bool>,
    pub history: Vec<Vec<f64>>,
}

impl ExplicitModel {
    /// A model with no transitions yet; every state starts non-terminal.
    pub fn empty(agents: usize, actions: usize, states: usize) -> Self {
        Self {
            agents,
            actions,
            states,
            rows: vec![Vec::new(); states * agents * actions],
            initial: Vec::new(),
            terminal: vec![false; states],
            history: vec![vec![0.0; agents]; states],
        }
    }

    fn index(&self, s: usize, leader: AgentId, action: usize) -> usize {
        (s * self.agents + leader) * self.actions + action
    }

    pub fn row(&self, s: usize, leader: AgentId, action: usize) -> &[Outcome] {
        &self.rows[self.index(s, leader, action)]
    }

    /// Adds a transition whose agent rewards equal the metric rewards.
    pub fn add(&mut self, s: usize, leader: AgentId, action: usize, next: usize, prob: f64, reward: Vec<f64>) {
        let agent_reward = reward.clone();
        self.add_with(s, leader, action, Outcome { next, prob, reward, agent_reward });
    }

    pub fn add_with(&mut self, s: usize, leader: AgentId, action: usize, outcome: Outcome) {
        let i = self.index(s, leader, action);
        self.rows[i].push(outcome);
    }

    /// Expected metric reward vector of `(s, leader, action)`.
    pub fn expected_reward(&self, s: usize, leader: AgentId, action: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.agents];
        for o in self.row(s, leader, action) {
            for (x, r) in out.iter_mut().zip(&o.reward) {
                *x += o.prob * r;
            }
        }
        out
    }

    /// Expected reward of `agent` under the agents' reward signal.
    pub fn expected_agent_reward(&self, s: usize, leader: AgentId, action: usize, agent: AgentId) -> f64 {
        self.row(s, leader, action).iter().map(|o| o.prob * o.agent_reward[agent]).sum()
    }

    /// Checks shapes, probabilities and the initial distribution.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.agents == 0 || self.actions == 0 || self.states == 0 {
            return bad("models need agents, actions and states".into());
        }
        if self.rows.len() != self.states * self.agents * self.actions
            || self.terminal.len() != self.states
            || self.history.len() != self.states
        {
            return bad("table sizes do not match the declared dimensions".into());
        }
        if self.history.iter().any(|h| h.len() != self.agents) {
            return bad("history vectors must have one entry per agent".into());
        }
        for s in 0..self.states {
            for l in 0..self.agents {
                for a in 0..self.actions {
                    let row = self.row(s, l, a);
                    if self.terminal[s] {
                        if !row.is_empty() {
                            return bad(format!("terminal state {s} has transitions"));
                        }
                        continue;
                    }
                    let total: f64 = row.iter().map(|o| o.prob).sum();
                    if (total - 1.0).abs() > 1e-12 {
                        return bad(format!("row ({s}, {l}, {a}) sums to {total}"));
                    }
                    for o in row {
                        if o.next >= self.states || !(o.prob >= 0.0) {
                            return bad(format!("row ({s}, {l}, {a}) has an invalid outcome"));
                        }
                        if o.reward.len() != self.agents || o.agent_reward.len() != self.agents {
                            return bad(format!("row ({s}, {l}, {a}) has a reward of the wrong width"));
                        }
                    }
                }
            }
        }
        let total: f64 = self.initial.iter().map(|(_, p)| p).sum();
        if self.initial.is_empty() || (total - 1.0).abs() > 1e-12 || self.initial.iter().any(|(s, p)| *s >= self.states || *p < 0.0) {
            return bad("the initial distribution must be a distribution over states".into());
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MODEL_HEADER}").unwrap();
        writeln!(out, "agents {}\nactions {}\nstates {}", self.agents, self.actions, self.states).unwrap();
        for (s, p) in &self.initial {
            writeln!(out, "initial {s} {p:?}").unwrap();
        }
        for (s, t) in self.terminal.iter().enumerate() {
            if *t {
                writeln!(out, "terminal {s}").unwrap();
            }
        }
        for (s, h) in self.history.iter().enumerate() {
            if h.iter().any(|v| *v != 0.0) {
                writeln!(out, "history {s} {}", join(h)).unwrap();
            }
        }
        for s in 0..self.states {
            for l in 0..self.agents {
                for a in 0..self.actions {
                    for o in self.row(s, l, a) {
                        write!(out, "t {s} {l} {a} {} {:?} {}", o.next, o.prob, join(&o.reward)).unwrap();
                        if o.agent_reward != o.reward {
                            write!(out, " | {}", join(&o.agent_reward)).unwrap();
                        }
                        out.push('\n');
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && (!l.starts_with('#') || l.starts_with("# fairlead")));
        let (line, header) = lines.next().ok_or_else(|| Error::parse(1, "empty model"))?;
        if header != MODEL_HEADER {
            return Err(if header.starts_with("# fairlead model") {
                Error::Incompatible(format!("unsupported model version `{header}`"))
            } else {
                Error::parse(line, format!("expected `{MODEL_HEADER}`"))
            });
        }
        let mut dim = |name: &str, hi: usize| -> Result<usize> {
            let (line, text) = lines.next().ok_or_else(|| Error::parse(line, format!("missing `{name}`")))?;
            text.strip_prefix(name)
                .and_then(|rest| rest.trim().parse::<usize>().ok())
                .filter(|v| (1..=hi).contains(v))
                .ok_or_else(|| Error::parse_key(line, name, format!("expected `{name} <1..={hi}>`")))
        };
        let agents = dim("agents", 64)?;
        let actions = dim("actions", 64)?;
        let states = dim("states", MAX_STATES)?;
        if states.saturating_mul(agents).saturating_mul(actions) > 16 * MAX_STATES {
            return Err(Error::parse_key(4, "states", "model too large"));
        }
        let mut model = ExplicitModel::empty(agents, actions, states);
        for (line, text) in lines {
            let mut parts = text.split_whitespace();
            let kind = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let int = |i: usize, hi: usize| -> Result<usize> {
                rest.get(i)
                    .and_then(|t| t.parse::<usize>().ok())
                    .filter(|v| *v < hi)
                    .ok_or_else(|| Error::parse_key(line, kind, format!("field {} must be an integer below {hi}", i + 1)))
            };
            let num = |t: &str| -> Result<f64> {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse_key(line, kind, format!("invalid number `{t}`")))
            };
            let vector = |slice: &[&str]| -> Result<Vec<f64>> {
                if slice.len() != agents {
                    return Err(Error::parse_key(line, kind, format!("expected {agents} values")));
                }
                slice.iter().map(|t| num(t)).collect()
            };
            match kind {
                "initial" => {
                    if rest.len() != 2 {
                        return Err(Error::parse_key(line, kind, "expected `initial <state> <prob>`"));
                    }
                    let s = int(0, states)?;
                    model.initial.push((s, num(rest[1])?));
                }
                "terminal" => {
                    if rest.len() != 1 {
                        return Err(Error::parse_key(line, kind, "expected `terminal <state>`"));
                    }
                    model.terminal[int(0, states)?] = true;
                }
                "history" => {
                    let s = int(0, states)?;
                    model.history[s] = vector(&rest[1..])?;
                }
                "t" => {
                    if rest.len() < 5 {
                        return Err(Error::parse_key(line, kind, "expected `t s leader action next prob r..`"));
                    }
                    let (s, l, a, next) = (int(0, states)?, int(1, agents)?, int(2, actions)?, int(3, states)?);
                    let prob = num(rest[4])?;
                    let tail = &rest[5..];
                    let (reward, agent_reward) = match tail.iter().position(|t| *t == "|") {
                        Some(bar) => (vector(&tail[..bar])?, vector(&tail[bar + 1..])?),
                        None => {
                            let r = vector(tail)?;
                            (r.clone(), r)
                        }
                    };
                    model.add_with(s, l, a, Outcome { next, prob, reward, agent_reward });
                }
                other => return Err(Error::parse(line, format!("unknown record `{other}`"))),
            }
        }
        model.validate().map_err(|e| match e {
            Error::Domain(m) => Error::parse(text.lines().count().max(1), m),
            other => other,
        })?;
        Ok(model)
    }

    /// States reachable from the initial distribution under any choices.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states];
        let mut stack: Vec<usize> = self.initial.iter().map(|(s, _)| *s).collect();
        while let Some(s) = stack.pop() {
            if std::mem::replace(&mut seen[s], true) {
                continue;
            }
            for l in 0..self.agents {
                for a in 0..self.actions {
                    stack.extend(self.row(s, l, a).iter().filter(|o| o.prob > 0.0).map(|o| o.next));
                }
            }
        }
        seen
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn history_key(h: &[f64]) -> Vec<i64> {
    h.iter().map(|v| (v * 1e6).round() as i64).collect()
}

/// Unrolls an iterated matrix game over `(step, cumulative rewards)`.
/// With a transfer rule the terminal step's transfer is folded into the
/// agents' rewards.
pub fn matrix_model(env: &MatrixGameEnv, rule: Option<TransferRule>) -> Result<ExplicitModel> {
    let game = EndGameStage::new(env.clone(), rule);
    let n = env.agents;
    let actions = env.kind.action_count();
    let mut rng = <SimRng as rand::SeedableRng>::seed_from_u64(0);
    let mut index: HashMap<(usize, Vec<i64>), usize> = HashMap::new();
    let mut nodes: Vec<StagedState<usize>> = Vec::new();
    let mut edges: Vec<(usize, AgentId, usize, usize, Vec<f64>, Vec<f64>)> = Vec::new();
    let start = game.initial_state(&mut rng);
    index.insert((start.inner, history_key(&start.history)), 0);
    nodes.push(start);
    let mut cursor = 0;
    while cursor < nodes.len() {
        let state = nodes[cursor].clone();
        if !game.is_terminal(&state) {
            for l in 0..n {
                for a in 0..actions {
                    let tr = game.step(&state, l, a, &mut rng)?;
                    let key = (tr.next.inner, history_key(&tr.next.history));
                    let next = *index.entry(key).or_insert_with(|| {
                        nodes.push(tr.next.clone());
                        nodes.len() - 1
                    });
                    edges.push((cursor, l, a, next, tr.metric_rewards, tr.rewards));
                }
            }
        }
        cursor += 1;
    }
    let mut model = ExplicitModel::empty(n, actions, nodes.len());
    model.initial = vec![(0, 1.0)];
    for (i, node) in nodes.iter().enumerate() {
        model.terminal[i] = game.is_terminal(node);
        model.history[i] = node.history.clone();
    }
    for (s, l, a, next, reward, agent_reward) in edges {
        model.add_with(s, l, a, Outcome { next, prob: 1.0, reward, agent_reward });
    }
    model.validate()?;
    Ok(model)
}
