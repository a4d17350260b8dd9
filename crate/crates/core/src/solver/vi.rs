//! Model-based value iteration for agents and mediator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fairness::FairnessMeasure;
use crate::game::{argmax_lowest, AgentId};
use crate::solver::model::ExplicitModel;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub phi: FairnessMeasure,
    pub gamma_agents: f64,
    pub gamma_mediator: f64,
    /// Whether the mediator judges candidates by `s_r + Q̄` or by `Q̄`.
    pub use_history: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            phi: FairnessMeasure::MinWelfare,
            gamma_agents: 0.9,
            gamma_mediator: 0.99,
            use_history: true,
            tolerance: 1e-10,
            max_iterations: 100_000,
        }
    }
}

/// Deterministic leader actions: `actions[agent][state]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Profile {
    pub actions: Vec<Vec<usize>>,
}

impl Profile {
    pub fn constant(agents: usize, states: usize, action: usize) -> Self {
        Self { actions: vec![vec![action; states]; agents] }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Domain(format!("discount {gamma} outside [0, 1]")))
    }
}

/// Leader chosen at `s` under `mediator`, if `s` is not terminal.
fn leader_at(model: &ExplicitModel, mediator: &[usize], s: usize) -> Option<AgentId> {
    (!model.terminal[s]).then(|| mediator[s])
}

/// k-step Bellman iteration for `agent` with the mediator and the other
/// agents fixed. `own` fixes the agent's own action for policy evaluation;
/// `None` maximises. Returns `Q[state][action]`.
fn agent_iteration(
    model: &ExplicitModel,
    agent: AgentId,
    mediator: &[usize],
    profile: &Profile,
    own: Option<&[usize]>,
    settings: &SolverSettings,
) -> Result<Vec<Vec<f64>>> {
    let gamma = settings.gamma_agents;
    check_gamma(gamma)?;
    let n = model.states;
    // Follower states: non-terminal states led by someone else.
    let follower: Vec<usize> = (0..n).filter(|s| leader_at(model, mediator, *s).is_some_and(|l| l != agent)).collect();
    let mut slot = vec![usize::MAX; n];
    for (i, s) in follower.iter().enumerate() {
        slot[*s] = i;
    }
    let f = follower.len();
    let mut a = DMatrix::<f64>::identity(f, f);
    let mut r_f = DVector::<f64>::zeros(f);
    // Transitions from follower states into lead states, discounted.
    let mut to_lead: Vec<Vec<(usize, f64)>> = vec![Vec::new(); f];
    for (i, s) in follower.iter().enumerate() {
        let l = mediator[*s];
        let act = profile.actions[l][*s];
        r_f[i] = model.expected_agent_reward(*s, l, act, agent);
        for o in model.row(*s, l, act) {
            if model.terminal[o.next] {
                continue;
            }
            if slot[o.next] != usize::MAX {
                a[(i, slot[o.next])] -= gamma * o.prob;
            } else {
                to_lead[i].push((o.next, gamma * o.prob));
            }
        }
    }
    let lu = a.lu();
    let mut q = vec![vec![0.0; model.actions]; n];
    let mut lead_value = vec![0.0; n];
    for iteration in 0..settings.max_iterations {
        for s in 0..n {
            if leader_at(model, mediator, s) == Some(agent) {
                lead_value[s] = match own {
                    Some(p) => q[s][p[s]],
                    None => q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max),
                };
            }
        }
        let rhs = DVector::from_iterator(
            f,
            (0..f).map(|i| r_f[i] + to_lead[i].iter().map(|(s, w)| w * lead_value[*s]).sum::<f64>()),
        );
        let w_f = if f == 0 {
            rhs
        } else {
            lu.solve(&rhs).ok_or_else(|| Error::Domain("follower-period system is singular".into()))?
        };
        let w = |s: usize| -> f64 {
            if model.terminal[s] {
                0.0
            } else if slot[s] != usize::MAX {
                w_f[slot[s]]
            } else {
                lead_value[s]
            }
        };
        let mut residual: f64 = 0.0;
        let mut next = vec![vec![0.0; model.actions]; n];
        for s in (0..n).filter(|s| !model.terminal[*s]) {
            for act in 0..model.actions {
                let v = model.expected_agent_reward(s, agent, act, agent)
                    + gamma * model.row(s, agent, act).iter().map(|o| o.prob * w(o.next)).sum::<f64>();
                residual = residual.max((v - q[s][act]).abs());
                next[s][act] = v;
            }
        }
        q = next;
        if residual < settings.tolerance {
            return Ok(q);
        }
        if iteration + 1 == settings.max_iterations {
            return Err(Error::NoConvergence { iterations: settings.max_iterations, residual });
        }
    }
    Err(Error::NoConvergence { iterations: 0, residual: f64::INFINITY })
}

/// Optimal `Q_i[state][action]` for `agent` given the mediator policy and
/// the other agents' actions. Follower periods are absorbed exactly
/// through a linear system over the states the agent does not lead.
pub fn agent_value_iteration(
    model: &ExplicitModel,
    agent: AgentId,
    mediator: &[usize],
    profile: &Profile,
    settings: &SolverSettings,
) -> Result<Vec<Vec<f64>>> {
    agent_iteration(model, agent, mediator, profile, None, settings)
}

/// Mediator action values `q[state][leader]` (vectors) and the greedy policy.
#[derive(Clone, Debug, PartialEq)]
pub struct MediatorSolution {
    pub q: Vec<Vec<Vec<f64>>>,
    pub policy: Vec<usize>,
    pub iterations: usize,
}

impl MediatorSolution {
    /// `φ` of the full value `h + Q̄` of the policy's choice, averaged over
    /// the initial distribution.
    pub fn initial_value(&self, model: &ExplicitModel, settings: &SolverSettings) -> f64 {
        model
            .initial
            .iter()
            .map(|(s, p)| p * settings.phi.score(&full(model, &self.q, *s, self.policy[*s], settings.use_history)))
            .sum()
    }
}

fn full(model: &ExplicitModel, q: &[Vec<Vec<f64>>], s: usize, leader: AgentId, use_history: bool) -> Vec<f64> {
    if use_history {
        q[s][leader].iter().zip(&model.history[s]).map(|(a, b)| a + b).collect()
    } else {
        q[s][leader].clone()
    }
}

/// φ-greedy leader at `s`, lowest index on ties.
pub fn mediator_greedy(model: &ExplicitModel, q: &[Vec<Vec<f64>>], s: usize, settings: &SolverSettings) -> AgentId {
    argmax_lowest((0..model.agents).map(|l| settings.phi.score(&full(model, q, s, l, settings.use_history))))
}

/// One application of the truncated mediator operator with the successor
/// leader at every state given by `successor`.
pub fn mediator_backup(
    model: &ExplicitModel,
    profile: &Profile,
    q: &[Vec<Vec<f64>>],
    successor: &[usize],
    gamma: f64,
) -> Vec<Vec<Vec<f64>>> {
    let mut out = vec![vec![vec![0.0; model.agents]; model.agents]; model.states];
    for s in (0..model.states).filter(|s| !model.terminal[*s]) {
        for l in 0..model.agents {
            let act = profile.actions[l][s];
            let mut v = model.expected_reward(s, l, act);
            for o in model.row(s, l, act) {
                if model.terminal[o.next] {
                    continue;
                }
                for (x, b) in v.iter_mut().zip(&q[o.next][successor[o.next]]) {
                    *x += gamma * o.prob * b;
                }
            }
            out[s][l] = v;
        }
    }
    out
}

fn sup_diff(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>]) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Fixed point of the truncated mediator operator with expected-value
/// greedy successors.
pub fn mediator_value_iteration(model: &ExplicitModel, profile: &Profile, settings: &SolverSettings) -> Result<MediatorSolution> {
    check_gamma(settings.gamma_mediator)?;
    let mut q = vec![vec![vec![0.0; model.agents]; model.agents]; model.states];
    for iteration in 1..=settings.max_iterations {
        let successor: Vec<usize> = (0..model.states).map(|s| mediator_greedy(model, &q, s, settings)).collect();
        let next = mediator_backup(model, profile, &q, &successor, settings.gamma_mediator);
        let residual = sup_diff(&next, &q);
        q = next;
        if residual < settings.tolerance {
            let policy = (0..model.states).map(|s| mediator_greedy(model, &q, s, settings)).collect();
            return Ok(MediatorSolution { q, policy, iterations: iteration });
        }
        if iteration == settings.max_iterations {
            return Err(Error::NoConvergence { iterations: iteration, residual });
        }
    }
    Err(Error::NoConvergence { iterations: 0, residual: f64::INFINITY })
}

/// Vector action values of a fixed mediator policy.
pub fn mediator_policy_evaluation(
    model: &ExplicitModel,
    profile: &Profile,
    mediator: &[usize],
    settings: &SolverSettings,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let mut q = vec![vec![vec![0.0; model.agents]; model.agents]; model.states];
    for iteration in 1..=settings.max_iterations {
        let next = mediator_backup(model, profile, &q, mediator, settings.gamma_mediator);
        let residual = sup_diff(&next, &q);
        q = next;
        if residual < settings.tolerance {
            return Ok(q);
        }
        if iteration == settings.max_iterations {
            return Err(Error::NoConvergence { iterations: iteration, residual });
        }
    }
    Ok(q)
}

/// States of the history-augmented model and their full action values.
#[derive(Clone, Debug, PartialEq)]
pub struct FullStateSolution {
    /// `(model state, accumulated rewards)` per node.
    pub nodes: Vec<(usize, Vec<f64>)>,
    /// `q[node][leader]`: accumulated rewards plus discounted future.
    pub q: Vec<Vec<Vec<f64>>>,
}

/// Largest history-augmented state space accepted.
pub const MAX_FULL_STATES: usize = 1_000_000;

/// Value iteration over `(state, s_r)` pairs built by accumulating rewards
/// forward from the initial states, where the value of a node is its
/// accumulated rewards plus the discounted future from it.
pub fn full_state_value_iteration(model: &ExplicitModel, profile: &Profile, settings: &SolverSettings) -> Result<FullStateSolution> {
    use std::collections::HashMap;
    let key = |s: usize, h: &[f64]| (s, h.iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
    let mut index: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut nodes: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut edges: Vec<Vec<Vec<(usize, f64, Vec<f64>)>>> = Vec::new();
    for (s, _) in &model.initial {
        let h = model.history[*s].clone();
        index.entry(key(*s, &h)).or_insert_with(|| {
            nodes.push((*s, h));
            nodes.len() - 1
        });
    }
    let mut cursor = 0;
    while cursor < nodes.len() {
        let (s, h) = nodes[cursor].clone();
        let mut per_leader = Vec::new();
        if !model.terminal[s] {
            for l in 0..model.agents {
                let act = profile.actions[l][s];
                let mut outs = Vec::new();
                for o in model.row(s, l, act) {
                    let h2: Vec<f64> = h.iter().zip(&o.reward).map(|(a, b)| a + b).collect();
                    let next = *index.entry(key(o.next, &h2)).or_insert_with(|| {
                        nodes.push((o.next, h2.clone()));
                        nodes.len() - 1
                    });
                    outs.push((next, o.prob, o.reward.clone()));
                }
                per_leader.push(outs);
            }
        }
        edges.push(per_leader);
        if nodes.len() > MAX_FULL_STATES {
            return Err(Error::TooLarge { estimate: nodes.len() as f64, limit: MAX_FULL_STATES as f64 });
        }
        cursor += 1;
    }
    let n = model.agents;
    let gamma = settings.gamma_mediator;
    let mut q: Vec<Vec<Vec<f64>>> = nodes.iter().map(|(_, h)| vec![h.clone(); n]).collect();
    let value = |q: &[Vec<Vec<f64>>], y: usize| -> Vec<f64> {
        let (s, h) = &nodes[y];
        if model.terminal[*s] {
            return h.clone();
        }
        let best = argmax_lowest(q[y].iter().map(|v| settings.phi.score(v)));
        q[y][best].clone()
    };
    for iteration in 1..=settings.max_iterations {
        let mut next = q.clone();
        for (y, per_leader) in edges.iter().enumerate() {
            let h = &nodes[y].1;
            for (l, outs) in per_leader.iter().enumerate() {
                let mut v = h.clone();
                for (y2, p, r) in outs {
                    let future = value(&q, *y2);
                    let h2 = &nodes[*y2].1;
                    for i in 0..n {
                        v[i] += p * (r[i] + gamma * (future[i] - h2[i]));
                    }
                }
                next[y][l] = v;
            }
        }
        let residual = sup_diff(&next, &q);
        q = next;
        if residual < settings.tolerance {
            return Ok(FullStateSolution { nodes, q });
        }
        if iteration == settings.max_iterations {
            return Err(Error::NoConvergence { iterations: iteration, residual });
        }
    }
    Ok(FullStateSolution { nodes, q })
}

/// Expected per-agent metric returns from the initial distribution.
/// Undiscounted on acyclic models, discounted by `γ_m` otherwise.
pub fn expected_returns(model: &ExplicitModel, profile: &Profile, mediator: &[usize], settings: &SolverSettings) -> Result<Vec<f64>> {
    let gamma = if is_acyclic(model) { 1.0 } else { settings.gamma_mediator };
    let mut v = vec![vec![0.0; model.agents]; model.states];
    for iteration in 1..=settings.max_iterations.max(model.states + 1) {
        let mut residual: f64 = 0.0;
        let mut next = vec![vec![0.0; model.agents]; model.states];
        for s in (0..model.states).filter(|s| !model.terminal[*s]) {
            let l = mediator[s];
            let act = profile.actions[l][s];
            for o in model.row(s, l, act) {
                for i in 0..model.agents {
                    next[s][i] += o.prob * (o.reward[i] + gamma * v[o.next][i]);
                }
            }
            for i in 0..model.agents {
                residual = residual.max((next[s][i] - v[s][i]).abs());
            }
        }
        v = next;
        if residual < settings.tolerance {
            break;
        }
        if iteration == settings.max_iterations {
            return Err(Error::NoConvergence { iterations: iteration, residual });
        }
    }
    let mut out = vec![0.0; model.agents];
    for (s, p) in &model.initial {
        for i in 0..model.agents {
            out[i] += p * v[*s][i];
        }
    }
    Ok(out)
}

/// Whether no state can reach itself.
pub fn is_acyclic(model: &ExplicitModel) -> bool {
    // Kahn's algorithm over the union of all transitions.
    let mut indegree = vec![0usize; model.states];
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); model.states];
    for s in 0..model.states {
        for l in 0..model.agents {
            for a in 0..model.actions {
                for o in model.row(s, l, a) {
                    succ[s].push(o.next);
                    indegree[o.next] += 1;
                }
            }
        }
    }
    let mut stack: Vec<usize> = (0..model.states).filter(|s| indegree[*s] == 0).collect();
    let mut seen = 0;
    while let Some(s) = stack.pop() {
        seen += 1;
        for t in &succ[s] {
            indegree[*t] -= 1;
            if indegree[*t] == 0 {
                stack.push(*t);
            }
        }
    }
    seen == model.states
}

#[derive(Clone, Debug, PartialEq)]
pub struct JamviResult {
    pub profile: Profile,
    pub mediator: Vec<usize>,
    /// Mediator value at the initial distribution after every turn,
    /// starting with the initial mediator solve.
    pub trace: Vec<f64>,
    pub rounds: usize,
    /// Whether the last round changed no policy.
    pub converged: bool,
    pub returns: Vec<f64>,
    pub fairness: f64,
}

/// Greedy policy over `q[state]`, keeping `current` where it ties the best.
fn best_response(model: &ExplicitModel, q: &[Vec<f64>], current: &[usize]) -> Vec<usize> {
    (0..model.states)
        .map(|s| {
            let best = q[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if q[s][current[s]] >= best - 1e-9 {
                current[s]
            } else {
                argmax_lowest(q[s].iter().copied())
            }
        })
        .collect()
}

fn effective_value(model: &ExplicitModel, profile: &Profile, mediator: &[usize], settings: &SolverSettings) -> Result<f64> {
    let q = mediator_policy_evaluation(model, profile, mediator, settings)?;
    Ok(model
        .initial
        .iter()
        .map(|(s, p)| {
            if model.terminal[*s] {
                0.0
            } else {
                p * settings.phi.score(&full(model, &q, *s, mediator[*s], settings.use_history))
            }
        })
        .sum())
}

/// Each agent's immediately best action as leader at every state.
pub fn myopic_profile(model: &ExplicitModel) -> Profile {
    let actions = (0..model.agents)
        .map(|i| {
            (0..model.states)
                .map(|s| {
                    if model.terminal[s] {
                        0
                    } else {
                        argmax_lowest((0..model.actions).map(|a| model.expected_agent_reward(s, i, a, i)))
                    }
                })
                .collect()
        })
        .collect();
    Profile { actions }
}

/// Turn-by-turn joint solve: agents best-respond in order, then the
/// mediator re-solves, for up to `rounds` rounds or until nothing changes.
pub fn sequential_jamvi(model: &ExplicitModel, rounds: usize, settings: &SolverSettings) -> Result<JamviResult> {
    if rounds == 0 {
        return Err(Error::Usage("sequential solve needs at least one round".into()));
    }
    model.validate()?;
    let mut profile = myopic_profile(model);
    let first = mediator_value_iteration(model, &profile, settings)?;
    let mut mediator = first.policy.clone();
    let mut trace = vec![first.initial_value(model, settings)];
    let mut converged = false;
    let mut done = 0;
    for _ in 0..rounds {
        done += 1;
        let mut changed = false;
        for agent in 0..model.agents {
            let q = agent_value_iteration(model, agent, &mediator, &profile, settings)?;
            let updated = best_response(model, &q, &profile.actions[agent]);
            changed |= updated != profile.actions[agent];
            profile.actions[agent] = updated;
            trace.push(effective_value(model, &profile, &mediator, settings)?);
        }
        let solution = mediator_value_iteration(model, &profile, settings)?;
        // Keep the current leader wherever it is still greedy-optimal.
        let scores = |s: usize, l: usize| settings.phi.score(&full(model, &solution.q, s, l, settings.use_history));
        let updated: Vec<usize> = (0..model.states)
            .map(|s| if scores(s, mediator[s]) >= scores(s, solution.policy[s]) - 1e-9 { mediator[s] } else { solution.policy[s] })
            .collect();
        changed |= updated != mediator;
        mediator = updated;
        trace.push(effective_value(model, &profile, &mediator, settings)?);
        if !changed {
            converged = true;
            break;
        }
    }
    let returns = expected_returns(model, &profile, &mediator, settings)?;
    let fairness = settings.phi.score(&returns);
    Ok(JamviResult { profile, mediator, trace, rounds: done, converged, returns, fairness })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpeReport {
    pub is_mpe: bool,
    pub worst_gap: f64,
    /// Agent and state of the largest gap.
    pub worst: Option<(AgentId, usize)>,
}

pub const MPE_TOLERANCE: f64 = 1e-8;

/// Largest gain any agent gets from a unilateral deviation at a state it
/// leads, with everyone else fixed.
pub fn verify_mpe(model: &ExplicitModel, profile: &Profile, mediator: &[usize], settings: &SolverSettings) -> Result<MpeReport> {
    let mut worst_gap: f64 = 0.0;
    let mut worst = None;
    for agent in 0..model.agents {
        let best = agent_value_iteration(model, agent, mediator, profile, settings)?;
        let own = agent_iteration(model, agent, mediator, profile, Some(&profile.actions[agent]), settings)?;
        for s in (0..model.states).filter(|s| leader_at(model, mediator, *s) == Some(agent)) {
            let v_star = best[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let gap = v_star - own[s][profile.actions[agent][s]];
            if gap > worst_gap {
                worst_gap = gap;
                worst = Some((agent, s));
            }
        }
    }
    Ok(MpeReport { is_mpe: worst_gap <= MPE_TOLERANCE, worst_gap, worst })
}
