//! Brute-force search over deterministic leader and action choices.

use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::fairness::FairnessMeasure;
use crate::game::AgentId;
use crate::solver::model::ExplicitModel;

/// Largest number of choice combinations the oracle will enumerate.
pub const ORACLE_LIMIT: f64 = 1e7;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Best fairness score of the expected undiscounted returns.
    pub value: f64,
    pub returns: Vec<f64>,
    /// `(state, leader, action)` choices of one optimal plan, in visit order.
    pub witness: Vec<(usize, AgentId, usize)>,
    /// Number of plans enumerated.
    pub plans: f64,
}

struct Entry {
    returns: Vec<f64>,
    choice: (AgentId, usize),
    /// Chosen entry index for each distinct successor.
    children: Vec<(usize, usize)>,
}

type Plans = Rc<Vec<Entry>>;

struct Search<'a> {
    model: &'a ExplicitModel,
    horizon: usize,
    counts: HashMap<(usize, usize), f64>,
    plans: HashMap<(usize, usize), Plans>,
}

impl<'a> Search<'a> {
    fn leaf(&self, s: usize, depth: usize) -> bool {
        self.model.terminal[s] || depth >= self.horizon
    }

    /// Distinct successors of a row with merged probabilities.
    fn successors(&self, s: usize, l: AgentId, a: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = Vec::new();
        for o in self.model.row(s, l, a) {
            match out.iter_mut().find(|(n, _)| *n == o.next) {
                Some(entry) => entry.1 += o.prob,
                None => out.push((o.next, o.prob)),
            }
        }
        out
    }

    fn count(&mut self, s: usize, depth: usize) -> f64 {
        if self.leaf(s, depth) {
            return 1.0;
        }
        if let Some(c) = self.counts.get(&(s, depth)) {
            return *c;
        }
        let mut total = 0.0;
        for l in 0..self.model.agents {
            for a in 0..self.model.actions {
                let mut product = 1.0;
                for (next, _) in self.successors(s, l, a) {
                    product *= self.count(next, depth + 1);
                }
                total += product;
            }
        }
        let total = total.min(f64::MAX);
        self.counts.insert((s, depth), total);
        total
    }

    fn enumerate(&mut self, s: usize, depth: usize) -> Plans {
        if self.leaf(s, depth) {
            return Rc::new(vec![Entry { returns: vec![0.0; self.model.agents], choice: (0, 0), children: Vec::new() }]);
        }
        if let Some(p) = self.plans.get(&(s, depth)) {
            return Rc::clone(p);
        }
        let mut out = Vec::new();
        for l in 0..self.model.agents {
            for a in 0..self.model.actions {
                let base = self.model.expected_reward(s, l, a);
                let succ = self.successors(s, l, a);
                let subs: Vec<Plans> = succ.iter().map(|(n, _)| self.enumerate(*n, depth + 1)).collect();
                // Odometer over one sub-plan per successor.
                let mut pick = vec![0usize; succ.len()];
                loop {
                    let mut returns = base.clone();
                    for (k, (_, p)) in succ.iter().enumerate() {
                        for (r, c) in returns.iter_mut().zip(&subs[k][pick[k]].returns) {
                            *r += p * c;
                        }
                    }
                    let children = succ.iter().zip(&pick).map(|((n, _), i)| (*n, *i)).collect();
                    out.push(Entry { returns, choice: (l, a), children });
                    let mut k = 0;
                    while k < pick.len() {
                        pick[k] += 1;
                        if pick[k] < subs[k].len() {
                            break;
                        }
                        pick[k] = 0;
                        k += 1;
                    }
                    if k == pick.len() {
                        break;
                    }
                }
            }
        }
        let out = Rc::new(out);
        self.plans.insert((s, depth), Rc::clone(&out));
        out
    }

    fn witness(&mut self, s: usize, depth: usize, index: usize, out: &mut Vec<(usize, AgentId, usize)>) {
        if self.leaf(s, depth) {
            return;
        }
        let plans = self.enumerate(s, depth);
        let entry = &plans[index];
        out.push((s, entry.choice.0, entry.choice.1));
        for (next, i) in entry.children.clone() {
            self.witness(next, depth + 1, i, out);
        }
    }
}

/// Exhaustively enumerates plans (a leader and an action at every reachable
/// decision point, conditioned on the path) up to `horizon` decisions and
/// returns the one whose expected undiscounted metric returns score best
/// under `phi`. Refuses when the plan count exceeds [`ORACLE_LIMIT`].
pub fn enumeration_oracle(model: &ExplicitModel, phi: &FairnessMeasure, horizon: usize) -> Result<OracleResult> {
    model.validate()?;
    let mut search = Search { model, horizon, counts: HashMap::new(), plans: HashMap::new() };
    let mut total = 1.0;
    for (s, _) in &model.initial {
        total *= search.count(*s, 0);
    }
    if total > ORACLE_LIMIT {
        return Err(Error::TooLarge { estimate: total, limit: ORACLE_LIMIT });
    }
    let starts: Vec<(usize, f64, Plans)> = model
        .initial
        .iter()
        .map(|(s, p)| (*s, *p, search.enumerate(*s, 0)))
        .collect();
    let mut pick = vec![0usize; starts.len()];
    let mut best: Option<(f64, Vec<f64>, Vec<usize>)> = None;
    loop {
        let mut returns = vec![0.0; model.agents];
        for (k, (_, p, plans)) in starts.iter().enumerate() {
            for (r, c) in returns.iter_mut().zip(&plans[pick[k]].returns) {
                *r += p * c;
            }
        }
        let score = phi.score(&returns);
        if best.as_ref().is_none_or(|(b, _, _)| score > *b) {
            best = Some((score, returns, pick.clone()));
        }
        let mut k = 0;
        while k < pick.len() {
            pick[k] += 1;
            if pick[k] < starts[k].2.len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == pick.len() {
            break;
        }
    }
    let (value, returns, picks) = best.ok_or_else(|| Error::Domain("model has no initial state".into()))?;
    let mut witness = Vec::new();
    for ((s, _, _), i) in starts.iter().zip(picks) {
        search.witness(*s, 0, i, &mut witness);
    }
    Ok(OracleResult { value, returns, witness, plans: total })
}
