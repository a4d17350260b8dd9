//! Tabular k-step Q-learning for self-interested leaders.
//!
//! An agent only chooses actions when it leads. The rewards it collects
//! while following are folded into a pending record and the update is
//! made when it leads again (or the episode ends):
//!
//! `Q(s, a) ← (1-α)·Q(s, a) + α·(r̂ + γ^k · max_a' Q(s', a'))`
//!
//! where `r̂ = Σ_{j<k} γ^j r_{t+j}` and `k` is the number of steps between
//! the two leaderships.

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{AgentId, TieBreak};
use crate::learner::{AgentObs, LeaderPolicy};
use crate::table::ValueTable;
use crate::SimRng;

/// An open k-step update.
#[derive(Clone, Debug, PartialEq)]
pub struct Pending {
    pub key: u64,
    pub action: usize,
    pub r_hat: f64,
    pub k: usize,
}

#[derive(Clone, Debug)]
pub struct AgentLearner {
    pub id: AgentId,
    pub table: ValueTable,
    pub alpha: f64,
    pub gamma: f64,
    pub tie_break: TieBreak,
    epsilon: f64,
    learning: bool,
    pending: Option<Pending>,
}

impl AgentLearner {
    pub fn new(id: AgentId, actions: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            id,
            table: ValueTable::new(actions, 1),
            alpha,
            gamma,
            tie_break: TieBreak::Lowest,
            epsilon: 0.0,
            learning: true,
            pending: None,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn q(&self, key: u64, action: usize) -> f64 {
        self.table.scalar(key, action)
    }

    pub fn greedy(&self, key: u64, rng: &mut SimRng) -> usize {
        let row = self.table.row(key).to_vec();
        self.tie_break.argmax(row, rng)
    }

    fn choose(&self, key: u64, actions: usize, rng: &mut SimRng) -> usize {
        let actions = actions.min(self.table.actions());
        if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..actions)
        } else {
            let row = &self.table.row(key)[..actions];
            self.tie_break.argmax(row.iter().copied(), rng)
        }
    }

    /// Picks the leader action at `key`, flushing the previous pending
    /// record against `key` and opening a new one.
    pub fn on_leader_selected(&mut self, leader: AgentId, key: u64, rng: &mut SimRng) -> Result<usize> {
        if leader != self.id {
            return Err(Error::Usage(format!(
                "agent {} asked to lead while agent {leader} is the leader",
                self.id + 1
            )));
        }
        Ok(self.lead_at(key, self.table.actions(), rng))
    }

    fn lead_at(&mut self, key: u64, actions: usize, rng: &mut SimRng) -> usize {
        if self.pending.is_some() {
            self.flush_pending(Some(key));
        }
        let action = self.choose(key, actions, rng);
        if self.learning {
            self.pending = Some(Pending { key, action, r_hat: 0.0, k: 0 });
        }
        action
    }

    /// Adds `γ^offset · reward` to the pending return. No-op without a
    /// pending record.
    pub fn accrue_follower_reward(&mut self, reward: f64, offset: usize) {
        if let Some(p) = &mut self.pending {
            p.r_hat += self.gamma.powi(offset as i32) * reward;
            p.k += 1;
        }
    }

    /// Applies the pending update, bootstrapping from `next` (`None` at a
    /// terminal state).
    pub fn flush_pending(&mut self, next: Option<u64>) {
        let Some(p) = self.pending.take() else {
            return;
        };
        let bootstrap = match next {
            Some(key) => self.gamma.powi(p.k as i32) * self.table.max_scalar(key),
            None => 0.0,
        };
        let target = p.r_hat + bootstrap;
        let q = &mut self.table.get_mut(p.key, p.action)[0];
        *q = (1.0 - self.alpha) * *q + self.alpha * target;
    }

    /// Opens a pending record directly.
    pub fn open_pending(&mut self, pending: Pending) {
        self.pending = Some(pending);
    }
}

impl LeaderPolicy for AgentLearner {
    fn prepare(&mut self, learning: bool, epsilon: f64) {
        self.learning = learning;
        self.epsilon = epsilon;
        if !learning {
            self.pending = None;
        }
    }

    fn lead(&mut self, obs: &AgentObs<'_>, actions: usize, rng: &mut SimRng) -> usize {
        self.lead_at(obs.key, actions, rng)
    }

    fn observe(&mut self, reward: f64, _rng: &mut SimRng) {
        let offset = self.pending.as_ref().map_or(0, |p| p.k);
        self.accrue_follower_reward(reward, offset);
    }

    fn finish(&mut self, _rng: &mut SimRng) {
        self.flush_pending(None);
    }

    fn save(&self) -> String {
        self.table.to_text()
    }

    fn load(&mut self, text: &str) -> Result<()> {
        let table = ValueTable::from_text(text)?;
        if table.actions() != self.table.actions() || table.width() != 1 {
            return Err(Error::Incompatible(format!(
                "agent table has {} actions × width {}, expected {} × 1",
                table.actions(),
                table.width(),
                self.table.actions()
            )));
        }
        self.table = table;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(7)
    }

    fn learner(alpha: f64) -> AgentLearner {
        AgentLearner::new(0, 2, alpha, 0.9)
    }

    #[test]
    fn zero_table_picks_first_action() {
        let mut a = learner(0.1);
        assert_eq!(a.on_leader_selected(0, 0, &mut rng()).unwrap(), 0);
    }

    #[test]
    fn greedy_picks_best_action() {
        let mut a = learner(0.1);
        a.table.set(0, 0, &[1.0]);
        a.table.set(0, 1, &[3.0]);
        assert_eq!(a.on_leader_selected(0, 0, &mut rng()).unwrap(), 1);
    }

    #[test]
    fn leading_out_of_turn_is_an_error() {
        let mut a = learner(0.1);
        assert!(matches!(a.on_leader_selected(1, 0, &mut rng()), Err(Error::Usage(_))));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut a = AgentLearner::new(0, 3, 0.1, 0.9);
        a.table.set(0, 2, &[100.0]);
        a.prepare(false, 1.0);
        let mut rng = rng();
        let draws = 10_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[a.on_leader_selected(0, 0, &mut rng).unwrap()] += 1;
        }
        let p = 1.0 / 3.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn accrual_is_geometric() {
        let mut a = learner(1.0);
        a.open_pending(Pending { key: 0, action: 0, r_hat: 2.0, k: 1 });
        a.accrue_follower_reward(1.0, 1);
        assert!((a.pending().unwrap().r_hat - 2.9).abs() < 1e-12);
        a.accrue_follower_reward(1.0, 2);
        assert!((a.pending().unwrap().r_hat - 3.71).abs() < 1e-12);
        assert_eq!(a.pending().unwrap().k, 3);
        a.accrue_follower_reward(0.0, 3);
        assert!((a.pending().unwrap().r_hat - 3.71).abs() < 1e-12);
    }

    #[test]
    fn accrue_without_pending_is_a_no_op() {
        let mut a = learner(1.0);
        a.accrue_follower_reward(5.0, 0);
        assert!(a.pending().is_none());
    }

    #[test]
    fn one_step_flush() {
        let mut a = learner(1.0);
        a.table.set(1, 1, &[10.0]);
        a.open_pending(Pending { key: 0, action: 0, r_hat: 2.0, k: 1 });
        a.flush_pending(Some(1));
        assert!((a.q(0, 0) - 11.0).abs() < 1e-12);
        assert!(a.pending().is_none());
    }

    #[test]
    fn terminal_flush_uses_zero_bootstrap() {
        let mut a = learner(1.0);
        a.open_pending(Pending { key: 0, action: 1, r_hat: 3.0, k: 1 });
        a.flush_pending(None);
        assert_eq!(a.q(0, 1), 3.0);
    }

    #[test]
    fn two_step_flush() {
        let mut a = learner(0.5);
        a.table.set(1, 0, &[10.0]);
        a.open_pending(Pending { key: 0, action: 0, r_hat: 2.9, k: 2 });
        a.flush_pending(Some(1));
        let expected = 0.5 * (2.9 + 0.9f64.powi(2) * 10.0);
        assert!((a.q(0, 0) - expected).abs() < 1e-12);
        assert!((a.q(0, 0) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn consecutive_leadership_is_one_step_q_learning() {
        let mut a = learner(1.0);
        let mut rng = rng();
        a.prepare(true, 0.0);
        a.lead(&AgentObs { key: 0, features: None }, 2, &mut rng);
        a.observe(4.0, &mut rng);
        let p = a.pending().unwrap().clone();
        assert_eq!((p.r_hat, p.k), (4.0, 1));
        a.lead(&AgentObs { key: 1, features: None }, 2, &mut rng);
        assert_eq!(a.q(0, 0), 4.0);
    }

    #[test]
    fn frozen_learner_never_updates() {
        let mut a = learner(1.0);
        let mut rng = rng();
        a.prepare(false, 0.0);
        a.lead(&AgentObs { key: 0, features: None }, 2, &mut rng);
        a.observe(4.0, &mut rng);
        a.finish(&mut rng);
        assert!(a.table.is_empty());
    }

    /// Deterministic chain 0 → 1 → 2 (terminal); action 1 pays 1 at state
    /// 0 and 2 at state 1, action 0 pays nothing.
    #[test]
    fn converges_to_value_iteration_on_a_chain() {
        let reward = |s: u64, a: usize| if a == 1 { (s + 1) as f64 } else { 0.0 };
        let gamma = 0.9;
        let mut exact = [[0.0f64; 2]; 2];
        for s in (0..2u64).rev() {
            for a in 0..2 {
                let next = if s == 1 { 0.0 } else { exact[1][0].max(exact[1][1]) };
                exact[s as usize][a] = reward(s, a) + gamma * next;
            }
        }
        let mut learner = AgentLearner::new(0, 2, 1.0, gamma);
        for _ in 0..10 {
            for s in 0..2u64 {
                for a in 0..2 {
                    learner.open_pending(Pending { key: s, action: a, r_hat: reward(s, a), k: 1 });
                    learner.flush_pending(if s == 1 { None } else { Some(s + 1) });
                }
            }
        }
        for s in 0..2u64 {
            for a in 0..2 {
                assert!((learner.q(s, a) - exact[s as usize][a]).abs() < 1e-6);
            }
        }
    }
}
