//! Comparison leader-selection schemes: a fixed leader, round-robin
//! alternation, plurality voting by learning voters, and the mediator
//! ablations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{AgentId, TieBreak};
use crate::learner::{SelectionObs, Selector, StepFeedback, Turn};
use crate::mediator::MediatorVariant;
use crate::table::{ValueTable, TABLE_HEADER};
use crate::SimRng;

/// The same leader at every stage.
#[derive(Clone, Debug)]
pub struct FixedSelector {
    pub leader: AgentId,
}

impl FixedSelector {
    pub fn new(leader: AgentId, agents: usize) -> Result<Self> {
        if leader >= agents {
            return Err(Error::Config(format!("fixed leader {} out of range", leader + 1)));
        }
        Ok(Self { leader })
    }
}

impl Selector for FixedSelector {
    fn name(&self) -> String {
        "fixed".into()
    }

    fn select(&mut self, _obs: &SelectionObs<'_>, _rng: &mut SimRng) -> AgentId {
        self.leader
    }
}

/// Agent `stage mod N`, restarting from the first agent every episode.
#[derive(Clone, Debug)]
pub struct AlternatingSelector {
    pub agents: usize,
}

impl AlternatingSelector {
    pub fn alternating_selector(stage: usize, agents: usize) -> AgentId {
        stage % agents
    }
}

impl Selector for AlternatingSelector {
    fn name(&self) -> String {
        "alternating".into()
    }

    fn select(&mut self, obs: &SelectionObs<'_>, _rng: &mut SimRng) -> AgentId {
        Self::alternating_selector(obs.stage, self.agents)
    }
}

#[derive(Clone, Debug, PartialEq)]
struct VotePending {
    key: u64,
    vote: AgentId,
    acc: f64,
    tau: usize,
}

/// One agent's learned ballot: Q-values over candidates, keyed by the
/// agent's own observation and trained on its own reward between
/// selection stages.
#[derive(Clone, Debug)]
pub struct VotingLearner {
    pub table: ValueTable,
    pub alpha: f64,
    pub gamma: f64,
    epsilon: f64,
    learning: bool,
    pending: Option<VotePending>,
}

impl VotingLearner {
    pub fn new(agents: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            table: ValueTable::new(agents, 1),
            alpha,
            gamma,
            epsilon: 0.0,
            learning: false,
            pending: None,
        }
    }

    pub fn vote(&mut self, key: u64, rng: &mut SimRng) -> AgentId {
        if self.learning {
            self.flush(Some(key));
        }
        let n = self.table.actions();
        let vote = if self.epsilon > 0.0 && rng.gen::<f64>() < self.epsilon {
            rng.gen_range(0..n)
        } else {
            TieBreak::Lowest.argmax(self.table.row(key).iter().copied(), rng)
        };
        if self.learning {
            self.pending = Some(VotePending { key, vote, acc: 0.0, tau: 0 });
        }
        vote
    }

    fn observe(&mut self, reward: f64) {
        if let Some(p) = &mut self.pending {
            p.acc += self.gamma.powi(p.tau as i32) * reward;
            p.tau += 1;
        }
    }

    fn flush(&mut self, next: Option<u64>) {
        let Some(p) = self.pending.take() else {
            return;
        };
        let bootstrap = next.map_or(0.0, |k| self.gamma.powi(p.tau as i32) * self.table.max_scalar(k));
        let q = &mut self.table.get_mut(p.key, p.vote)[0];
        *q = (1.0 - self.alpha) * *q + self.alpha * (p.acc + bootstrap);
    }
}

/// Plurality winner; ties are broken uniformly at random.
pub fn plurality(votes: &[AgentId], agents: usize, rng: &mut SimRng) -> AgentId {
    let mut tally = vec![0.0; agents];
    for v in votes {
        tally[*v] += 1.0;
    }
    TieBreak::Random.argmax(tally, rng)
}

/// Each agent votes with its own learner; voter `i` learns during agent
/// `i`'s turn.
#[derive(Clone, Debug)]
pub struct VoteSelector {
    pub voters: Vec<VotingLearner>,
    pub last_votes: Vec<AgentId>,
}

impl VoteSelector {
    pub fn new(agents: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            voters: (0..agents).map(|_| VotingLearner::new(agents, alpha, gamma)).collect(),
            last_votes: Vec::new(),
        }
    }

    pub fn vote_and_elect(&mut self, agent_keys: &[u64], rng: &mut SimRng) -> AgentId {
        let n = self.voters.len();
        self.last_votes = self
            .voters
            .iter_mut()
            .zip(agent_keys)
            .map(|(v, k)| v.vote(*k, rng))
            .collect();
        plurality(&self.last_votes, n, rng)
    }
}

impl Selector for VoteSelector {
    fn name(&self) -> String {
        "vote".into()
    }

    fn prepare(&mut self, turn: Turn, epsilon: f64) {
        for (i, v) in self.voters.iter_mut().enumerate() {
            v.learning = turn.agent_learns(i);
            v.epsilon = if v.learning { epsilon } else { 0.0 };
            v.pending = None;
        }
    }

    fn select(&mut self, obs: &SelectionObs<'_>, rng: &mut SimRng) -> AgentId {
        self.vote_and_elect(obs.agent_keys, rng)
    }

    fn observe(&mut self, feedback: &StepFeedback<'_>, _rng: &mut SimRng) {
        for (v, r) in self.voters.iter_mut().zip(feedback.rewards) {
            v.observe(*r);
        }
    }

    fn finish(&mut self, _rng: &mut SimRng) {
        for v in &mut self.voters {
            v.flush(None);
        }
    }

    fn save(&self) -> String {
        self.voters.iter().map(|v| v.table.to_text()).collect::<Vec<_>>().join("\n")
    }

    fn load(&mut self, text: &str) -> Result<()> {
        let mut chunks: Vec<String> = Vec::new();
        for line in text.lines() {
            if line.trim() == TABLE_HEADER || chunks.is_empty() {
                chunks.push(String::new());
            }
            let chunk = chunks.last_mut().expect("pushed above");
            chunk.push_str(line);
            chunk.push('\n');
        }
        if chunks.len() != self.voters.len() {
            return Err(Error::Incompatible(format!(
                "vote checkpoint holds {} tables, expected {}",
                chunks.len(),
                self.voters.len()
            )));
        }
        let n = self.voters.len();
        let tables = chunks.iter().map(|c| ValueTable::from_text(c)).collect::<Result<Vec<_>>>()?;
        if tables.iter().any(|t| t.actions() != n || t.width() != 1) {
            return Err(Error::Incompatible("vote table shape mismatch".into()));
        }
        for (v, t) in self.voters.iter_mut().zip(tables) {
            v.table = t;
        }
        Ok(())
    }
}

/// Stage flags for a mediator ablation name.
pub fn make_ablation(name: &str) -> Result<MediatorVariant> {
    match name.trim() {
        "naive" | "jamql-naive" => Ok(MediatorVariant::NAIVE),
        "pre-final" | "prefinal" | "jamql-prefinal" => Ok(MediatorVariant::PRE_FINAL),
        "full" | "jamql" => Ok(MediatorVariant::FULL),
        other => Err(Error::Config(format!("unknown mediator variant `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn obs<'a>(stage: usize, h: &'a [f64], keys: &'a [u64]) -> SelectionObs<'a> {
        SelectionObs { key: 0, history: h, stage, agent_keys: keys, features: None }
    }

    #[test]
    fn fixed_and_alternating() {
        let mut rng = SimRng::seed_from_u64(0);
        let h = [0.0; 4];
        let keys = [0; 4];
        let mut fixed = FixedSelector::new(0, 2).unwrap();
        assert_eq!(fixed.select(&obs(5, &h, &keys), &mut rng), 0);
        let mut alt = AlternatingSelector { agents: 2 };
        let seq: Vec<_> = (0..4).map(|s| alt.select(&obs(s, &h, &keys), &mut rng)).collect();
        assert_eq!(seq, vec![0, 1, 0, 1]);
        assert_eq!(AlternatingSelector::alternating_selector(2, 4), 2);
        assert!(FixedSelector::new(2, 2).is_err());
    }

    #[test]
    fn alternation_is_balanced() {
        for n in 2..6 {
            for stages in 0..20 {
                let mut counts = vec![0; n];
                for s in 0..stages {
                    counts[AlternatingSelector::alternating_selector(s, n)] += 1;
                }
                for c in counts {
                    assert!(c == stages / n || c == stages.div_ceil(n));
                }
            }
        }
    }

    #[test]
    fn plurality_rules() {
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(plurality(&[0, 0, 1], 3, &mut rng), 0);
        assert_eq!(plurality(&[1, 1, 1, 1], 4, &mut rng), 1);
        let trials = 10_000;
        let ones = (0..trials).filter(|_| plurality(&[0, 0, 1, 1], 4, &mut rng) == 1).count();
        let sigma = (trials as f64 * 0.25).sqrt();
        assert!((ones as f64 - trials as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn votes_are_one_per_agent() {
        let mut rng = SimRng::seed_from_u64(2);
        let mut sel = VoteSelector::new(4, 0.1, 0.9);
        sel.prepare(Turn::All, 0.5);
        for _ in 0..50 {
            sel.vote_and_elect(&[1, 2, 3, 4], &mut rng);
            assert_eq!(sel.last_votes.len(), 4);
        }
    }

    #[test]
    fn voters_learn_from_their_own_rewards() {
        let mut rng = SimRng::seed_from_u64(3);
        let mut sel = VoteSelector::new(2, 1.0, 0.9);
        sel.prepare(Turn::Agent(1), 0.0);
        sel.select(&obs(0, &[0.0, 0.0], &[7, 7]), &mut rng);
        sel.observe(&StepFeedback { rewards: &[1.0, 2.0], metric: &[1.0, 2.0] }, &mut rng);
        sel.finish(&mut rng);
        assert!(sel.voters[0].table.is_empty());
        assert_eq!(sel.voters[1].table.scalar(7, 0), 2.0);
    }

    #[test]
    fn ablations() {
        assert_eq!(make_ablation("naive").unwrap(), MediatorVariant { use_history: false, use_endgame: false });
        assert_eq!(make_ablation("pre-final").unwrap(), MediatorVariant { use_history: true, use_endgame: false });
        assert_eq!(make_ablation("full").unwrap(), MediatorVariant { use_history: true, use_endgame: true });
        assert!(matches!(make_ablation("greedy"), Err(Error::Config(_))));
    }
}
