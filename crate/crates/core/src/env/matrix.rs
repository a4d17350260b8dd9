//! Iterated matrix games played in Stackelberg order: the selected leader
//! commits to an action and every follower answers with its naive response.
//!
//! The observed state of every agent is the step index within the episode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AgentId, Game, Transition};
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixKind {
    /// Actions: cooperate, defect. Followers mirror the leader.
    PrisonersDilemma,
    /// Actions: straight, swerve, brake.
    Chicken,
    /// Two players only. Actions: movie, ballet. The follower mirrors.
    BattleOfTheSexes,
}

impl MatrixKind {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "pd" | "prisoners_dilemma" | "prisoners-dilemma" => Ok(MatrixKind::PrisonersDilemma),
            "chicken" => Ok(MatrixKind::Chicken),
            "bos" | "battle_of_the_sexes" | "battle-of-the-sexes" => {
                Ok(MatrixKind::BattleOfTheSexes)
            }
            other => Err(Error::Config(format!("unknown matrix game `{other}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MatrixKind::PrisonersDilemma => "pd",
            MatrixKind::Chicken => "chicken",
            MatrixKind::BattleOfTheSexes => "bos",
        }
    }

    pub fn action_names(self) -> &'static [&'static str] {
        match self {
            MatrixKind::PrisonersDilemma => &["cooperate", "defect"],
            MatrixKind::Chicken => &["straight", "swerve", "brake"],
            MatrixKind::BattleOfTheSexes => &["movie", "ballet"],
        }
    }

    pub fn action_count(self) -> usize {
        self.action_names().len()
    }
}

pub mod pd {
    pub const COOPERATE: usize = 0;
    pub const DEFECT: usize = 1;
}

pub mod chicken {
    pub const STRAIGHT: usize = 0;
    pub const SWERVE: usize = 1;
    pub const BRAKE: usize = 2;
}

pub mod bos {
    pub const MOVIE: usize = 0;
    pub const BALLET: usize = 1;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixGameEnv {
    pub kind: MatrixKind,
    pub agents: usize,
    pub steps: usize,
}

impl MatrixGameEnv {
    pub fn new(kind: MatrixKind, agents: usize, steps: usize) -> Result<Self> {
        if agents < 2 {
            return Err(Error::Config("matrix games need at least two agents".into()));
        }
        if kind == MatrixKind::BattleOfTheSexes && agents != 2 {
            return Err(Error::Config("battle of the sexes is a two-player game".into()));
        }
        if steps == 0 {
            return Err(Error::Config("steps per episode must be at least 1".into()));
        }
        Ok(Self { kind, agents, steps })
    }

    pub fn chicken(agents: usize) -> Self {
        Self::new(MatrixKind::Chicken, agents, 4).expect("valid chicken parameters")
    }

    pub fn prisoners_dilemma(agents: usize) -> Self {
        Self::new(MatrixKind::PrisonersDilemma, agents, 4).expect("valid PD parameters")
    }

    pub fn battle_of_the_sexes(steps: usize) -> Self {
        Self::new(MatrixKind::BattleOfTheSexes, 2, steps).expect("valid BoS parameters")
    }

    /// Naive follower answer to `leader_action`.
    pub fn matrix_follower_response(&self, leader_action: usize) -> Result<usize> {
        let response = match self.kind {
            MatrixKind::PrisonersDilemma | MatrixKind::BattleOfTheSexes => leader_action,
            MatrixKind::Chicken => match leader_action {
                chicken::STRAIGHT => chicken::SWERVE,
                chicken::SWERVE => chicken::STRAIGHT,
                other => other,
            },
        };
        if leader_action >= self.kind.action_count() {
            return Err(Error::Usage(format!(
                "unknown {} action {leader_action}",
                self.kind.name()
            )));
        }
        Ok(response)
    }

    /// `(leader payoff, follower payoff)` for role-based games.
    fn role_payoffs(&self, leader_action: usize) -> (f64, f64) {
        match (self.kind, leader_action) {
            (MatrixKind::PrisonersDilemma, pd::COOPERATE) => (2.0, 1.0),
            (MatrixKind::PrisonersDilemma, _) => (3.0, -2.0),
            (MatrixKind::Chicken, chicken::STRAIGHT) => (7.0, 2.0),
            (MatrixKind::Chicken, chicken::SWERVE) => (2.0, 7.0),
            (MatrixKind::Chicken, _) => (6.0, 6.0),
            (MatrixKind::BattleOfTheSexes, _) => unreachable!("bos payoffs are profile based"),
        }
    }

    /// Reward vector when `leader` plays `leader_action`.
    pub fn payoff(&self, leader: AgentId, leader_action: usize) -> Vec<f64> {
        match self.kind {
            MatrixKind::BattleOfTheSexes => {
                // Row player X prefers the movie, column player Y the ballet;
                // mirrored play never produces a mismatch.
                if leader_action == bos::MOVIE {
                    vec![2.0, 1.0]
                } else {
                    vec![1.0, 2.0]
                }
            }
            _ => {
                let (lead, follow) = self.role_payoffs(leader_action);
                (0..self.agents)
                    .map(|i| if i == leader { lead } else { follow })
                    .collect()
            }
        }
    }

    /// Bimatrix entry for an arbitrary two-player profile (`x`, `y`).
    pub fn bos_profile_payoff(x: usize, y: usize) -> (f64, f64) {
        match (x, y) {
            (bos::MOVIE, bos::MOVIE) => (2.0, 1.0),
            (bos::BALLET, bos::BALLET) => (1.0, 2.0),
            _ => (0.0, 0.0),
        }
    }
}

impl Game for MatrixGameEnv {
    type State = usize;

    fn agent_count(&self) -> usize {
        self.agents
    }

    fn initial_state(&self, _rng: &mut SimRng) -> usize {
        0
    }

    fn leader_action_count(&self, _state: &usize, _leader: AgentId) -> usize {
        self.kind.action_count()
    }

    fn follower_response(&self, _state: &usize, leader: AgentId, leader_action: usize) -> Result<Vec<usize>> {
        let answer = self.matrix_follower_response(leader_action)?;
        Ok((0..self.agents)
            .map(|i| if i == leader { leader_action } else { answer })
            .collect())
    }

    fn step(&self, state: &usize, leader: AgentId, leader_action: usize, _rng: &mut SimRng) -> Result<Transition<usize>> {
        let joint_action = self.follower_response(state, leader, leader_action)?;
        let rewards = self.payoff(leader, leader_action);
        Ok(Transition {
            joint_action,
            metric_rewards: rewards.clone(),
            rewards,
            transfer: None,
            next: state + 1,
        })
    }

    fn is_terminal(&self, state: &usize) -> bool {
        *state >= self.steps
    }

    fn agent_key(&self, state: &usize, _agent: AgentId) -> u64 {
        *state as u64
    }

    fn mediator_key(&self, state: &usize) -> u64 {
        *state as u64
    }

    fn agent_features(&self, state: &usize, _agent: AgentId) -> Vec<f64> {
        let mut v = vec![0.0; self.steps];
        if *state < self.steps {
            v[*state] = 1.0;
        }
        v
    }

    fn mediator_features(&self, state: &usize) -> Vec<f64> {
        self.agent_features(state, 0)
    }

    fn leader_alternatives(&self, _state: &usize, leader: AgentId) -> Vec<Vec<f64>> {
        (0..self.kind.action_count())
            .map(|a| self.payoff(leader, a))
            .collect()
    }

    fn max_steps(&self) -> usize {
        self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::joint_step;
    use rand::SeedableRng;

    fn rng() -> SimRng {
        SimRng::seed_from_u64(0)
    }

    #[test]
    fn payoff_tables_are_exact() {
        let pd = MatrixGameEnv::prisoners_dilemma(2);
        assert_eq!(pd.payoff(0, pd::COOPERATE), vec![2.0, 1.0]);
        assert_eq!(pd.payoff(0, pd::DEFECT), vec![3.0, -2.0]);
        assert_eq!(pd.payoff(1, pd::DEFECT), vec![-2.0, 3.0]);

        let ch = MatrixGameEnv::chicken(2);
        assert_eq!(ch.payoff(0, chicken::STRAIGHT), vec![7.0, 2.0]);
        assert_eq!(ch.payoff(0, chicken::SWERVE), vec![2.0, 7.0]);
        assert_eq!(ch.payoff(1, chicken::BRAKE), vec![6.0, 6.0]);

        assert_eq!(MatrixGameEnv::bos_profile_payoff(bos::MOVIE, bos::MOVIE), (2.0, 1.0));
        assert_eq!(MatrixGameEnv::bos_profile_payoff(bos::BALLET, bos::BALLET), (1.0, 2.0));
        assert_eq!(MatrixGameEnv::bos_profile_payoff(bos::MOVIE, bos::BALLET), (0.0, 0.0));
        assert_eq!(MatrixGameEnv::bos_profile_payoff(bos::BALLET, bos::MOVIE), (0.0, 0.0));
    }

    #[test]
    fn every_follower_gets_the_follower_payoff() {
        for kind in [MatrixKind::PrisonersDilemma, MatrixKind::Chicken] {
            let env = MatrixGameEnv::new(kind, 4, 4).unwrap();
            for leader in 0..4 {
                for a in 0..kind.action_count() {
                    let r = env.payoff(leader, a);
                    let (lead, follow) = env.role_payoffs(a);
                    for (i, v) in r.iter().enumerate() {
                        assert_eq!(*v, if i == leader { lead } else { follow });
                    }
                }
            }
        }
    }

    #[test]
    fn naive_responses() {
        let pd = MatrixGameEnv::prisoners_dilemma(4);
        assert_eq!(
            pd.follower_response(&0, 1, pd::DEFECT).unwrap(),
            vec![pd::DEFECT; 4]
        );
        let ch = MatrixGameEnv::chicken(2);
        assert_eq!(ch.matrix_follower_response(chicken::SWERVE).unwrap(), chicken::STRAIGHT);
        assert_eq!(ch.matrix_follower_response(chicken::STRAIGHT).unwrap(), chicken::SWERVE);
        assert_eq!(ch.matrix_follower_response(chicken::BRAKE).unwrap(), chicken::BRAKE);
        assert!(matches!(ch.matrix_follower_response(7), Err(Error::Usage(_))));
    }

    #[test]
    fn joint_steps_follow_the_tables() {
        let mut rng = rng();
        let pd = MatrixGameEnv::prisoners_dilemma(2);
        let tr = joint_step(&pd, &0, 0, pd::COOPERATE, &mut rng).unwrap();
        assert_eq!(tr.joint_action, vec![pd::COOPERATE, pd::COOPERATE]);
        assert_eq!(tr.rewards, vec![2.0, 1.0]);
        assert_eq!(tr.next, 1);

        let ch = MatrixGameEnv::chicken(2);
        let tr = joint_step(&ch, &0, 0, chicken::STRAIGHT, &mut rng).unwrap();
        assert_eq!(tr.joint_action, vec![chicken::STRAIGHT, chicken::SWERVE]);
        assert_eq!(tr.rewards, vec![7.0, 2.0]);
        let tr = joint_step(&ch, &0, 0, chicken::BRAKE, &mut rng).unwrap();
        assert_eq!(tr.joint_action, vec![chicken::BRAKE, chicken::BRAKE]);
        assert_eq!(tr.rewards, vec![6.0, 6.0]);

        assert!(matches!(joint_step(&ch, &4, 0, 0, &mut rng), Err(Error::Usage(_))));
        assert!(matches!(joint_step(&ch, &0, 2, 0, &mut rng), Err(Error::Usage(_))));
        assert!(matches!(joint_step(&ch, &0, 0, 3, &mut rng), Err(Error::Usage(_))));
    }

    #[test]
    fn construction_guards() {
        assert!(MatrixGameEnv::new(MatrixKind::BattleOfTheSexes, 4, 2).is_err());
        assert!(MatrixGameEnv::new(MatrixKind::Chicken, 1, 4).is_err());
        assert!(MatrixGameEnv::new(MatrixKind::Chicken, 2, 0).is_err());
        assert_eq!(MatrixKind::parse("PD").unwrap(), MatrixKind::PrisonersDilemma);
        assert!(MatrixKind::parse("go").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// Cumulative payoffs when the leader of each round plays its own
        /// favourite and the follower mirrors it.
        fn bos_totals(leaders: &[AgentId]) -> [f64; 2] {
            let env = MatrixGameEnv::battle_of_the_sexes(leaders.len());
            let mut total = [0.0; 2];
            for &l in leaders {
                let best = (0..2)
                    .max_by(|a, b| env.payoff(l, *a)[l].total_cmp(&env.payoff(l, *b)[l]))
                    .unwrap();
                let r = env.payoff(l, best);
                total[0] += r[0];
                total[1] += r[1];
            }
            total
        }

        proptest! {
            #[test]
            fn alternation_maximises_the_worse_total(half in 1usize..6) {
                let horizon = 2 * half;
                let alternating: Vec<AgentId> = (0..horizon).map(|t| t % 2).collect();
                let ours = bos_totals(&alternating);
                let best = (0u32..1 << horizon)
                    .map(|mask| {
                        let seq: Vec<AgentId> = (0..horizon).map(|t| ((mask >> t) & 1) as usize).collect();
                        let t = bos_totals(&seq);
                        t[0].min(t[1])
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(ours[0].min(ours[1]), best);
            }

            #[test]
            fn next_state_ignores_who_follows(
                kind in prop::sample::select(vec![MatrixKind::PrisonersDilemma, MatrixKind::Chicken]),
                agents in 2usize..5,
                plays in prop::collection::vec((0usize..8, 0usize..3), 1..6),
            ) {
                let env = MatrixGameEnv::new(kind, agents, plays.len()).unwrap();
                let mut rng = rng();
                let mut state = 0;
                for (leader, action) in plays {
                    let tr = joint_step(&env, &state, leader % agents, action % kind.action_count(), &mut rng).unwrap();
                    prop_assert_eq!(tr.next, state + 1);
                    state = tr.next;
                }
                prop_assert!(env.is_terminal(&state));
            }
        }
    }
}
