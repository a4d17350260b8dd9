//! Chicken-2 under the history-threshold mediator, with and without the
//! end-of-game transfer: how agent A leads at each step late in training.

use std::fmt::Write as _;

use crate::env::{MatrixKind, MatrixGameEnv};
use crate::error::{Error, Result};
use crate::harness::build::{build_trainer_with, train_rng};
use crate::harness::config::{EnvConfig, RunConfig, SelectorConfig};
use crate::harness::runner::Schedule;

pub const ENDGAME_EPISODES: u64 = 50_000;
pub const ENDGAME_WINDOW: u64 = 1000;

/// Agent A's leader actions, counted per step of the episode.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionHistogram {
    pub endgame: bool,
    /// `counts[step][action]`.
    pub counts: Vec<Vec<u64>>,
}

impl ActionHistogram {
    /// Share of `action` among A's leader actions at `step` (0-based);
    /// `None` if A never led there.
    pub fn frequency(&self, step: usize, action: usize) -> Option<f64> {
        let row = &self.counts[step];
        let total: u64 = row.iter().sum();
        (total > 0).then(|| row[action] as f64 / total as f64)
    }

    pub fn to_table(&self) -> String {
        let names = MatrixKind::Chicken.action_names();
        let mut out = format!("step,{},leads\n", names.join(","));
        for (t, _) in self.counts.iter().enumerate() {
            write!(out, "{}", t + 1).unwrap();
            for a in 0..names.len() {
                match self.frequency(t, a) {
                    Some(f) => write!(out, ",{f:.3}").unwrap(),
                    None => out.push_str(",-"),
                }
            }
            writeln!(out, ",{}", self.counts[t].iter().sum::<u64>()).unwrap();
        }
        out
    }
}

/// The experiment's configuration: Chicken-2, threshold mediator,
/// both agents learning every episode.
pub fn endgame_config(episodes: u64) -> RunConfig {
    RunConfig {
        env: EnvConfig::Matrix { kind: MatrixKind::Chicken, agents: 2, steps: 4 },
        selector: SelectorConfig::Threshold,
        episodes,
        schedule: Schedule::Simultaneous,
        eval_every: 0,
        ..RunConfig::default()
    }
}

/// Trains with or without the transfer and histograms agent A's leader
/// actions over the last `window` episodes.
pub fn reproduce_endgame_experiment(cfg: &RunConfig, endgame: bool, seed: u64, window: u64) -> Result<ActionHistogram> {
    if cfg.episodes == 0 {
        return Err(Error::Usage("the end-game experiment needs at least one episode".into()));
    }
    let EnvConfig::Matrix { kind: MatrixKind::Chicken, agents: 2, steps } = cfg.env else {
        return Err(Error::Config("the end-game experiment runs on two-player chicken".into()));
    };
    if cfg.selector != SelectorConfig::Threshold {
        return Err(Error::Config("the end-game experiment uses the threshold selector".into()));
    }
    MatrixGameEnv::new(MatrixKind::Chicken, 2, steps)?;
    let mut trainer = build_trainer_with(cfg, seed, endgame)?;
    let mut rng = train_rng(seed);
    let mut counts = vec![vec![0u64; MatrixKind::Chicken.action_count()]; steps];
    let from = cfg.episodes.saturating_sub(window);
    for e in 0..cfg.episodes {
        let record = trainer.run_episode(e, &mut rng)?;
        if e >= from {
            for (t, (leader, action)) in record.step_leaders.iter().zip(&record.actions).enumerate() {
                if *leader == 0 {
                    counts[t][*action] += 1;
                }
            }
        }
    }
    Ok(ActionHistogram { endgame, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_episodes_is_a_usage_error() {
        let cfg = endgame_config(0);
        assert!(matches!(reproduce_endgame_experiment(&cfg, true, 0, 10), Err(Error::Usage(_))));
    }

    #[test]
    fn wrong_game_is_refused() {
        let mut cfg = endgame_config(10);
        cfg.env = EnvConfig::Matrix { kind: MatrixKind::PrisonersDilemma, agents: 2, steps: 4 };
        assert!(matches!(reproduce_endgame_experiment(&cfg, true, 0, 10), Err(Error::Config(_))));
    }

    #[test]
    fn histogram_counts_the_window() {
        let cfg = endgame_config(50);
        let h = reproduce_endgame_experiment(&cfg, false, 0, 20).unwrap();
        let total: u64 = h.counts.iter().flatten().sum();
        assert!(total > 0 && total <= 80);
        assert_eq!(h.to_table().lines().count(), 5);
    }
}
