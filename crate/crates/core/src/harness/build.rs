//! Turns a [`RunConfig`] into a ready-to-run trainer.

use rand::SeedableRng;

use crate::agent::AgentLearner;
use crate::baselines::{AlternatingSelector, FixedSelector, VoteSelector};
use crate::env::{MatrixGameEnv, ResourceCollectionEnv};
use crate::error::{Error, Result};
use crate::game::Game;
use crate::harness::config::{EnvConfig, LearnerKind, RunConfig, SelectorConfig};
use crate::harness::runner::{EpisodeRecord, Trainer};
use crate::learner::{LeaderPolicy, Selector};
use crate::mediator::{EndGameStage, MediatorLearner, ThresholdSelector, TransferRule};
use crate::nn::{DqnAgent, DqnMediator};
use crate::SimRng;

/// Training stream for `seed`.
pub fn train_rng(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Evaluation stream for `seed`, independent of training.
pub fn eval_rng(seed: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn init_rng(seed: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

pub type MatrixTrainer = Trainer<EndGameStage<MatrixGameEnv>>;
pub type ResourceTrainer = Trainer<EndGameStage<ResourceCollectionEnv>>;

/// A trainer over either family of games.
pub enum AnyTrainer {
    Matrix(MatrixTrainer),
    Resource(ResourceTrainer),
}

macro_rules! dispatch {
    ($self:expr, $t:ident => $body:expr) => {
        match $self {
            AnyTrainer::Matrix($t) => $body,
            AnyTrainer::Resource($t) => $body,
        }
    };
}

impl AnyTrainer {
    pub fn agent_count(&self) -> usize {
        dispatch!(self, t => t.game.agent_count())
    }

    pub fn run_episode(&mut self, episode: u64, rng: &mut SimRng) -> Result<EpisodeRecord> {
        dispatch!(self, t => {
            let turn = t.turn_for(episode);
            let eps = t.epsilon.at(episode);
            t.run_episode(episode, turn, eps, rng)
        })
    }

    pub fn evaluate(&mut self, episodes: u64, rng: &mut SimRng) -> Result<Vec<EpisodeRecord>> {
        dispatch!(self, t => t.evaluate(episodes, rng))
    }

    pub fn snapshot(&self) -> Vec<String> {
        dispatch!(self, t => t.snapshot())
    }

    /// Loads learner state saved by [`AnyTrainer::snapshot`].
    pub fn restore(&mut self, parts: &[String]) -> Result<()> {
        dispatch!(self, t => {
            if parts.len() != t.agents.len() + 1 {
                return Err(Error::Incompatible(format!(
                    "checkpoint holds {} learners, run has {}",
                    parts.len(),
                    t.agents.len() + 1
                )));
            }
            for (agent, text) in t.agents.iter_mut().zip(parts) {
                agent.load(text)?;
            }
            t.selector.load(&parts[parts.len() - 1])
        })
    }

    pub fn selector_name(&self) -> String {
        dispatch!(self, t => t.selector.name())
    }
}

fn build_selector(cfg: &RunConfig, mediator_width: usize, rng: &mut SimRng) -> Result<Box<dyn Selector>> {
    let n = cfg.env.agents();
    Ok(match cfg.selector {
        SelectorConfig::Fixed(leader) => Box::new(FixedSelector::new(leader, n)?),
        SelectorConfig::Alternating => Box::new(AlternatingSelector { agents: n }),
        SelectorConfig::Vote => Box::new(VoteSelector::new(n, cfg.alpha, cfg.gamma_agents)),
        SelectorConfig::Threshold => Box::new(ThresholdSelector::new(n)?),
        SelectorConfig::Mediator(variant) => match cfg.learner {
            LearnerKind::Tabular => {
                let m = MediatorLearner::new(n, cfg.fairness.clone(), cfg.alpha, cfg.gamma_mediator, variant);
                Box::new(m)
            }
            LearnerKind::Dqn => Box::new(DqnMediator::new(
                mediator_width,
                n,
                cfg.fairness.clone(),
                cfg.gamma_mediator,
                variant,
                &cfg.dqn,
                rng,
            )),
        },
    })
}

fn assemble<G: Game>(cfg: &RunConfig, env: G, seed: u64, endgame: bool) -> Result<Trainer<EndGameStage<G>>> {
    let rule = endgame.then(|| TransferRule::new(cfg.fairness.clone(), cfg.endgame_ideal));
    let game = EndGameStage::new(env, rule).with_view(cfg.agent_view);
    let mut rng = init_rng(seed);
    let probe = game.initial_state(&mut rng);
    let n = game.agent_count();
    let mut agents: Vec<Box<dyn LeaderPolicy>> = Vec::with_capacity(n);
    for i in 0..n {
        let actions = game.leader_action_count(&probe, i);
        agents.push(match cfg.learner {
            LearnerKind::Tabular => {
                let mut a = AgentLearner::new(i, actions, cfg.alpha, cfg.gamma_agents);
                a.tie_break = cfg.tie_break;
                Box::new(a)
            }
            LearnerKind::Dqn => {
                let width = game.agent_features(&probe, i).len();
                Box::new(DqnAgent::new(width, actions, cfg.gamma_agents, &cfg.dqn, &mut rng))
            }
        });
    }
    let mediator_width = game.mediator_features(&probe).len();
    let selector = build_selector(cfg, mediator_width, &mut rng)?;
    Ok(Trainer::new(game, agents, selector, cfg.schedule, cfg.epsilon()))
}

/// Builds the trainer for one seeded run.
pub fn build_trainer(cfg: &RunConfig, seed: u64) -> Result<AnyTrainer> {
    build_trainer_with(cfg, seed, cfg.selector.use_endgame())
}

/// As [`build_trainer`], with the end-of-game transfer switched explicitly.
pub fn build_trainer_with(cfg: &RunConfig, seed: u64, endgame: bool) -> Result<AnyTrainer> {
    cfg.validate()?;
    match &cfg.env {
        EnvConfig::Matrix { kind, agents, steps } => {
            let env = MatrixGameEnv::new(*kind, *agents, *steps)?;
            Ok(AnyTrainer::Matrix(assemble(cfg, env, seed, endgame)?))
        }
        EnvConfig::Resource { .. } => {
            let env = cfg.resource_env().expect("resource config")?;
            Ok(AnyTrainer::Resource(assemble(cfg, env, seed, endgame)?))
        }
    }
}
