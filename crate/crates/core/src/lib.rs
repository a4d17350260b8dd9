//! Mediated Stackelberg games with dynamic leaders.
//!
//! Self-interested Q-learning agents take turns leading while scripted
//! followers answer naively; a mediator picks the leader at every
//! selection stage to maximise a fairness measure over the agents'
//! returns. The crate also ships the comparison selectors, an exact
//! value-iteration solver for explicit models, a small DQN and an
//! experiment harness.

pub mod agent;
pub mod baselines;
pub mod env;
pub mod error;
pub mod fairness;
pub mod game;
pub mod harness;
pub mod learner;
pub mod mediator;
pub mod nn;
pub mod schedule;
pub mod solver;
pub mod table;

/// The single seedable generator type threaded through every run.
pub type SimRng = rand_chacha::ChaCha8Rng;

pub use error::{Error, Result};
pub use fairness::FairnessMeasure;
pub use game::{AgentId, Game, Transition};
