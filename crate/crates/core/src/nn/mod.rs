//! Small dense networks trained with Adam, and DQN learners built on them.

pub mod adam;
pub mod checkpoint;
pub mod dqn;
pub mod net;
pub mod replay;

pub use adam::Adam;
pub use dqn::{DqnAgent, DqnCore, DqnMediator, Head};
pub use net::Mlp;
pub use replay::{ReplayBuffer, Sample};
