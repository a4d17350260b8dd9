//! Concrete games: iterated leader-controller matrix games and the
//! resource-collection gridworld.

pub mod matrix;
pub mod resource;

pub use matrix::{MatrixGameEnv, MatrixKind};
pub use resource::{Color, Orientation, RcAction, RcState, RcVariant, ResourceCollectionEnv};
