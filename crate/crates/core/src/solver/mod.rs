//! Exact solvers for explicit models: agent and mediator value iteration,
//! the turn-by-turn joint solver, an enumeration oracle and an
//! equilibrium check.

pub mod model;
pub mod oracle;
pub mod vi;

pub use model::{matrix_model, ExplicitModel, Outcome};
pub use oracle::{enumeration_oracle, OracleResult};
pub use vi::{
    agent_value_iteration, full_state_value_iteration, mediator_backup, mediator_value_iteration, sequential_jamvi,
    verify_mpe, JamviResult, MediatorSolution, MpeReport, Profile, SolverSettings,
};
