//! Trajectory optimization via multi-start sequential convex programming and
//! an exploration-focused operator-splitting variant.
//!
//! The crate is organized around a discrete-time optimal control problem with
//! nonconvex dynamics and constraints:
//!
//! - [`traj`] — problem definition, trajectory containers, linearization, and
//!   the penalized cost functions driving the prox-linear iteration.
//! - [`qp`] — the convex subproblem layer: slack reformulation of the 1-norm
//!   penalties into a quadratic program, an operator-splitting QP solver with
//!   active-set polishing, and the Euclidean projection onto the convexified
//!   constraint set.
//! - [`scp`] — multi-start standard SCP: independent prox-linear runs, one per
//!   initial guess.
//! - [`osscp`] — operator-splitting SCP: each guess becomes a consensus-ADMM
//!   agent; agents are driven toward a shared trajectory through a consensus
//!   projection and dual updates.
//! - [`scenarios`] — the two unicycle benchmark problems (plain obstacle
//!   avoidance and a Gaussian terrain-field variant) with their standard
//!   initial guesses.

pub mod osscp;
pub mod qp;
pub mod scenarios;
pub mod scp;
pub mod traj;

pub use osscp::{osscp_solve, AgentState, ConsensusState, OsscpConfig, OsscpResult};
pub use qp::{
    build_consensus_qp, build_scp_qp, project_onto_z, solve_qp, QuadraticProgram, SolveStatus,
    SubproblemSolution,
};
pub use scenarios::{build_scenario, GuessKind, Scenario, ScenarioOverrides, SCENARIO_NAMES};
pub use scp::{multi_start, scp_solve, ScpConfig, ScpRunRecord};
pub use traj::{
    linearize, penalized_linear_cost, true_penalized_cost, Dims, InequalityPenalty,
    LinearizedProblem, PenaltyWeights, ProblemDefinition, Trajectory,
};

use thiserror::Error;

/// Errors surfaced by problem construction, linearization, and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value produced by {what} at step {step}")]
    NonFinite { what: &'static str, step: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("QP subproblem failed at iteration {iteration}: {status:?}")]
    Subproblem {
        iteration: usize,
        status: qp::SolveStatus,
    },
    #[error("agent {agent} failed at iteration {iteration}: {source}")]
    Agent {
        agent: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("convexified constraint set is infeasible")]
    InfeasibleProjection,
    #[error("consensus projection failed {count} consecutive times; aborting")]
    ConsensusStalled { count: usize },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
