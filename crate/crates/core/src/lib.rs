//! Perfect Bayesian equilibria of the misbehavior-inspection signaling game.
//!
//! A population of travelers of two priority types (`h`, `l`) is routed to two
//! parallel servers (`H`, `L`). Travelers may misreport their type to reach
//! the other server; the operator observes only the server and decides whether
//! to inspect. This crate holds the pure numerical core:
//!
//! * [`cost`]: congestion costs (an M/M/1 instantiation is built in), the
//!   incentive function `Δc` and its inverse, and assumption checks.
//! * [`game`]: parameters, expected utilities, Bayes beliefs and the full
//!   equilibrium-condition checker.
//! * [`equilibrium`]: the closed-form solver, regime classification and
//!   comparative-statics sweeps.
//! * [`verification`]: independent oracles (grid search, best-response
//!   dynamics, queue simulation).
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cost;
pub mod equilibrium;
pub mod game;
mod num;
pub mod verification;

pub use cost::{
    check_assumptions, cost_high, cost_low, delta_c, inverse_delta_c, AssumptionReport, CostError,
    CostModel, DeltaC, MisbehaviorStrategy, Mm1Cost, Mm1CostParams, ServerCost, TrafficEnvironment,
};
pub use equilibrium::{
    classify_regime, misbehavior_threshold, operator_best_response, solve_pbe, BoundaryDetail,
    Classification, Derived, Equilibrium, InspectionResponse, Regime, SolveError, Solver,
    SolverTolerances, Threshold,
};
pub use game::{
    agent_utilities, bayes_update, check_pbe, operator_utilities, AgentUtilities, Belief,
    Condition, GameParams, OperatorStrategy, PbeReport, StrategyProfile, Utility,
};

/// Error raised when a constructor receives a value outside its domain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field} = {value} is invalid: expected {expected}")]
pub struct ParamError {
    pub field: &'static str,
    pub value: f64,
    pub expected: &'static str,
}

impl ParamError {
    pub(crate) fn new(field: &'static str, value: f64, expected: &'static str) -> Self {
        Self {
            field,
            value,
            expected,
        }
    }
}
