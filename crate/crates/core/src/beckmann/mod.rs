//! The Beckmann problem `min H(i)` subject to `i ≥ 0`, `div i ∈ M`.
//!
//! [`solve_beckmann_frank_wolfe`] minimizes over flows with an exact
//! all-or-nothing linear oracle; [`kkt_residual`], [`multiplier_recover`] and
//! [`support_bound_report`] certify a candidate through the constitutive
//! relation `min{i, ∇H(i) − Du} = 0`.

mod constraint;
mod frank_wolfe;
mod kkt;
mod potential;

pub use constraint::DivergenceConstraint;
pub use frank_wolfe::{
    solve_beckmann_frank_wolfe, FrankWolfeOptions, FrankWolfeResult, FrankWolfeVariant,
};
pub use kkt::{
    constraint_multiplier, kkt_residual, multiplier_recover, support_bound_report, KktReport,
    MultiplierOutcome, SupportBoundReport,
};
pub use potential::{
    legendre_flow, potential_gradient, LocalSeparable, Potential, QuadraticForm,
    TimeExtendedPotential,
};

use crate::flow::FlowError;
use crate::graph::GraphError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BeckmannError {
    #[error("expected {expected} entries, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid potential: {0}")]
    InvalidPotential(&'static str),
    #[error("invalid divergence constraint: {0}")]
    InvalidConstraint(&'static str),
    #[error("gradient {value} on edge {edge} is negative; the cost model requires ∇H ≥ 0")]
    ModelViolation { edge: usize, value: f64 },
    #[error("value {value} on edge {edge} is outside the range of its marginal cost")]
    LegendreDomain { edge: usize, value: f64 },
    #[error("no feasible flow: {0}")]
    Infeasible(&'static str),
    #[error("linear subproblem failed: {0}")]
    Oracle(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}
