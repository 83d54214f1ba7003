//! Efficient Wardrop equilibria on finite directed graphs.
//!
//! The crate solves static and time-extended Beckmann problems, certifies
//! solutions through the constitutive relation `min{i, ∇H(i) − Du} = 0`, and
//! ships the closed-form and iterative solvers for the one-road and two-roads
//! dynamic congestion models.
//!
//! Everything here is allocation-based pure computation: the crate builds
//! without `std` (disable the default `std` feature) and leaves file formats,
//! logging and the command line to the `congestion` companion crate.
//!
//! Module map:
//!
//! * [`graph`]: graphs, paths, metrics, shortest distances, symmetrization.
//! * [`flow`]: path profiles, transport plans, edge flows, `div` and `D`.
//! * [`smirnov`]: flow decomposition and Wardrop certificates.
//! * [`beckmann`]: potentials, divergence constraints, Frank–Wolfe, KKT checks.
//! * [`dynamic`]: time-extended graphs and the dynamic Beckmann problem.
//! * [`roads`]: one-road obstacle problem and the two-roads model.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod beckmann;
pub mod dynamic;
pub mod flow;
pub mod graph;
pub mod roads;
pub mod smirnov;
mod transport;

pub use beckmann::{
    DivergenceConstraint, FrankWolfeOptions, FrankWolfeResult, KktReport, Potential,
};
pub use flow::{EdgeFlow, NodeFunction, NodeMeasure, PathProfile, TransportPlan};
pub use graph::{DirectedGraph, EdgeId, GraphError, Metric, NodeId, Path, Tolerances};

/// Solution kinds reported by iterative solvers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certification {
    /// Convex problem and a duality gap below tolerance: a global minimizer.
    Global,
    /// Non-convex objective: the point is stationary, not certified global.
    StationaryOnly,
    /// Iteration cap reached before the gap tolerance.
    NotConverged,
}
