//! One-road and two-roads dynamic congestion.
//!
//! The one-road model lives on `a → a` (waiting) and `a → b` (leaving);
//! `j(t) = i(a, a, t)` is the mass still waiting at time `t`. With the cost
//! `½ i_ab² + β/2 i_aa² + ε i_aa` it solves the obstacle problem
//! `min{j, −Δj + βj + ε} = 0`, `j(0) = m`, `j(T) = 0`.
//!
//! The two-roads model couples two such roads through `γ i_{a₁b₁} i_{a₂b₂}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::beckmann::{BeckmannError, Potential};
use crate::dynamic::TimeExtendedGraph;
use crate::flow::{EdgeFlow, NodeFunction};
use crate::graph::{DirectedGraph, EdgeId, NodeId};

/// Sign tolerance for `J_{T+1}(T) < 0` when scanning for `T₀`.
pub const T0_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoadsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(&'static str),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Beckmann(#[from] BeckmannError),
}

fn check_params(beta: f64, eps: f64) -> Result<(), RoadsError> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "beta must be finite and nonnegative",
        ));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "epsilon must be finite and nonnegative",
        ));
    }
    Ok(())
}

/// Stock of undelivered mass on `{0, …, T}`.
///
/// [`RoadTrajectory::new`] enforces `j(T) = 0`, `j ≥ 0` and `D⁻j ≤ 0`; the
/// free solution [`free_solution_j`] may break the sign constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct RoadTrajectory(Vec<f64>);

impl RoadTrajectory {
    pub fn new(values: Vec<f64>) -> Result<Self, RoadsError> {
        let traj = RoadTrajectory::unchecked(values)?;
        if *traj.0.last().unwrap() != 0.0 {
            return Err(RoadsError::InvalidTrajectory("j(T) must be 0"));
        }
        if traj.0.iter().any(|&v| v < 0.0) {
            return Err(RoadsError::InvalidTrajectory("j must be nonnegative"));
        }
        if !traj.is_monotone(0.0) {
            return Err(RoadsError::InvalidTrajectory("j must be non-increasing"));
        }
        Ok(traj)
    }

    fn unchecked(values: Vec<f64>) -> Result<Self, RoadsError> {
        if values.len() < 2 {
            return Err(RoadsError::InvalidTrajectory(
                "need at least the two boundary values",
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RoadsError::InvalidTrajectory("non-finite value"));
        }
        Ok(RoadTrajectory(values))
    }

    /// `j ≡ m` on `{0, …, T−1}` and `j(T) = 0`.
    pub fn step(horizon: usize, mass: f64) -> Result<Self, RoadsError> {
        if horizon == 0 {
            return Err(RoadsError::InvalidParameter("horizon must be at least 1"));
        }
        let mut v = vec![mass; horizon + 1];
        v[horizon] = 0.0;
        RoadTrajectory::new(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn horizon(&self) -> usize {
        self.0.len() - 1
    }

    pub fn mass(&self) -> f64 {
        self.0[0]
    }

    /// `D⁻j(t) = j(t) − j(t−1)` for `t ≥ 1`.
    pub fn backward_difference(&self, t: usize) -> f64 {
        self.0[t] - self.0[t - 1]
    }

    /// `Δj(t) = j(t+1) − 2j(t) + j(t−1)` for interior `t`.
    pub fn laplacian(&self, t: usize) -> f64 {
        self.0[t + 1] - 2.0 * self.0[t] + self.0[t - 1]
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.0.windows(2).all(|w| w[1] - w[0] <= slack)
    }

    pub fn is_nonnegative(&self, slack: f64) -> bool {
        self.0.iter().all(|&v| v >= -slack)
    }

    /// Last time with `j > threshold`, plus one: the first time the road is empty.
    pub fn emptying_time(&self, threshold: f64) -> usize {
        self.0
            .iter()
            .rposition(|&v| v > threshold)
            .map_or(0, |t| t + 1)
    }

    pub fn max_abs_difference(&self, other: &RoadTrajectory) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

/// A multiplier on the half integers `{1/2, …, T − 1/2}`; entry `s` is `α(s + 1/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfIntegerMultiplier(Vec<f64>);

impl HalfIntegerMultiplier {
    pub fn new(values: Vec<f64>) -> Result<Self, RoadsError> {
        if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(RoadsError::InvalidParameter(
                "multiplier must be finite and nonnegative",
            ));
        }
        Ok(HalfIntegerMultiplier(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// `Dα(t) = α(t + 1/2) − α(t − 1/2)` for `t ∈ {1, …, T−1}`.
    pub fn difference(&self, t: usize) -> f64 {
        self.0[t] - self.0[t - 1]
    }
}

fn ratio(beta: f64) -> f64 {
    let rho = 1.0 + beta / 2.0;
    rho + libm::sqrt(rho * rho - 1.0)
}

fn free_value(horizon: usize, beta: f64, eps: f64, t: usize) -> f64 {
    let big_t = horizon as f64;
    let t = t as f64;
    if beta == 0.0 {
        return 1.0 - (1.0 + eps * big_t * big_t / 2.0) * (t / big_t) + eps * t * t / 2.0;
    }
    let r = ratio(beta);
    let c = eps / beta;
    let p = |x: f64| libm::pow(r, x);
    let den = p(big_t) - p(-big_t);
    (1.0 + c) * (p(big_t - t) - p(t - big_t)) / den + c * (p(t) - p(-t)) / den - c
}

/// Solution `J_T` of `−ΔJ + βJ + ε = 0`, `J(0) = 1`, `J(T) = 0`, without
/// the sign constraint.
pub fn free_solution_j(horizon: usize, beta: f64, eps: f64) -> Result<RoadTrajectory, RoadsError> {
    check_params(beta, eps)?;
    if horizon == 0 {
        return Err(RoadsError::InvalidParameter("horizon must be at least 1"));
    }
    let mut v: Vec<f64> = (0..=horizon)
        .map(|t| free_value(horizon, beta, eps, t))
        .collect();
    v[0] = 1.0;
    v[horizon] = 0.0;
    RoadTrajectory::unchecked(v)
}

/// `T₀ = min{T ≥ 1 : J_{T+1}(T) < 0}`, the time the one-road empties when the
/// horizon is long enough. `None` for `ε = 0`, where the road never empties early.
pub fn compute_t0(beta: f64, eps: f64) -> Result<Option<usize>, RoadsError> {
    check_params(beta, eps)?;
    if eps == 0.0 {
        return Ok(None);
    }
    let mut t = 1;
    while free_value(t + 1, beta, eps, t) >= -T0_TOLERANCE {
        t += 1;
    }
    Ok(Some(t))
}

/// `f_β(x) = (r^{x+1} − r^{−(x+1)} − r^x + r^{−x}) / (r − r^{−1})`.
fn f_beta(r: f64, x: f64) -> f64 {
    let p = |y: f64| libm::pow(r, y);
    (p(x + 1.0) - p(-(x + 1.0)) - p(x) + p(-x)) / (r - 1.0 / r)
}

/// `T₀ = ⌊f_β⁻¹(1 + β/ε)⌋ + 1` for `β > 0`, `ε > 0`, with `f_β` inverted by bisection.
pub fn compute_t0_by_inverse(beta: f64, eps: f64) -> Result<Option<usize>, RoadsError> {
    check_params(beta, eps)?;
    if beta == 0.0 {
        return Err(RoadsError::InvalidParameter(
            "the inverse formula needs beta > 0",
        ));
    }
    if eps == 0.0 {
        return Ok(None);
    }
    let r = ratio(beta);
    let target = 1.0 + beta / eps;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f_beta(r, hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_beta(r, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // An integral root is a tie `J_{T+1}(T) = 0`, which does not count as negative.
    let nearest = libm::round(lo);
    if libm::fabs(lo - nearest) < 1e-9 {
        return Ok(Some(nearest as usize + 1));
    }
    Ok(Some(libm::floor(lo) as usize + 1))
}

/// Unit-mass one-road solution `J_{min{T,T₀}}` extended by zero.
pub fn one_road_solve(horizon: usize, beta: f64, eps: f64) -> Result<RoadTrajectory, RoadsError> {
    check_params(beta, eps)?;
    if horizon == 0 {
        return Err(RoadsError::InvalidParameter("horizon must be at least 1"));
    }
    let active = compute_t0(beta, eps)?.map_or(horizon, |t0| t0.min(horizon));
    let mut v = vec![0.0; horizon + 1];
    let free = free_solution_j(active, beta, eps)?;
    v[..=active].copy_from_slice(free.values());
    // The truncated closed form is nonnegative up to rounding.
    for x in &mut v {
        *x = x.max(0.0);
    }
    RoadTrajectory::new(v)
}

/// One-road solution with initial mass `m`: `m` times the unit solution for `ε/m`.
pub fn one_road_solve_mass(
    horizon: usize,
    beta: f64,
    eps: f64,
    mass: f64,
) -> Result<RoadTrajectory, RoadsError> {
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "mass must be finite and nonnegative",
        ));
    }
    if mass == 0.0 {
        return RoadTrajectory::new(vec![0.0; horizon + 1]);
    }
    let unit = one_road_solve(horizon, beta, eps / mass)?;
    RoadTrajectory::new(unit.into_values().into_iter().map(|v| v * mass).collect())
}

/// `max_t |min{j(t), −Δj(t) + βj(t) + ε}|` over interior times.
pub fn obstacle_residual(j: &RoadTrajectory, beta: f64, eps: f64) -> f64 {
    (1..j.horizon())
        .map(|t| libm::fabs(j.values()[t].min(-j.laplacian(t) + beta * j.values()[t] + eps)))
        .fold(0.0, f64::max)
}

const OBSTACLE_RESIDUAL: f64 = 1e-12;
const OBSTACLE_MAX_SWEEPS: usize = 1_000_000;

/// Projected Gauss–Seidel for the unit-mass obstacle problem.
pub fn one_road_obstacle_solve(
    horizon: usize,
    beta: f64,
    eps: f64,
) -> Result<RoadTrajectory, RoadsError> {
    one_road_obstacle_solve_mass(horizon, beta, eps, 1.0)
}

/// Projected Gauss–Seidel for `min{j, −Δj + βj + ε} = 0`, `j(0) = m`, `j(T) = 0`.
pub fn one_road_obstacle_solve_mass(
    horizon: usize,
    beta: f64,
    eps: f64,
    mass: f64,
) -> Result<RoadTrajectory, RoadsError> {
    check_params(beta, eps)?;
    if !(mass >= 0.0 && mass.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "mass must be finite and nonnegative",
        ));
    }
    let mut j = RoadTrajectory::step(horizon, mass)?;
    let mut residual = obstacle_residual(&j, beta, eps);
    let mut sweeps = 0;
    while residual > OBSTACLE_RESIDUAL {
        if sweeps == OBSTACLE_MAX_SWEEPS {
            return Err(RoadsError::NotConverged {
                iterations: sweeps,
                residual,
            });
        }
        let v = &mut j.0;
        for t in 1..horizon {
            v[t] = ((v[t - 1] + v[t + 1] - eps) / (2.0 + beta)).max(0.0);
        }
        sweeps += 1;
        residual = obstacle_residual(&j, beta, eps);
    }
    Ok(j)
}

/// `N = {a, b}`, `E = {(a, a), (a, b)}`.
pub fn one_road_graph() -> DirectedGraph {
    DirectedGraph::from_named(&["a", "b"], &[("a", "a"), ("a", "b")]).expect("fixed topology")
}

pub const WAIT_EDGE: EdgeId = EdgeId(0);
pub const LEAVE_EDGE: EdgeId = EdgeId(1);

/// `½ i_ab² + β/2 i_aa² + ε i_aa + c i_ab`. The linear term `c` does not
/// change solutions (all mass crosses `a → b` exactly once) but makes the
/// marginal cost bounded away from zero.
pub fn one_road_potential(beta: f64, eps: f64, linear: f64) -> Result<Potential, RoadsError> {
    check_params(beta, eps)?;
    if !(linear >= 0.0 && linear.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "linear cost must be finite and nonnegative",
        ));
    }
    let mut q = vec![(LEAVE_EDGE.0, LEAVE_EDGE.0, 1.0)];
    if beta > 0.0 {
        q.push((WAIT_EDGE.0, WAIT_EDGE.0, beta));
    }
    Ok(Potential::quadratic(2, &q, vec![eps, linear])?)
}

fn check_extension(teg: &TimeExtendedGraph, j: &RoadTrajectory) -> Result<(), RoadsError> {
    if teg.base().node_count() != 2 || teg.base().edge_count() != 2 || !teg.has_deposit() {
        return Err(RoadsError::InvalidParameter(
            "expected the one-road deposit graph",
        ));
    }
    if teg.horizon() != j.horizon() {
        return Err(RoadsError::InvalidParameter(
            "trajectory and graph horizons differ",
        ));
    }
    Ok(())
}

/// The flow on `G^{T,Ω}` induced by `j`: `i(a,a,t) = j(t)`,
/// `i(a,b,t) = i(b,t,Ω) = j(t−1) − j(t)`.
pub fn one_road_flow(teg: &TimeExtendedGraph, j: &RoadTrajectory) -> Result<EdgeFlow, RoadsError> {
    check_extension(teg, j)?;
    let b = NodeId(1);
    let mut i = vec![0.0; teg.graph().edge_count()];
    for t in 1..=j.horizon() {
        let leave = (-j.backward_difference(t)).max(0.0);
        i[teg.edge(WAIT_EDGE, t).0] = j.values()[t];
        i[teg.edge(LEAVE_EDGE, t).0] = leave;
        i[teg.deposit_edge(b, t).expect("deposit layer").0] = leave;
    }
    EdgeFlow::new(i).map_err(|_| RoadsError::InvalidTrajectory("induced flow is not a flow"))
}

/// Multiplier `u` on `G^{T,Ω}` solving the dynamic Beckmann equations
/// together with [`one_road_flow`], for an obstacle solution `j`.
///
/// With `ξ = ∇H^T(i)` and `λ(t) = ξ(ab,t+1) − ξ(ab,t) + ξ(aa,t)` (and
/// `λ(T) = 0`): `u(a,0) = 0`, `u(a,t+1) = u(a,t) + ξ(aa,t+1) − λ(t+1)`,
/// `u(b,t+1) = u(a,t) + ξ(ab,t+1)`, `u(b,0) = u(b,1)`, `u(b,Ω) = u(b,T)` and
/// `u(a,Ω) = min_t u(a,t)`.
pub fn one_road_multiplier(
    teg: &TimeExtendedGraph,
    j: &RoadTrajectory,
    beta: f64,
    eps: f64,
    linear: f64,
) -> Result<NodeFunction, RoadsError> {
    check_extension(teg, j)?;
    let big_t = j.horizon();
    let v = j.values();
    let xi_wait = |t: usize| beta * v[t] + eps;
    let xi_leave = |t: usize| (v[t - 1] - v[t]) + linear;
    let lambda = |t: usize| {
        if t == big_t {
            0.0
        } else {
            xi_leave(t + 1) - xi_leave(t) + xi_wait(t)
        }
    };
    let (a, b) = (NodeId(0), NodeId(1));
    let mut u = vec![0.0; teg.graph().node_count()];
    let mut ua = vec![0.0; big_t + 1];
    for t in 0..big_t {
        ua[t + 1] = ua[t] + xi_wait(t + 1) - lambda(t + 1);
        u[teg.node(b, t + 1).0] = ua[t] + xi_leave(t + 1);
    }
    for t in 0..=big_t {
        u[teg.node(a, t).0] = ua[t];
    }
    u[teg.node(b, 0).0] = u[teg.node(b, 1).0];
    u[teg.deposit_node(b).expect("deposit layer").0] = u[teg.node(b, big_t).0];
    u[teg.deposit_node(a).expect("deposit layer").0] =
        ua.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(NodeFunction::new(u))
}

/// Verdict of [`max_principle_check`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxPrincipleVerdict {
    /// `u(t+1) − 2b·u(t) + u(t−1) ≥ 0` at every interior time.
    pub subsolution: bool,
    /// `u ≤ 0` at both ends.
    pub boundary_nonpositive: bool,
    pub max_value: f64,
    /// `u` vanishes at some interior time.
    pub interior_zero: bool,
    pub identically_zero: bool,
}

impl MaxPrincipleVerdict {
    pub fn hypotheses_hold(&self) -> bool {
        self.subsolution && self.boundary_nonpositive
    }

    /// `u ≤ 0`, and `u ≡ 0` whenever it vanishes inside.
    pub fn conclusion_holds(&self) -> bool {
        self.max_value <= 0.0 && (!self.interior_zero || self.identically_zero)
    }

    /// Hypotheses imply the conclusion.
    pub fn consistent(&self) -> bool {
        !self.hypotheses_hold() || self.conclusion_holds()
    }
}

/// Evaluates the discrete strong maximum principle for `b ≥ 1` on a sequence.
pub fn max_principle_check(u: &[f64], b: f64, tol: f64) -> Result<MaxPrincipleVerdict, RoadsError> {
    if !(b >= 1.0) {
        return Err(RoadsError::InvalidParameter("b must be at least 1"));
    }
    if u.len() < 2 {
        return Err(RoadsError::InvalidParameter("need at least two values"));
    }
    let n = u.len();
    let subsolution = (1..n - 1).all(|t| u[t + 1] - 2.0 * b * u[t] + u[t - 1] >= -tol);
    let boundary_nonpositive = u[0] <= tol && u[n - 1] <= tol;
    let max_value = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxPrincipleVerdict {
        subsolution,
        boundary_nonpositive,
        max_value: if max_value <= tol {
            max_value.min(0.0)
        } else {
            max_value
        },
        interior_zero: u[1..n - 1].iter().any(|&v| libm::fabs(v) <= tol),
        identically_zero: u.iter().all(|&v| libm::fabs(v) <= tol),
    })
}

/// `E(j₁, j₂)` for the local two-roads minimization at one time step.
#[allow(clippy::too_many_arguments)]
pub fn local_energy(
    j1: f64,
    j2: f64,
    j1m: f64,
    j1p: f64,
    j2m: f64,
    j2p: f64,
    gamma: f64,
    eps: f64,
) -> f64 {
    let k = |j: f64, m: f64, p: f64| 0.5 * (j - m) * (j - m) + 0.5 * (j - p) * (j - p) + eps * j;
    k(j1, j1m, j1p)
        + k(j2, j2m, j2p)
        + gamma * (j1 - j1m) * (j2 - j2m)
        + gamma * (j1 - j1p) * (j2 - j2p)
}

/// Exact minimizer of [`local_energy`] over `[j₁⁺, j₁⁻] × [j₂⁺, j₂⁻]`.
///
/// Each side is a one-dimensional convex quadratic, minimized by clipping;
/// for `γ < 1` the interior critical point is also a candidate. Ties prefer
/// the bottom side (`j₂ = j₂⁺`), then right, top, left, interior.
pub fn rect_minimize_e(
    j1m: f64,
    j1p: f64,
    j2m: f64,
    j2p: f64,
    gamma: f64,
    eps: f64,
) -> Result<(f64, f64), RoadsError> {
    if !(j1p <= j1m && j2p <= j2m) {
        return Err(RoadsError::InvalidParameter("empty rectangle"));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "gamma must be finite and nonnegative",
        ));
    }
    check_params(0.0, eps)?;
    let best1 =
        |j2: f64| ((j1m + j1p - eps - gamma * (2.0 * j2 - j2m - j2p)) / 2.0).clamp(j1p, j1m);
    let best2 =
        |j1: f64| ((j2m + j2p - eps - gamma * (2.0 * j1 - j1m - j1p)) / 2.0).clamp(j2p, j2m);
    let mut candidates = vec![
        (best1(j2p), j2p),
        (j1m, best2(j1m)),
        (best1(j2m), j2m),
        (j1p, best2(j1p)),
    ];
    if gamma < 1.0 {
        let s1 = j1m + j1p - eps + gamma * (j2m + j2p);
        let s2 = j2m + j2p - eps + gamma * (j1m + j1p);
        let det = 4.0 - 4.0 * gamma * gamma;
        let x = (2.0 * s1 - 2.0 * gamma * s2) / det;
        let y = (2.0 * s2 - 2.0 * gamma * s1) / det;
        if (j1p..=j1m).contains(&x) && (j2p..=j2m).contains(&y) {
            candidates.push((x, y));
        }
    }
    let mut best = candidates[0];
    let mut best_value = local_energy(best.0, best.1, j1m, j1p, j2m, j2p, gamma, eps);
    for &c in &candidates[1..] {
        let v = local_energy(c.0, c.1, j1m, j1p, j2m, j2p, gamma, eps);
        if v < best_value - 1e-15 * (1.0 + libm::fabs(v)) {
            best = c;
            best_value = v;
        }
    }
    Ok(best)
}

/// `H^T(j₁, j₂) = Σ_t ½(D⁻j₁)² + εj₁ + ½(D⁻j₂)² + εj₂ + γ D⁻j₁ D⁻j₂`.
pub fn two_roads_energy(j1: &[f64], j2: &[f64], gamma: f64, eps: f64) -> f64 {
    (1..j1.len())
        .map(|t| {
            let d1 = j1[t] - j1[t - 1];
            let d2 = j2[t] - j2[t - 1];
            0.5 * d1 * d1 + eps * j1[t] + 0.5 * d2 * d2 + eps * j2[t] + gamma * d1 * d2
        })
        .sum()
}

/// Stopping rules for [`two_roads_solve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSchedule {
    /// Stop sweeping when `|ΔH^T|` falls below this…
    pub energy_tol: f64,
    /// …and no coordinate moved more than this.
    pub step_tol: f64,
    pub max_sweeps: usize,
    /// Also move maximal plateaus as blocks; single-coordinate sweeps stall
    /// on plateaus when `γ > 1`.
    pub refine_plateaus: bool,
    pub max_rounds: usize,
}

impl Default for SweepSchedule {
    fn default() -> Self {
        SweepSchedule {
            energy_tol: 1e-12,
            step_tol: 1e-13,
            max_sweeps: 100_000,
            refine_plateaus: true,
            max_rounds: 10_000,
        }
    }
}

/// Output of [`two_roads_solve`].
#[derive(Clone, Debug, PartialEq)]
pub struct TwoRoadsSolution {
    pub j1: RoadTrajectory,
    pub j2: RoadTrajectory,
    /// `H^T` after every sweep and every plateau move, starting with the initial value.
    pub energy_history: Vec<f64>,
    pub sweeps: usize,
    pub rounds: usize,
    pub converged: bool,
}

impl TwoRoadsSolution {
    pub fn energy(&self) -> f64 {
        *self
            .energy_history
            .last()
            .expect("history starts with the initial energy")
    }

    /// Last energy change.
    pub fn final_energy_change(&self) -> f64 {
        let h = &self.energy_history;
        if h.len() < 2 {
            0.0
        } else {
            libm::fabs(h[h.len() - 1] - h[h.len() - 2])
        }
    }
}

struct Sweeper<'a> {
    gamma: f64,
    eps: f64,
    schedule: &'a SweepSchedule,
    history: Vec<f64>,
    sweeps: usize,
}

impl Sweeper<'_> {
    /// Coordinate sweeps until the energy and the iterates settle.
    fn sweep(&mut self, j1: &mut [f64], j2: &mut [f64]) -> Result<bool, RoadsError> {
        let big_t = j1.len() - 1;
        let mut energy = two_roads_energy(j1, j2, self.gamma, self.eps);
        loop {
            if self.sweeps >= self.schedule.max_sweeps {
                return Ok(false);
            }
            let mut moved = 0.0f64;
            for t in 1..big_t {
                let (a, b) = rect_minimize_e(
                    j1[t - 1],
                    j1[t + 1],
                    j2[t - 1],
                    j2[t + 1],
                    self.gamma,
                    self.eps,
                )?;
                moved = moved.max(libm::fabs(a - j1[t])).max(libm::fabs(b - j2[t]));
                j1[t] = a;
                j2[t] = b;
            }
            self.sweeps += 1;
            let next = two_roads_energy(j1, j2, self.gamma, self.eps);
            self.history.push(next);
            let settled = libm::fabs(next - energy) < self.schedule.energy_tol
                && moved < self.schedule.step_tol;
            energy = next;
            if settled {
                return Ok(true);
            }
        }
    }
}

/// Shifts every maximal interior plateau of `j` by its exact best offset,
/// keeping `other` fixed. Returns the largest shift.
fn plateau_pass(j: &mut [f64], other: &[f64], gamma: f64, eps: f64) -> f64 {
    let big_t = j.len() - 1;
    let mut shift = 0.0f64;
    let mut t = 1;
    while t < big_t {
        let mut s = t;
        while s + 1 < big_t && j[s + 1] == j[t] {
            s += 1;
        }
        let a = j[t] - j[t - 1];
        let b = j[s + 1] - j[s];
        let oa = other[t] - other[t - 1];
        let ob = other[s + 1] - other[s];
        let n = (s - t + 1) as f64;
        let d =
            (-(a - b + eps * n + gamma * (oa - ob)) / 2.0).clamp(j[s + 1] - j[t], j[t - 1] - j[t]);
        if d != 0.0 {
            for v in &mut j[t..=s] {
                *v += d;
            }
            shift = shift.max(libm::fabs(d));
        }
        t = s + 1;
    }
    shift
}

/// Algorithm 1: block coordinate descent on `H^T` over monotone
/// trajectories with `j_k(0) = m_k`, `j_k(T) = 0`.
///
/// `init` defaults to `j_k = m_k` on `{0, …, T−1}`. With
/// [`SweepSchedule::refine_plateaus`] the sweeps alternate with plateau moves
/// until neither changes anything.
pub fn two_roads_solve(
    horizon: usize,
    masses: (f64, f64),
    gamma: f64,
    eps: f64,
    init: Option<(&RoadTrajectory, &RoadTrajectory)>,
    schedule: &SweepSchedule,
) -> Result<TwoRoadsSolution, RoadsError> {
    if horizon < 2 {
        return Err(RoadsError::InvalidParameter("horizon must be at least 2"));
    }
    check_params(0.0, eps)?;
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(RoadsError::InvalidParameter(
            "gamma must be finite and nonnegative",
        ));
    }
    let (mut j1, mut j2) = match init {
        Some((a, b)) => {
            if a.horizon() != horizon || b.horizon() != horizon {
                return Err(RoadsError::InvalidParameter(
                    "initial trajectories have the wrong horizon",
                ));
            }
            if a.mass() != masses.0 || b.mass() != masses.1 {
                return Err(RoadsError::InvalidParameter(
                    "initial trajectories have the wrong masses",
                ));
            }
            (a.values().to_vec(), b.values().to_vec())
        }
        None => (
            RoadTrajectory::step(horizon, masses.0)?.into_values(),
            RoadTrajectory::step(horizon, masses.1)?.into_values(),
        ),
    };
    let mut sweeper = Sweeper {
        gamma,
        eps,
        schedule,
        history: vec![two_roads_energy(&j1, &j2, gamma, eps)],
        sweeps: 0,
    };
    let mut converged = sweeper.sweep(&mut j1, &mut j2)?;
    let mut rounds = 0;
    if schedule.refine_plateaus {
        while converged && rounds < schedule.max_rounds {
            let c1 = plateau_pass(&mut j1, &j2, gamma, eps);
            let c2 = plateau_pass(&mut j2, &j1, gamma, eps);
            rounds += 1;
            if c1.max(c2) > 0.0 {
                sweeper.history.push(two_roads_energy(&j1, &j2, gamma, eps));
            }
            converged = sweeper.sweep(&mut j1, &mut j2)?;
            if c1.max(c2) < schedule.step_tol {
                break;
            }
        }
    }
    Ok(TwoRoadsSolution {
        j1: RoadTrajectory::new(j1)?,
        j2: RoadTrajectory::new(j2)?,
        energy_history: sweeper.history,
        sweeps: sweeper.sweeps,
        rounds,
        converged,
    })
}

/// Residuals of the two-roads optimality system.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoRoadsKkt {
    pub alpha1: HalfIntegerMultiplier,
    pub alpha2: HalfIntegerMultiplier,
    /// `max_s |min{−Dj_k(s+½), α_k(s+½)}|` over both roads.
    pub complementarity: f64,
    /// Largest deviation from `j_k(T) = 0` and `D±j_k ≤ 0`.
    pub admissibility: f64,
}

impl TwoRoadsKkt {
    pub fn residual(&self) -> f64 {
        self.complementarity.max(self.admissibility)
    }
}

/// Recovers `α_k` from `(−Δ)j_k + γ(−Δ)j_{k'} + ε = Dα_k` by cumulative
/// summation, normalized by `min α_k = 0`, then measures complementarity.
pub fn two_roads_kkt(
    j1: &RoadTrajectory,
    j2: &RoadTrajectory,
    gamma: f64,
    eps: f64,
) -> Result<TwoRoadsKkt, RoadsError> {
    if j1.horizon() != j2.horizon() || j1.horizon() < 2 {
        return Err(RoadsError::InvalidParameter(
            "trajectories need a common horizon of at least 2",
        ));
    }
    let big_t = j1.horizon();
    let alpha = |a: &RoadTrajectory, b: &RoadTrajectory| {
        let mut cs = vec![0.0; big_t];
        for t in 1..big_t {
            cs[t] = cs[t - 1] + (-a.laplacian(t) - gamma * b.laplacian(t) + eps);
        }
        let shift = -cs.iter().copied().fold(f64::INFINITY, f64::min);
        cs.into_iter()
            .map(|v| (v + shift).max(0.0))
            .collect::<Vec<_>>()
    };
    let a1 = alpha(j1, j2);
    let a2 = alpha(j2, j1);
    let mut complementarity = 0.0f64;
    let mut admissibility = 0.0f64;
    for (j, a) in [(j1, &a1), (j2, &a2)] {
        for s in 0..big_t {
            let dj = j.values()[s + 1] - j.values()[s];
            complementarity = complementarity.max(libm::fabs((-dj).min(a[s])));
            admissibility = admissibility.max(dj.max(0.0));
        }
        admissibility = admissibility.max(libm::fabs(j.values()[big_t]));
    }
    Ok(TwoRoadsKkt {
        alpha1: HalfIntegerMultiplier::new(a1)?,
        alpha2: HalfIntegerMultiplier::new(a2)?,
        complementarity,
        admissibility,
    })
}

/// Fraction of `s ∈ {0, …, T−1}` where one of the roads is idle:
/// `min{−Dj₁, −Dj₂}(s+½) ≤ tol`.
pub fn exclusive_fraction(j1: &RoadTrajectory, j2: &RoadTrajectory, tol: f64) -> f64 {
    let big_t = j1.horizon();
    let idle = (0..big_t)
        .filter(|&s| {
            let d1 = j1.values()[s] - j1.values()[s + 1];
            let d2 = j2.values()[s] - j2.values()[s + 1];
            d1.min(d2) <= tol
        })
        .count();
    idle as f64 / big_t as f64
}

/// Hessian of `H^T` in the interior values `(j₁(1..T−1), j₂(1..T−1))`:
/// `[[A, γA], [γA, A]]` with `A = tridiag(−1, 2, −1)`.
pub fn two_roads_hessian(horizon: usize, gamma: f64) -> Vec<Vec<f64>> {
    let n = horizon.saturating_sub(1);
    let mut h = vec![vec![0.0; 2 * n]; 2 * n];
    for (bi, bj, scale) in [(0, 0, 1.0), (1, 1, 1.0), (0, 1, gamma), (1, 0, gamma)] {
        for k in 0..n {
            h[bi * n + k][bj * n + k] = 2.0 * scale;
            if k + 1 < n {
                h[bi * n + k][bj * n + k + 1] = -scale;
                h[bi * n + k + 1][bj * n + k] = -scale;
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn free_solution_examples() {
        assert_abs_diff_eq!(
            free_solution_j(4, 0.0, 0.0).unwrap().values()[1],
            0.75,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            free_solution_j(4, 0.0, 0.1).unwrap().values()[2],
            0.3,
            epsilon = 1e-15
        );
        for beta in [0.1, 0.5, 2.0] {
            let r = ratio(beta);
            assert_abs_diff_eq!(r + 1.0 / r, 2.0 + beta, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_solution_solves_difference_equation() {
        for (beta, eps) in [(0.0, 0.3), (0.5, 0.1), (2.0, 1.0)] {
            let j = free_solution_j(9, beta, eps).unwrap();
            assert_abs_diff_eq!(j.values()[0], 1.0);
            for t in 1..9 {
                assert_abs_diff_eq!(
                    -j.laplacian(t) + beta * j.values()[t] + eps,
                    0.0,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn t0_examples() {
        assert_eq!(compute_t0(0.0, 0.1).unwrap(), Some(5));
        assert_eq!(compute_t0(0.0, 2.0).unwrap(), Some(1));
        assert_eq!(compute_t0(0.7, 0.0).unwrap(), None);
    }

    #[test]
    fn t0_inverse_formula_agrees() {
        for beta in [0.25, 0.5, 1.0, 2.0, 3.0] {
            for eps in [0.01, 0.05, 0.1, 0.3, 0.5, 2.0, 5.0] {
                assert_eq!(
                    compute_t0(beta, eps).unwrap(),
                    compute_t0_by_inverse(beta, eps).unwrap()
                );
            }
        }
    }

    #[test]
    fn obstacle_examples() {
        let ramp = one_road_obstacle_solve(3, 0.0, 0.0).unwrap();
        for (t, v) in ramp.values().iter().enumerate() {
            assert_abs_diff_eq!(*v, 1.0 - t as f64 / 3.0, epsilon = 1e-10);
        }
        // ε = 0.1 is a tie: J₅(4) = 0, so the road is already empty at t = 4.
        let j = one_road_obstacle_solve(10, 0.0, 0.1).unwrap();
        assert!(j.values()[3] > 0.0);
        assert!(j.values()[4..].iter().all(|v| v.abs() < 1e-10));
        let j = one_road_obstacle_solve(10, 0.0, 0.15).unwrap();
        assert_eq!(compute_t0(0.0, 0.15).unwrap(), Some(4));
        assert_eq!(j.emptying_time(1e-10), 4);
    }

    #[test]
    fn closed_form_matches_obstacle_solver() {
        for beta in [0.0, 0.5, 1.0] {
            for eps in [0.0, 0.05, 0.5, 2.0] {
                for t in 1..12 {
                    let a = one_road_solve(t, beta, eps).unwrap();
                    let b = one_road_obstacle_solve(t, beta, eps).unwrap();
                    assert!(
                        a.max_abs_difference(&b) < 1e-8,
                        "beta={beta} eps={eps} T={t}"
                    );
                }
            }
        }
    }

    #[test]
    fn mass_scaling() {
        let a = one_road_solve_mass(10, 0.0, 0.1, 3.0).unwrap();
        let b = one_road_obstacle_solve_mass(10, 0.0, 0.1, 3.0).unwrap();
        assert!(a.max_abs_difference(&b) < 1e-8);
        assert_eq!(a.mass(), 3.0);
    }

    #[test]
    fn trajectory_validation() {
        assert!(RoadTrajectory::new(vec![1.0, 0.5, 0.0]).is_ok());
        assert!(RoadTrajectory::new(vec![1.0, 1.5, 0.0]).is_err());
        assert!(RoadTrajectory::new(vec![1.0, 0.5, 0.1]).is_err());
        assert!(RoadTrajectory::new(vec![1.0]).is_err());
    }

    #[test]
    fn rect_examples() {
        let (a, b) = rect_minimize_e(1.0, 0.0, 1.0, 0.0, 0.0, 0.1).unwrap();
        assert_abs_diff_eq!(a, 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.45, epsilon = 1e-15);
        assert_eq!(
            rect_minimize_e(1.0, 0.0, 1.0, 0.0, 2.0, 10.0).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            rect_minimize_e(0.3, 0.3, 1.0, 0.0, 0.5, 0.1).unwrap().0,
            0.3
        );
        assert!(rect_minimize_e(0.0, 1.0, 1.0, 0.0, 0.5, 0.1).is_err());
    }

    #[test]
    fn rect_beats_grid_search() {
        let cases = [
            (1.0, 0.2, 0.7, 0.0, 0.5, 0.1),
            (2.0, 0.0, 3.0, 1.0, 2.0, 0.1),
            (1.0, 0.0, 1.0, 0.0, 1.0, 0.0),
            (0.9, 0.1, 2.5, 0.3, 1.5, 0.4),
        ];
        for (j1m, j1p, j2m, j2p, g, e) in cases {
            let (a, b) = rect_minimize_e(j1m, j1p, j2m, j2p, g, e).unwrap();
            let best = local_energy(a, b, j1m, j1p, j2m, j2p, g, e);
            for p in 0..=200 {
                for q in 0..=200 {
                    let x = j1p + (j1m - j1p) * p as f64 / 200.0;
                    let y = j2p + (j2m - j2p) * q as f64 / 200.0;
                    assert!(best <= local_energy(x, y, j1m, j1p, j2m, j2p, g, e) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn symmetric_tie_takes_bottom_side() {
        // γ = 1, ε = 0 and equal intervals: a whole segment of minimizers.
        let (_, b) = rect_minimize_e(1.0, 0.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(b, 0.0);
    }

    #[test]
    fn two_point_horizon_is_one_rect_step() {
        let sol =
            two_roads_solve(2, (2.0, 3.0), 0.5, 0.1, None, &SweepSchedule::default()).unwrap();
        let (a, b) = rect_minimize_e(2.0, 0.0, 3.0, 0.0, 0.5, 0.1).unwrap();
        assert_abs_diff_eq!(sol.j1.values()[1], a, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.j2.values()[1], b, epsilon = 1e-15);
    }

    #[test]
    fn decoupled_roads_are_one_roads() {
        let sol =
            two_roads_solve(10, (2.0, 3.0), 0.0, 0.1, None, &SweepSchedule::default()).unwrap();
        assert!(sol.converged);
        let o1 = one_road_obstacle_solve_mass(10, 0.0, 0.1, 2.0).unwrap();
        let o2 = one_road_obstacle_solve_mass(10, 0.0, 0.1, 3.0).unwrap();
        assert!(sol.j1.max_abs_difference(&o1) < 1e-8);
        assert!(sol.j2.max_abs_difference(&o2) < 1e-8);
        assert!(two_roads_kkt(&o1, &o2, 0.0, 0.1).unwrap().residual() < 1e-8);
    }

    #[test]
    fn energy_history_is_monotone() {
        for gamma in [0.5, 1.0, 2.0] {
            let sol = two_roads_solve(10, (2.0, 3.0), gamma, 0.1, None, &SweepSchedule::default())
                .unwrap();
            for w in sol.energy_history.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12 * (1.0 + libm::fabs(w[0])),
                    "gamma={gamma}"
                );
            }
            assert!(
                two_roads_kkt(&sol.j1, &sol.j2, gamma, 0.1)
                    .unwrap()
                    .residual()
                    < 1e-6
            );
        }
    }

    #[test]
    fn perturbation_shows_in_kkt() {
        let sol =
            two_roads_solve(10, (2.0, 3.0), 0.5, 0.1, None, &SweepSchedule::default()).unwrap();
        let mut v = sol.j1.values().to_vec();
        v[3] = 0.5 * (v[2] + v[3]);
        let bent = RoadTrajectory::new(v).unwrap();
        assert!(two_roads_kkt(&bent, &sol.j2, 0.5, 0.1).unwrap().residual() > 1e-4);
    }

    #[test]
    fn max_principle_cases() {
        let v = max_principle_check(&[-1.0, -2.0, -2.5, -2.0, -1.0], 1.0, 0.0).unwrap();
        assert!(v.hypotheses_hold() && v.conclusion_holds());
        let bump = max_principle_check(&[0.0, 1.0, 0.0], 1.0, 0.0).unwrap();
        assert!(!bump.subsolution && !bump.conclusion_holds() && bump.consistent());
        let zero = max_principle_check(&[0.0, 0.0, 0.0, 0.0], 1.5, 0.0).unwrap();
        assert!(zero.hypotheses_hold() && zero.identically_zero && zero.consistent());
        // A boundary zero alone does not force u ≡ 0.
        let dip = max_principle_check(&[0.0, -1.0, 0.0], 1.0, 0.0).unwrap();
        assert!(dip.hypotheses_hold() && !dip.interior_zero && dip.conclusion_holds());
        assert!(max_principle_check(&[0.0, 0.0], 0.5, 0.0).is_err());
    }

    #[test]
    fn hessian_blocks() {
        let h = two_roads_hessian(4, 0.5);
        assert_eq!(h.len(), 6);
        assert_eq!(h[0][0], 2.0);
        assert_eq!(h[0][1], -1.0);
        assert_eq!(h[0][3], 1.0);
        assert_eq!(h[0][4], -0.5);
        for (r, row) in h.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_eq!(*v, h[c][r]);
            }
        }
    }
}
