//! Time-extended graphs `G^T`, deposit graphs `G^{T,Ω}` and the dynamic
//! Beckmann problem.
//!
//! Index layout (time-major, fixed so that flows round-trip through files):
//!
//! * node `(x, t)` for `t ∈ 0..=T` has index `t·|N| + x`;
//! * deposit node `(x, Ω)` has index `(T+1)·|N| + x`;
//! * edge `(e, t)` for `t ∈ 1..=T` joins `(e⁻, t−1)` to `(e⁺, t)` and has
//!   index `(t−1)·|E| + e`;
//! * deposit edge `(x, t, Ω)` for `t ∈ 1..=T` joins `(x, t)` to `(x, Ω)` and
//!   has index `T·|E| + (t−1)·|N| + x`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::beckmann::{
    self, BeckmannError, DivergenceConstraint, FrankWolfeOptions, FrankWolfeResult, Potential,
};
use crate::flow::{self, EdgeFlow, NodeFunction, NodeMeasure};
use crate::graph::{
    self, DirectedGraph, EdgeId, GraphError, LoopCondition, Metric, NodeId, Tolerances,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("the operation needs the deposit layer")]
    NoDeposit,
    #[error("no potential given for time step {0}")]
    MissingStep(usize),
    #[error("{what} must be a probability measure on the base nodes")]
    NotProbability { what: &'static str },
    #[error("(i, u) does not solve the dynamic equations: residual {residual}")]
    Precondition { residual: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Beckmann(#[from] BeckmannError),
}

/// Position of an extended node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerNode {
    At { node: NodeId, t: usize },
    Deposit { node: NodeId },
}

/// Position of an extended edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerEdge {
    Moving { edge: EdgeId, t: usize },
    Deposit { node: NodeId, t: usize },
}

/// `G^T`, or `G^{T,Ω}` when built with deposits.
#[derive(Clone, Debug)]
pub struct TimeExtendedGraph {
    base: DirectedGraph,
    horizon: usize,
    deposit: bool,
    graph: DirectedGraph,
}

/// Builds `G^T` (`deposit = false`) or `G^{T,Ω}`.
pub fn extend_graph(
    base: &DirectedGraph,
    horizon: usize,
    deposit: bool,
) -> Result<TimeExtendedGraph, DynamicError> {
    TimeExtendedGraph::new(base, horizon, deposit)
}

impl TimeExtendedGraph {
    pub fn new(base: &DirectedGraph, horizon: usize, deposit: bool) -> Result<Self, DynamicError> {
        if horizon == 0 {
            return Err(DynamicError::ZeroHorizon);
        }
        let n = base.node_count();
        let mut names: Vec<String> = Vec::with_capacity(n * (horizon + 2));
        for t in 0..=horizon {
            for x in base.nodes() {
                names.push(format!("{}@{}", base.node_name(x), t));
            }
        }
        if deposit {
            for x in base.nodes() {
                names.push(format!("{}@omega", base.node_name(x)));
            }
        }
        let mut pairs = Vec::with_capacity(base.edge_count() * horizon + n * horizon);
        for t in 1..=horizon {
            for e in base.edge_ids() {
                let (x, y) = base.endpoints(e);
                pairs.push(((t - 1) * n + x.0, t * n + y.0));
            }
        }
        if deposit {
            for t in 1..=horizon {
                for x in 0..n {
                    pairs.push((t * n + x, (horizon + 1) * n + x));
                }
            }
        }
        Ok(TimeExtendedGraph {
            base: base.clone(),
            horizon,
            deposit,
            graph: DirectedGraph::with_names(names, &pairs)?,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn base(&self) -> &DirectedGraph {
        &self.base
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn has_deposit(&self) -> bool {
        self.deposit
    }

    /// Number of moving edges `|E|·T`.
    pub fn moving_edge_count(&self) -> usize {
        self.base.edge_count() * self.horizon
    }

    pub fn node(&self, x: NodeId, t: usize) -> NodeId {
        assert!(
            t <= self.horizon,
            "time {t} beyond horizon {}",
            self.horizon
        );
        NodeId(t * self.base.node_count() + x.0)
    }

    pub fn deposit_node(&self, x: NodeId) -> Option<NodeId> {
        self.deposit
            .then(|| NodeId((self.horizon + 1) * self.base.node_count() + x.0))
    }

    pub fn edge(&self, e: EdgeId, t: usize) -> EdgeId {
        assert!(
            (1..=self.horizon).contains(&t),
            "time {t} outside 1..={}",
            self.horizon
        );
        EdgeId((t - 1) * self.base.edge_count() + e.0)
    }

    pub fn deposit_edge(&self, x: NodeId, t: usize) -> Option<EdgeId> {
        assert!(
            (1..=self.horizon).contains(&t),
            "time {t} outside 1..={}",
            self.horizon
        );
        self.deposit
            .then(|| EdgeId(self.moving_edge_count() + (t - 1) * self.base.node_count() + x.0))
    }

    pub fn locate_node(&self, v: NodeId) -> LayerNode {
        let n = self.base.node_count();
        let (t, x) = (v.0 / n, NodeId(v.0 % n));
        if t <= self.horizon {
            LayerNode::At { node: x, t }
        } else {
            LayerNode::Deposit { node: x }
        }
    }

    pub fn locate_edge(&self, e: EdgeId) -> LayerEdge {
        let moving = self.moving_edge_count();
        if e.0 < moving {
            let m = self.base.edge_count();
            LayerEdge::Moving {
                edge: EdgeId(e.0 % m),
                t: e.0 / m + 1,
            }
        } else {
            let n = self.base.node_count();
            let k = e.0 - moving;
            LayerEdge::Deposit {
                node: NodeId(k % n),
                t: k / n + 1,
            }
        }
    }

    /// `i(·, t)` on the moving edges of layer `t`.
    pub fn layer<'a>(&self, i: &'a [f64], t: usize) -> &'a [f64] {
        let m = self.base.edge_count();
        &i[(t - 1) * m..t * m]
    }

    /// `i(·, t, Ω)` for layer `t`; empty without deposits.
    pub fn deposits<'a>(&self, i: &'a [f64], t: usize) -> &'a [f64] {
        if !self.deposit {
            return &[];
        }
        let n = self.base.node_count();
        let start = self.moving_edge_count() + (t - 1) * n;
        &i[start..start + n]
    }
}

/// `(ι₀[μ], ι_Ω[ν])` on the nodes of `G^{T,Ω}`.
pub fn lift_measures(
    teg: &TimeExtendedGraph,
    mu: &NodeMeasure,
    nu: &NodeMeasure,
) -> Result<(NodeMeasure, NodeMeasure), DynamicError> {
    if !teg.has_deposit() {
        return Err(DynamicError::NoDeposit);
    }
    let n = teg.base().node_count();
    for (what, m) in [("mu", mu), ("nu", nu)] {
        if m.len() != n || !m.is_probability() {
            return Err(DynamicError::NotProbability { what });
        }
    }
    let total = teg.graph().node_count();
    let mut start = vec![0.0; total];
    let mut end = vec![0.0; total];
    for x in teg.base().nodes() {
        start[teg.node(x, 0).0] = mu[x];
        end[teg.deposit_node(x).expect("deposit layer").0] = nu[x];
    }
    Ok((NodeMeasure::new(start), NodeMeasure::new(end)))
}

/// A potential `H(·, t)` on the base edges, for `t ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeDependentPotential {
    Stationary(Potential),
    /// `steps[t − 1]` is `H(·, t)`.
    PerStep(Vec<Potential>),
}

impl TimeDependentPotential {
    pub fn at(&self, t: usize) -> Result<&Potential, DynamicError> {
        match self {
            TimeDependentPotential::Stationary(h) => Ok(h),
            TimeDependentPotential::PerStep(steps) => t
                .checked_sub(1)
                .and_then(|k| steps.get(k))
                .ok_or(DynamicError::MissingStep(t)),
        }
    }
}

/// `H^T(i) = Σ_{t=1..T} H(i(t), t)`, extended with zero cost on deposit edges.
pub fn extend_potential(
    h: &TimeDependentPotential,
    teg: &TimeExtendedGraph,
) -> Result<Potential, DynamicError> {
    let steps = (1..=teg.horizon())
        .map(|t| h.at(t).cloned())
        .collect::<Result<Vec<_>, _>>()?;
    let free = if teg.has_deposit() {
        teg.base().node_count() * teg.horizon()
    } else {
        0
    };
    Ok(Potential::time_extended(
        teg.base().edge_count(),
        steps,
        free,
    )?)
}

/// A dynamic Beckmann solution on `G^{T,Ω}`.
#[derive(Clone, Debug)]
pub struct DynamicSolution {
    pub extended: TimeExtendedGraph,
    pub potential: Potential,
    pub constraint: DivergenceConstraint,
    pub result: FrankWolfeResult,
}

/// Solves the dynamic Beckmann problem for `ι₀[μ] − ι_Ω[ν]` on `G^{T,Ω}`.
pub fn solve_dynamic(
    base: &DirectedGraph,
    h: &TimeDependentPotential,
    mu: &NodeMeasure,
    nu: &NodeMeasure,
    horizon: usize,
    opts: &FrankWolfeOptions,
) -> Result<DynamicSolution, DynamicError> {
    let extended = TimeExtendedGraph::new(base, horizon, true)?;
    let (start, end) = lift_measures(&extended, mu, nu)?;
    let constraint = DivergenceConstraint::transport(&start, &end);
    let potential = extend_potential(h, &extended)?;
    let result =
        beckmann::solve_beckmann_frank_wolfe(extended.graph(), &potential, &constraint, opts)?;
    Ok(DynamicSolution {
        extended,
        potential,
        constraint,
        result,
    })
}

/// Last layer `t` with moving flow above `threshold`; zero for empty flows.
pub fn active_horizon(teg: &TimeExtendedGraph, i: &EdgeFlow, threshold: f64) -> usize {
    (1..=teg.horizon())
        .rev()
        .find(|&t| teg.layer(i.values(), t).iter().any(|&v| v > threshold))
        .unwrap_or(0)
}

/// Active horizon against the finite propagation bound.
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationReport {
    pub active_horizon: usize,
    /// `diam_𝟙({μ>0}, {ν>0})` on the base graph.
    pub unit_diameter: f64,
    /// Gradient bounds `(m, M)` over the unit box.
    pub gradient_bounds: (f64, f64),
    /// `(M/m)·diam_𝟙`; `None` when `m ≤ 0` (hypothesis unmet).
    pub bound: Option<f64>,
    pub holds: Option<bool>,
}

/// Checks `T₀ ≤ (M/m)·diam_𝟙({μ>0}, {ν>0})` for a dynamic solution.
pub fn finite_propagation_check(
    teg: &TimeExtendedGraph,
    i: &EdgeFlow,
    mu: &NodeMeasure,
    nu: &NodeMeasure,
    gradient_bounds: (f64, f64),
    tol: &Tolerances,
) -> Result<PropagationReport, DynamicError> {
    let base = teg.base();
    let t0 = active_horizon(teg, i, tol.positivity);
    let from = mu.support_above(0.0);
    let to = nu.support_above(0.0);
    let unit_diameter = graph::diameter(base, &Metric::unit(base.edge_count()), &from, &to)?;
    let (m, big_m) = gradient_bounds;
    let bound = (m > 0.0).then(|| big_m / m * unit_diameter);
    Ok(PropagationReport {
        active_horizon: t0,
        unit_diameter,
        gradient_bounds,
        bound,
        holds: bound.map(|b| t0 as f64 <= b + tol.geodesic),
    })
}

/// Verdict of [`zero_extension_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroExtension {
    /// `min_e ∂_e H(0, T+1) + u(x, T) − u(y, Ω)` over base edges `e = (x, y)`.
    pub sufficient_margin: f64,
    pub sufficient: bool,
    /// Outcome of the exact cycle test; `None` when the sufficient test passed.
    pub exact: Option<bool>,
    /// A negative cycle of base nodes when the exact test fails.
    pub witness: Option<Vec<String>>,
}

impl ZeroExtension {
    pub fn extendable(&self) -> bool {
        self.sufficient || self.exact == Some(true)
    }
}

/// Whether extending `i` by zero to horizon `T + 1` keeps the dynamic
/// Beckmann equations solvable.
///
/// First the multiplier inequality `∂_e H(0, T+1) + u(x, T) − u(y, Ω) ≥ 0`
/// for every base edge. When it fails, the exact test looks for a negative
/// cycle in the graph on base nodes with arcs `x → x'` weighted by
/// `min_{e=(x,y)} ∂_e H(0, T+1) + d_Sym((y, Ω), (x', T))`.
pub fn zero_extension_check(
    teg: &TimeExtendedGraph,
    i: &EdgeFlow,
    u: &NodeFunction,
    h: &TimeDependentPotential,
    precondition: f64,
    tol: &Tolerances,
) -> Result<ZeroExtension, DynamicError> {
    if !teg.has_deposit() {
        return Err(DynamicError::NoDeposit);
    }
    let g = teg.graph();
    DirectedGraph::check_len(g.edge_count(), i.len())?;
    DirectedGraph::check_len(g.node_count(), u.len())?;
    let big_t = teg.horizon();
    let h_t = extend_potential(h, teg)?;
    let xi = h_t.gradient_values(i.values());
    let du = flow::gradient(g, u);
    let mut residual = 0.0f64;
    for e in 0..xi.len() {
        residual = residual.max(libm::fabs(i.values()[e].min(xi[e] - du[e])));
    }
    let div = flow::divergence(g, i);
    for t in 1..=big_t {
        for x in teg.base().nodes() {
            residual = residual.max(libm::fabs(div[teg.node(x, t)]));
        }
    }
    if !(residual <= precondition) {
        return Err(DynamicError::Precondition { residual });
    }

    let base = teg.base();
    let next = h.at(big_t + 1)?;
    let g0 = next.gradient_values(&vec![0.0; base.edge_count()]);
    let omega = |y: NodeId| teg.deposit_node(y).expect("deposit layer");
    let mut margin = f64::INFINITY;
    for e in base.edge_ids() {
        let (x, y) = base.endpoints(e);
        margin = margin.min(g0[e.0] + u[teg.node(x, big_t)] - u[omega(y)]);
    }
    let sufficient = margin >= -tol.loop_condition;
    if sufficient {
        return Ok(ZeroExtension {
            sufficient_margin: margin,
            sufficient,
            exact: None,
            witness: None,
        });
    }

    let sym = graph::symmetrize(g, &i.support(tol.positivity), &Metric::signed(xi)?, tol)?;
    let n = base.node_count();
    let mut from_deposit = Vec::with_capacity(n);
    for y in base.nodes() {
        let sp = graph::shortest_distances_with(
            &sym.graph,
            &sym.metric,
            &[omega(y)],
            tol.loop_condition,
            tol.geodesic,
        )?;
        from_deposit.push(sp);
    }
    let mut arcs: Vec<(usize, usize)> = Vec::new();
    let mut weights = Vec::new();
    for x in base.nodes() {
        for x2 in base.nodes() {
            let best = base
                .out_edges(x)
                .iter()
                .map(|&e| g0[e.0] + from_deposit[base.head(e).0].distance(teg.node(x2, big_t)))
                .fold(f64::INFINITY, f64::min);
            if best.is_finite() {
                arcs.push((x.0, x2.0));
                weights.push(best);
            }
        }
    }
    let aux = DirectedGraph::with_names(base.node_names().to_vec(), &arcs)?;
    let verdict = graph::nonneg_loop_check(&aux, &Metric::signed(weights)?, tol)?;
    let (exact, witness) = match verdict {
        LoopCondition::Satisfied => (true, None),
        LoopCondition::Violated { witness, .. } => (false, Some(witness)),
    };
    Ok(ZeroExtension {
        sufficient_margin: margin,
        sufficient,
        exact: Some(exact),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_edges() -> DirectedGraph {
        DirectedGraph::from_named(&["a", "b"], &[("a", "a"), ("a", "b")]).unwrap()
    }

    #[test]
    fn counts() {
        let g = two_edges();
        let plain = extend_graph(&g, 3, false).unwrap();
        assert_eq!(plain.graph().node_count(), 8);
        assert_eq!(plain.graph().edge_count(), 6);
        let dep = extend_graph(&g, 3, true).unwrap();
        assert_eq!(dep.graph().node_count(), 10);
        assert_eq!(dep.graph().edge_count(), 12);
        let single = extend_graph(&g, 1, false).unwrap();
        assert_eq!(single.graph().edge_count(), 2);
        assert!(extend_graph(&g, 0, true).is_err());
    }

    #[test]
    fn layout_round_trips() {
        let g = two_edges();
        let teg = extend_graph(&g, 4, true).unwrap();
        for t in 1..=4 {
            for e in g.edge_ids() {
                let id = teg.edge(e, t);
                assert_eq!(teg.locate_edge(id), LayerEdge::Moving { edge: e, t });
                let (x, y) = g.endpoints(e);
                assert_eq!(
                    teg.graph().endpoints(id),
                    (teg.node(x, t - 1), teg.node(y, t))
                );
            }
            for x in g.nodes() {
                let id = teg.deposit_edge(x, t).unwrap();
                assert_eq!(teg.locate_edge(id), LayerEdge::Deposit { node: x, t });
                assert_eq!(
                    teg.graph().endpoints(id),
                    (teg.node(x, t), teg.deposit_node(x).unwrap())
                );
            }
        }
        assert_eq!(teg.graph().node_name(teg.node(NodeId(1), 2)), "b@2");
        assert_eq!(
            teg.graph().node_name(teg.deposit_node(NodeId(0)).unwrap()),
            "a@omega"
        );
    }

    #[test]
    fn lifted_measures() {
        let g = two_edges();
        let teg = extend_graph(&g, 2, true).unwrap();
        let (s, e) = lift_measures(
            &teg,
            &NodeMeasure::dirac(2, NodeId(0)),
            &NodeMeasure::dirac(2, NodeId(1)),
        )
        .unwrap();
        assert_eq!(s[teg.node(NodeId(0), 0)], 1.0);
        assert_eq!(e[teg.deposit_node(NodeId(1)).unwrap()], 1.0);
        assert_eq!(s.total(), 1.0);
    }

    #[test]
    fn extended_potential_is_blockwise() {
        let g = two_edges();
        let teg = extend_graph(&g, 2, true).unwrap();
        let h = TimeDependentPotential::Stationary(
            Potential::local(vec![1.0, 0.0], vec![0.0, 1.0], 2.0).unwrap(),
        );
        let ht = extend_potential(&h, &teg).unwrap();
        let mut i = vec![0.0; teg.graph().edge_count()];
        i[teg.edge(EdgeId(1), 1).0] = 1.0;
        i[teg.edge(EdgeId(0), 2).0] = 2.0;
        i[teg.deposit_edge(NodeId(1), 1).unwrap().0] = 7.0;
        assert_eq!(ht.value(&i), 0.5 + 2.0);
        let grad = ht.gradient_values(&i);
        assert_eq!(grad[teg.deposit_edge(NodeId(1), 1).unwrap().0], 0.0);
    }

    #[test]
    fn short_horizon_is_infeasible() {
        let chain = DirectedGraph::new(3, &[(0, 1), (1, 2)]).unwrap();
        let h = TimeDependentPotential::Stationary(
            Potential::local(vec![1.0, 1.0], vec![0.0; 2], 2.0).unwrap(),
        );
        let err = solve_dynamic(
            &chain,
            &h,
            &NodeMeasure::dirac(3, NodeId(0)),
            &NodeMeasure::dirac(3, NodeId(2)),
            1,
            &FrankWolfeOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            DynamicError::Beckmann(BeckmannError::Infeasible(_))
        ));
    }

    #[test]
    fn constant_metric_chain_moves_in_lockstep() {
        let chain = DirectedGraph::new(4, &[(0, 0), (0, 1), (1, 2), (2, 3)]).unwrap();
        let h = TimeDependentPotential::Stationary(
            Potential::local(vec![1.0; 4], vec![0.0; 4], 2.0).unwrap(),
        );
        let sol = solve_dynamic(
            &chain,
            &h,
            &NodeMeasure::dirac(4, NodeId(0)),
            &NodeMeasure::dirac(4, NodeId(3)),
            6,
            &FrankWolfeOptions::default(),
        )
        .unwrap();
        assert_eq!(active_horizon(&sol.extended, &sol.result.flow, 1e-12), 3);
        let empty = EdgeFlow::zeros(sol.extended.graph().edge_count());
        assert_eq!(active_horizon(&sol.extended, &empty, 1e-12), 0);
    }
}
