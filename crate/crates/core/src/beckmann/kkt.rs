//! Certificates: constitutive residuals, multiplier recovery, support bounds.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::constraint::DivergenceConstraint;
use super::potential::Potential;
use super::BeckmannError;
use crate::flow::{self, EdgeFlow, NodeFunction};
use crate::graph::{
    self, DirectedGraph, EdgeId, GraphError, LoopCondition, Metric, NodeId, Tolerances,
};

/// Residuals of the optimality system at `(i, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    /// `max_e |min{i(e), ∂_e H(i) − Du(e)}|`.
    pub constitutive: f64,
    /// Edge attaining the constitutive residual.
    pub worst_edge: Option<EdgeId>,
    /// Violation of the divergence constraint family.
    pub divergence: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.constitutive.max(self.divergence)
    }
}

/// Evaluates `min{i, ∇H(i) − Du} = 0` and the divergence conditions.
pub fn kkt_residual(
    graph: &DirectedGraph,
    i: &EdgeFlow,
    u: &NodeFunction,
    h: &Potential,
    constraint: &DivergenceConstraint,
) -> Result<KktReport, BeckmannError> {
    DirectedGraph::check_len(graph.edge_count(), i.len())?;
    DirectedGraph::check_len(graph.node_count(), u.len())?;
    DirectedGraph::check_len(graph.edge_count(), h.edge_count())?;
    let g = h.gradient_values(i.values());
    let du = flow::gradient(graph, u);
    let mut constitutive = 0.0f64;
    let mut worst_edge = None;
    for e in 0..g.len() {
        let r = libm::fabs(i.values()[e].min(g[e] - du[e]));
        if r > constitutive || (r.is_nan() && worst_edge.is_none()) {
            constitutive = r;
            worst_edge = Some(EdgeId(e));
        }
    }
    let div = flow::divergence(graph, i);
    Ok(KktReport {
        constitutive,
        worst_edge,
        divergence: constraint.residual(&div, u),
    })
}

/// Result of [`multiplier_recover`].
#[derive(Clone, Debug, PartialEq)]
pub enum MultiplierOutcome {
    /// `u` with `min{i, ξ − Du} = 0`.
    Recovered(NodeFunction),
    /// `ξ(e) ≠ −ξ(−e)` for a pair of active opposite edges.
    NotOdd { edge: EdgeId, reverse: EdgeId },
    /// The symmetrized metric has a negative loop.
    NegativeLoop { witness: Vec<String>, length: f64 },
}

impl MultiplierOutcome {
    pub fn potential(&self) -> Option<&NodeFunction> {
        match self {
            MultiplierOutcome::Recovered(u) => Some(u),
            _ => None,
        }
    }
}

/// Finds `u` with `min{i, ξ − Du} = 0`, when one exists.
///
/// Active edges `{i > τ}` must carry an odd metric; the reversed active edges
/// enter with `−ξ`, which turns the equality on the support into an
/// inequality, and `u` is the potential of the symmetrized metric when that
/// metric satisfies the non-negative loop condition.
pub fn multiplier_recover(
    graph: &DirectedGraph,
    i: &EdgeFlow,
    xi: &Metric,
    tol: &Tolerances,
) -> Result<MultiplierOutcome, BeckmannError> {
    DirectedGraph::check_len(graph.edge_count(), i.len())?;
    let active = i.support(tol.positivity);
    let sym = match graph::symmetrize(graph, &active, xi, tol) {
        Ok(sym) => sym,
        Err(GraphError::NotOdd { edge, reverse, .. }) => {
            return Ok(MultiplierOutcome::NotOdd {
                edge: EdgeId(edge),
                reverse: EdgeId(reverse),
            })
        }
        Err(other) => return Err(other.into()),
    };
    match graph::nonneg_loop_check(&sym.graph, &sym.metric, tol)? {
        LoopCondition::Violated { witness, length } => {
            Ok(MultiplierOutcome::NegativeLoop { witness, length })
        }
        LoopCondition::Satisfied => Ok(MultiplierOutcome::Recovered(graph::potential_from_metric(
            &sym.graph,
            &sym.metric,
            tol,
        )?)),
    }
}

/// Multiplier for any constraint family, with `ξ = ∇H(i)`.
///
/// Target and capacity constraints are reduced to a fixed measure by adding a
/// sink node joined from every target (and a source node joining every
/// source) with zero-cost edges carrying the absorbed (emitted) mass; the
/// multiplier is then shifted to vanish at the added sink.
pub fn constraint_multiplier(
    graph: &DirectedGraph,
    i: &EdgeFlow,
    h: &Potential,
    constraint: &DivergenceConstraint,
    tol: &Tolerances,
) -> Result<MultiplierOutcome, BeckmannError> {
    DirectedGraph::check_len(graph.edge_count(), i.len())?;
    let g = h.gradient_values(i.values());
    let (entry, exit): (BTreeSet<NodeId>, BTreeSet<NodeId>) = match constraint {
        DivergenceConstraint::FixedMeasure(_) => {
            return multiplier_recover(graph, i, &Metric::signed(g)?, tol);
        }
        DivergenceConstraint::TargetSet { targets, .. } => (BTreeSet::new(), targets.clone()),
        DivergenceConstraint::Capacity { sources, sinks } => (sources.clone(), sinks.clone()),
    };
    let n = graph.node_count();
    let div = flow::divergence(graph, i);
    let mut names = graph.node_names().to_vec();
    let sink = n;
    names.push(fresh_name(&names, "sink"));
    let source = n + 1;
    if !entry.is_empty() {
        names.push(fresh_name(&names, "source"));
    }
    let mut pairs: Vec<(usize, usize)> = graph
        .edge_ids()
        .map(|e| (graph.tail(e).0, graph.head(e).0))
        .collect();
    let mut values = i.values().to_vec();
    let mut metric = g;
    for &y in &exit {
        pairs.push((y.0, sink));
        values.push((-div[y]).max(0.0));
        metric.push(0.0);
    }
    for &x in &entry {
        pairs.push((source, x.0));
        values.push(div[x].max(0.0));
        metric.push(0.0);
    }
    let augmented = DirectedGraph::with_names(names, &pairs)?;
    let flow = EdgeFlow::new(values)?;
    let outcome = multiplier_recover(&augmented, &flow, &Metric::signed(metric)?, tol)?;
    Ok(match outcome {
        MultiplierOutcome::Recovered(v) => {
            let base = v.values()[sink];
            MultiplierOutcome::Recovered(NodeFunction::new(
                v.values()[..n].iter().map(|x| x - base).collect(),
            ))
        }
        other => other,
    })
}

fn fresh_name(names: &[String], base: &str) -> String {
    let mut candidate = format!("#{base}");
    while names.contains(&candidate) {
        candidate.push('#');
    }
    candidate
}

/// Both sides of the support bounds for a flow and metric.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBoundReport {
    /// `in-diam_ξ({i > 0})`.
    pub inner_diameter: f64,
    /// `diam_ξ({div i > 0}, {div i < 0})`.
    pub diameter: f64,
    /// Most edges on a `ξ`-geodesic inside `{i > 0}`.
    pub inner_hops: usize,
    /// `diam_𝟙({div i > 0}, {div i < 0})`.
    pub unit_diameter: f64,
    /// `min ξ` and `max ξ`.
    pub min_metric: f64,
    pub max_metric: f64,
    /// `in-diam_ξ ≤ diam_ξ` (within the geodesic tolerance).
    pub inner_diameter_bounded: bool,
    /// `(M/m)·diam_𝟙`, or `None` when `min ξ ≤ 0` and the bound is vacuous.
    pub hop_bound: Option<f64>,
    /// `inner_hops ≤ (M/m)·diam_𝟙`; `None` when the hypothesis is unmet.
    pub hop_bound_holds: Option<bool>,
}

/// Compares the inner diameter of the support of `i` with the diameter
/// between the source and sink sets of `div i`.
///
/// Brute force over simple paths inside the support, so desk-scale only.
pub fn support_bound_report(
    graph: &DirectedGraph,
    i: &EdgeFlow,
    xi: &Metric,
    tol: &Tolerances,
) -> Result<SupportBoundReport, BeckmannError> {
    DirectedGraph::check_len(graph.edge_count(), i.len())?;
    let support = i.support(tol.positivity);
    let (inner_diameter, inner_hops) = inner_geodesics(graph, xi, &support, tol)?;
    let div = flow::divergence(graph, i);
    let sources = div.support_above(tol.positivity);
    let sinks: Vec<NodeId> = graph
        .nodes()
        .filter(|&x| div[x] < -tol.positivity)
        .collect();
    let diameter = graph::diameter(graph, xi, &sources, &sinks)?;
    let unit_diameter =
        graph::diameter(graph, &Metric::unit(graph.edge_count()), &sources, &sinks)?;
    let (min_metric, max_metric) = if xi.is_empty() {
        (0.0, 0.0)
    } else {
        (xi.min(), xi.max())
    };
    let hop_bound = (min_metric > 0.0).then(|| max_metric / min_metric * unit_diameter);
    Ok(SupportBoundReport {
        inner_diameter,
        diameter,
        inner_hops,
        unit_diameter,
        min_metric,
        max_metric,
        inner_diameter_bounded: inner_diameter <= diameter + tol.geodesic,
        hop_bound,
        hop_bound_holds: hop_bound.map(|b| inner_hops as f64 <= b + tol.geodesic),
    })
}

/// Longest length and largest hop count over geodesics inside `edges`.
fn inner_geodesics(
    graph: &DirectedGraph,
    xi: &Metric,
    edges: &BTreeSet<EdgeId>,
    tol: &Tolerances,
) -> Result<(f64, usize), GraphError> {
    let tails: BTreeSet<NodeId> = edges.iter().map(|&e| graph.tail(e)).collect();
    let mut longest = 0.0f64;
    let mut hops = 0;
    for &x in &tails {
        let sp = graph::shortest_distances(graph, xi, &[x])?;
        for y in graph.nodes() {
            if y == x || !sp.distance(y).is_finite() {
                continue;
            }
            for path in graph::enumerate_simple_paths_within(graph, x, y, |e| edges.contains(&e)) {
                let length = graph::path_length(graph, xi, &path)?;
                if libm::fabs(length - sp.distance(y)) <= tol.geodesic {
                    longest = longest.max(length);
                    hops = hops.max(path.hop_count());
                }
            }
        }
    }
    Ok((longest, hops))
}
