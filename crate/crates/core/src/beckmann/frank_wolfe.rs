//! Frank–Wolfe over feasible flows with an exact all-or-nothing oracle.

use alloc::vec;
use alloc::vec::Vec;

use super::constraint::DivergenceConstraint;
use super::potential::{check_sign, line_search, Potential};
use super::BeckmannError;
use crate::flow::{add_path_flow, EdgeFlow};
use crate::graph::{self, DirectedGraph, Metric, NodeId};
use crate::transport::{self, TransportError};
use crate::Certification;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrankWolfeVariant {
    /// Steps towards the oracle vertex.
    Classic,
    /// Moves weight from the worst active vertex to the oracle vertex;
    /// converges linearly here and keeps supports exact.
    Pairwise,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrankWolfeOptions {
    /// Stop once the duality gap `∇H(i)·(i − s)` is at most this.
    pub tol: f64,
    pub max_iter: usize,
    pub variant: FrankWolfeVariant,
}

impl Default for FrankWolfeOptions {
    fn default() -> Self {
        FrankWolfeOptions {
            tol: 1e-9,
            max_iter: 10_000,
            variant: FrankWolfeVariant::Pairwise,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FrankWolfeResult {
    pub flow: EdgeFlow,
    /// Duality gap at each visited iterate; the last entry belongs to `flow`.
    pub gap_history: Vec<f64>,
    /// `H` at each visited iterate.
    pub objective_history: Vec<f64>,
    pub best_gap: f64,
    pub iterations: usize,
    pub objective: f64,
    /// `∇H(flow)`.
    pub metric: Metric,
    pub certification: Certification,
}

impl FrankWolfeResult {
    pub fn gap(&self) -> f64 {
        self.gap_history.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn converged(&self) -> bool {
        self.certification != Certification::NotConverged
    }
}

/// Minimizes `H` over flows `i ≥ 0` with `div i` in the constraint set.
///
/// Every iterate is a convex combination of all-or-nothing flows: the oracle
/// sends the demand along geodesics of `ξ_k = ∇H(i_k)`, pairing sources and
/// sinks by an exact transportation simplex for fixed measures.
pub fn solve_beckmann_frank_wolfe(
    graph: &DirectedGraph,
    h: &Potential,
    constraint: &DivergenceConstraint,
    opts: &FrankWolfeOptions,
) -> Result<FrankWolfeResult, BeckmannError> {
    if h.edge_count() != graph.edge_count() {
        return Err(BeckmannError::Dimension {
            expected: graph.edge_count(),
            found: h.edge_count(),
        });
    }
    constraint.validate(graph.node_count())?;
    let convex = h.is_convex();
    let sign_check = h.needs_sign_check();
    let m = graph.edge_count();

    let mut grad = h.gradient_values(&vec![0.0; m]);
    if sign_check {
        check_sign(&grad)?;
    }
    let first = oracle(graph, constraint, &grad)?;
    let mut atoms: Vec<(Vec<f64>, f64)> = vec![(first.clone(), 1.0)];
    let mut i = first;
    let mut history = Vec::new();
    let mut objectives = Vec::new();
    let mut best_gap = f64::INFINITY;
    let mut converged = false;
    let mut k = 0;
    loop {
        grad = h.gradient_values(&i);
        if sign_check {
            check_sign(&grad)?;
        }
        let s = oracle(graph, constraint, &grad)?;
        let gap: f64 = grad
            .iter()
            .zip(i.iter().zip(&s))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        history.push(gap);
        objectives.push(h.value(&i));
        best_gap = best_gap.min(gap);
        if gap <= opts.tol {
            converged = true;
            break;
        }
        if k == opts.max_iter {
            break;
        }
        k += 1;
        match opts.variant {
            FrankWolfeVariant::Classic => {
                let d: Vec<f64> = s.iter().zip(&i).map(|(a, b)| a - b).collect();
                let slope = -gap;
                let mut alpha = line_search(h, &i, &d, slope, 1.0);
                if !alpha.is_finite() {
                    alpha = 2.0 / (k as f64 + 2.0);
                }
                for (x, y) in i.iter_mut().zip(&d) {
                    *x += alpha * y;
                }
            }
            FrankWolfeVariant::Pairwise => {
                let away = atoms
                    .iter()
                    .enumerate()
                    .map(|(idx, (a, _))| (idx, dot(&grad, a)))
                    .fold((0, f64::NEG_INFINITY), |best, cur| {
                        if cur.1 > best.1 {
                            cur
                        } else {
                            best
                        }
                    })
                    .0;
                let (away_vec, away_weight) = atoms[away].clone();
                let d: Vec<f64> = s.iter().zip(&away_vec).map(|(a, b)| a - b).collect();
                let slope = dot(&grad, &d);
                let mut alpha = line_search(h, &i, &d, slope, away_weight);
                if !alpha.is_finite() {
                    alpha = away_weight.min(2.0 / (k as f64 + 2.0));
                }
                let fallback = alpha <= 0.0;
                if fallback {
                    // No progress along the pairwise direction: take a classic
                    // step, which always descends when the gap is positive.
                    let d: Vec<f64> = s.iter().zip(&i).map(|(a, b)| a - b).collect();
                    let alpha = line_search(h, &i, &d, -gap, 1.0);
                    for (_, w) in atoms.iter_mut() {
                        *w *= 1.0 - alpha;
                    }
                    add_atom(&mut atoms, s, alpha);
                } else {
                    atoms[away].1 -= alpha;
                    if alpha >= away_weight {
                        atoms.swap_remove(away);
                    }
                    add_atom(&mut atoms, s, alpha);
                }
                atoms.retain(|(_, w)| *w > 0.0);
                if fallback || k % 50 == 0 {
                    let total: f64 = atoms.iter().map(|(_, w)| w).sum();
                    for (_, w) in atoms.iter_mut() {
                        *w /= total;
                    }
                    i = combine(&atoms, m);
                } else {
                    for (x, y) in i.iter_mut().zip(&d) {
                        *x += alpha * y;
                    }
                }
            }
        }
    }
    if opts.variant == FrankWolfeVariant::Pairwise {
        i = combine(&atoms, m);
    }
    let flow = EdgeFlow::from_rounded(i, 1e-9)?;
    let grad = h.gradient_values(flow.values());
    let certification = match (converged, convex) {
        (false, _) => Certification::NotConverged,
        (true, true) => Certification::Global,
        (true, false) => Certification::StationaryOnly,
    };
    Ok(FrankWolfeResult {
        objective: h.value(flow.values()),
        flow,
        gap_history: history,
        objective_history: objectives,
        best_gap,
        iterations: k,
        metric: Metric::signed(grad)?,
        certification,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(atoms: &[(Vec<f64>, f64)], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m];
    for (a, w) in atoms {
        for (o, x) in out.iter_mut().zip(a) {
            *o += w * x;
        }
    }
    out
}

fn add_atom(atoms: &mut Vec<(Vec<f64>, f64)>, s: Vec<f64>, weight: f64) {
    if weight <= 0.0 {
        return;
    }
    match atoms.iter_mut().find(|(a, _)| *a == s) {
        Some((_, w)) => *w += weight,
        None => atoms.push((s, weight)),
    }
}

/// All-or-nothing flow minimizing `ξ·s` over feasible vertices.
fn oracle(
    graph: &DirectedGraph,
    constraint: &DivergenceConstraint,
    grad: &[f64],
) -> Result<Vec<f64>, BeckmannError> {
    // Gradients pass a −1e-12 sign check; clamping keeps the oracle metric
    // free of spurious negative loops at a cost far below any tolerance.
    let xi = Metric::signed(grad.iter().map(|g| g.max(0.0)).collect())?;
    let mut s = vec![0.0; graph.edge_count()];
    match constraint {
        DivergenceConstraint::FixedMeasure(f) => {
            let sources: Vec<NodeId> = graph.nodes().filter(|x| f[*x] > 0.0).collect();
            let sinks: Vec<NodeId> = graph.nodes().filter(|x| f[*x] < 0.0).collect();
            let mut trees = Vec::with_capacity(sources.len());
            let mut cost = Vec::with_capacity(sources.len());
            for &x in &sources {
                let sp = graph::shortest_distances(graph, &xi, &[x])?;
                cost.push(sinks.iter().map(|&y| sp.distance(y)).collect::<Vec<_>>());
                trees.push(sp);
            }
            let supply: Vec<f64> = sources.iter().map(|&x| f[x]).collect();
            let demand: Vec<f64> = sinks.iter().map(|&y| -f[y]).collect();
            let plan = transport::solve(&supply, &demand, &cost).map_err(|e| match e {
                TransportError::Infeasible { .. } => {
                    BeckmannError::Infeasible("some source cannot reach the sinks it must serve")
                }
                TransportError::Cycling => BeckmannError::Oracle("transportation simplex cycled"),
            })?;
            for (r, c, mass) in plan {
                let path = trees[r]
                    .trace(graph, sinks[c])
                    .ok_or(BeckmannError::Oracle("planned pair is not connected"))?;
                add_path_flow(graph, &path, mass, &mut s);
            }
        }
        DivergenceConstraint::TargetSet { mu, targets } => {
            for x in graph.nodes() {
                if mu[x] <= 0.0 || targets.contains(&x) {
                    continue;
                }
                let sp = graph::shortest_distances(graph, &xi, &[x])?;
                let best = targets
                    .iter()
                    .copied()
                    .filter(|y| sp.distance(*y).is_finite())
                    .fold(None, |best: Option<NodeId>, y| match best {
                        Some(b) if sp.distance(b) <= sp.distance(y) => Some(b),
                        _ => Some(y),
                    })
                    .ok_or(BeckmannError::Infeasible(
                        "a loaded node cannot reach the target set",
                    ))?;
                let path = sp
                    .trace(graph, best)
                    .expect("finite distance has a geodesic");
                add_path_flow(graph, &path, mu[x], &mut s);
            }
        }
        DivergenceConstraint::Capacity { sources, sinks } => {
            let from: Vec<NodeId> = sources.iter().copied().collect();
            let sp = graph::shortest_distances(graph, &xi, &from)?;
            let best = sinks
                .iter()
                .copied()
                .filter(|y| sp.distance(*y).is_finite())
                .fold(None, |best: Option<NodeId>, y| match best {
                    Some(b) if sp.distance(b) <= sp.distance(y) => Some(b),
                    _ => Some(y),
                })
                .ok_or(BeckmannError::Infeasible(
                    "no sink is reachable from the sources",
                ))?;
            let path = sp
                .trace(graph, best)
                .expect("finite distance has a geodesic");
            add_path_flow(graph, &path, 1.0, &mut s);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::NodeMeasure;
    use crate::graph::EdgeId;
    use alloc::collections::BTreeSet;

    fn pigou() -> (DirectedGraph, Potential) {
        let g = DirectedGraph::from_named(&["a", "b", "m"], &[("a", "b"), ("a", "m"), ("m", "b")])
            .unwrap();
        let h = Potential::local(vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], 2.0).unwrap();
        (g, h)
    }

    #[test]
    fn single_edge() {
        let g = DirectedGraph::new(2, &[(0, 1)]).unwrap();
        let h = Potential::local(vec![1.0], vec![1.0], 2.0).unwrap();
        let c = DivergenceConstraint::FixedMeasure(NodeMeasure::new(vec![1.0, -1.0]));
        let r = solve_beckmann_frank_wolfe(&g, &h, &c, &FrankWolfeOptions::default()).unwrap();
        assert_eq!(r.flow.values(), &[1.0]);
        assert_eq!(r.certification, Certification::Global);
    }

    #[test]
    fn pigou_routes_everything_on_the_congestible_edge() {
        let (g, h) = pigou();
        let c = DivergenceConstraint::FixedMeasure(NodeMeasure::new(vec![1.0, -1.0, 0.0]));
        for variant in [FrankWolfeVariant::Classic, FrankWolfeVariant::Pairwise] {
            let opts = FrankWolfeOptions {
                variant,
                ..Default::default()
            };
            let r = solve_beckmann_frank_wolfe(&g, &h, &c, &opts).unwrap();
            assert!((r.flow[EdgeId(0)] - 1.0).abs() < 1e-9);
            assert!(r.gap() <= 1e-9);
        }
    }

    #[test]
    fn symmetric_split() {
        let g = DirectedGraph::from_named(&["a", "b", "m"], &[("a", "b"), ("a", "m"), ("m", "b")])
            .unwrap();
        // Route costs i and i: quadratic on the direct edge and on the first leg.
        let h = Potential::local(vec![0.0; 3], vec![1.0, 1.0, 0.0], 2.0).unwrap();
        let c = DivergenceConstraint::FixedMeasure(NodeMeasure::new(vec![1.0, -1.0, 0.0]));
        let r = solve_beckmann_frank_wolfe(&g, &h, &c, &FrankWolfeOptions::default()).unwrap();
        assert!((r.flow[EdgeId(0)] - 0.5).abs() < 1e-8);
        assert!((r.flow[EdgeId(1)] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn disconnected_demand_is_infeasible() {
        let g = DirectedGraph::new(3, &[(0, 1)]).unwrap();
        let h = Potential::local(vec![1.0], vec![0.0], 2.0).unwrap();
        let c = DivergenceConstraint::FixedMeasure(NodeMeasure::new(vec![1.0, 0.0, -1.0]));
        let err =
            solve_beckmann_frank_wolfe(&g, &h, &c, &FrankWolfeOptions::default()).unwrap_err();
        assert!(matches!(err, BeckmannError::Infeasible(_)));
    }

    #[test]
    fn target_and_capacity_pick_nearest() {
        let g = DirectedGraph::new(4, &[(0, 1), (1, 2), (0, 3)]).unwrap();
        let h = Potential::local(vec![1.0; 3], vec![0.0; 3], 2.0).unwrap();
        let targets: BTreeSet<NodeId> = [NodeId(2), NodeId(3)].into_iter().collect();
        let c = DivergenceConstraint::TargetSet {
            mu: NodeMeasure::dirac(4, NodeId(0)),
            targets: targets.clone(),
        };
        let r = solve_beckmann_frank_wolfe(&g, &h, &c, &FrankWolfeOptions::default()).unwrap();
        assert_eq!(r.flow.values(), &[0.0, 0.0, 1.0]);
        let c = DivergenceConstraint::Capacity {
            sources: [NodeId(0), NodeId(1)].into_iter().collect(),
            sinks: targets,
        };
        let r = solve_beckmann_frank_wolfe(&g, &h, &c, &FrankWolfeOptions::default()).unwrap();
        assert_eq!(r.flow.values()[0], 0.0);
        assert_eq!(r.flow.values().iter().sum::<f64>(), 1.0);
    }
}
