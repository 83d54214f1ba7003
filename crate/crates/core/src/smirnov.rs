//! Smirnov decomposition of flows into path profiles, and Wardrop
//! certificates for profiles.
//!
//! The decomposition follows the constructive induction: walk from a source
//! along positive edges, peel any loop met on the way, stop at a sink, and
//! subtract the largest admissible mass `m` along the path found. Loop mass is
//! discarded, which is why only `i[q] ≤ i` is guaranteed.

use alloc::collections::btree_map::{BTreeMap, Entry};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::flow::{self, EdgeFlow, FlowError, PathProfile};
use crate::graph::{self, DirectedGraph, EdgeId, GraphError, Metric, NodeId, Path, Tolerances};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmirnovError {
    #[error("(div i)± must be probability measures; masses are {positive} and {negative}")]
    Precondition { positive: f64, negative: f64 },
    #[error("node {node} has no outgoing edge above the positivity threshold")]
    Stalled { node: String },
    #[error("start node {0} does not have positive divergence")]
    NotASource(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Thresholds for [`smirnov_decompose`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmirnovOptions {
    /// Values at or below this count as zero.
    pub positivity: f64,
    /// Allowed deviation of `Σ (div i)±` from one.
    pub mass: f64,
}

impl Default for SmirnovOptions {
    fn default() -> Self {
        SmirnovOptions {
            positivity: 1e-12,
            mass: 1e-9,
        }
    }
}

/// Result of [`smirnov_decompose`].
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub profile: PathProfile,
    /// `i − i[q]`: a nonnegative flow with zero divergence (loops).
    pub residual: EdgeFlow,
    /// Number of peeling steps performed.
    pub steps: usize,
}

/// A path from `x` into `{div i < 0}` using only edges with `i(e) > τ`.
///
/// Loops met on the way are peeled off a working copy of `i`, exactly as in
/// the inductive proof; the input flow is not modified.
pub fn positive_path_to_sink(
    graph: &DirectedGraph,
    i: &EdgeFlow,
    x: NodeId,
    positivity: f64,
) -> Result<Path, SmirnovError> {
    DirectedGraph::check_len(graph.edge_count(), i.len())?;
    let mut work: Vec<f64> = i
        .values()
        .iter()
        .map(|&v| if v > positivity { v } else { 0.0 })
        .collect();
    let div = flow::divergence_of(graph, &work);
    if div[x] <= positivity {
        return Err(SmirnovError::NotASource(graph.node_name(x).into()));
    }
    walk_to_sink(graph, &mut work, x, |y| div[y] < -positivity, positivity)
}

fn walk_to_sink<F>(
    graph: &DirectedGraph,
    work: &mut [f64],
    x: NodeId,
    is_sink: F,
    positivity: f64,
) -> Result<Path, SmirnovError>
where
    F: Fn(NodeId) -> bool,
{
    let mut nodes = vec![x];
    let mut position: Vec<Option<usize>> = vec![None; graph.node_count()];
    position[x.0] = Some(0);
    loop {
        let here = *nodes.last().expect("walk is nonempty");
        if here != x && is_sink(here) {
            return Ok(Path::from_nodes_unchecked(nodes));
        }
        let step = graph
            .out_edges(here)
            .iter()
            .copied()
            .find(|&e| work[e.0] > positivity && graph.head(e) != here);
        let Some(e) = step else {
            return Err(SmirnovError::Stalled {
                node: graph.node_name(here).into(),
            });
        };
        let next = graph.head(e);
        match position[next.0] {
            Some(k) => {
                let mut cycle: Vec<EdgeId> = nodes[k..]
                    .windows(2)
                    .map(|w| graph.edge_between(w[0], w[1]).expect("walk edge"))
                    .collect();
                cycle.push(e);
                let m = cycle
                    .iter()
                    .map(|c| work[c.0])
                    .fold(f64::INFINITY, f64::min);
                for c in &cycle {
                    work[c.0] -= m;
                    if work[c.0] <= positivity {
                        work[c.0] = 0.0;
                    }
                }
                for y in nodes.drain(k + 1..) {
                    position[y.0] = None;
                }
            }
            None => {
                position[next.0] = Some(nodes.len());
                nodes.push(next);
            }
        }
    }
}

/// Decomposes `i` into a path profile `q` with `γ[q] ∈ Π((div i)⁺, (div i)⁻)`
/// and `i[q] ≤ i`, supported on simple paths.
///
/// Sources are processed in increasing node index and the smallest admissible
/// edge index is taken at every step, so the output is deterministic.
pub fn smirnov_decompose(
    graph: &DirectedGraph,
    i: &EdgeFlow,
    opts: &SmirnovOptions,
) -> Result<Decomposition, SmirnovError> {
    DirectedGraph::check_len(graph.edge_count(), i.len())?;
    let tau = opts.positivity;
    let mut work: Vec<f64> = i
        .values()
        .iter()
        .map(|&v| if v > tau { v } else { 0.0 })
        .collect();
    let div = flow::divergence_of(graph, &work);
    let mut mu: Vec<f64> = div.positive_part().into_values();
    let mut nu: Vec<f64> = div.negative_part().into_values();
    for v in mu.iter_mut().chain(nu.iter_mut()) {
        if *v <= tau {
            *v = 0.0;
        }
    }
    let (pos, neg): (f64, f64) = (mu.iter().sum(), nu.iter().sum());
    if libm::fabs(pos - 1.0) > opts.mass || libm::fabs(neg - 1.0) > opts.mass {
        return Err(SmirnovError::Precondition {
            positive: pos,
            negative: neg,
        });
    }
    let budget = work.len() + 2 * graph.node_count() + 1;
    let mut atoms: Vec<(Path, f64)> = Vec::new();
    let mut steps = 0;
    while let Some(x) = (0..mu.len()).find(|&k| mu[k] > tau).map(NodeId) {
        if steps > budget {
            return Err(SmirnovError::Stalled {
                node: graph.node_name(x).into(),
            });
        }
        let nu_snapshot = nu.clone();
        let path = walk_to_sink(graph, &mut work, x, |y| nu_snapshot[y.0] > tau, tau)?;
        let edges = path.edges(graph)?;
        let y = path.end();
        let m = edges
            .iter()
            .map(|e| work[e.0])
            .fold(mu[x.0].min(nu[y.0]), f64::min);
        for e in &edges {
            work[e.0] -= m;
            if work[e.0] <= tau {
                work[e.0] = 0.0;
            }
        }
        mu[x.0] = if mu[x.0] - m <= tau { 0.0 } else { mu[x.0] - m };
        nu[y.0] = if nu[y.0] - m <= tau { 0.0 } else { nu[y.0] - m };
        atoms.push((path, m));
        steps += 1;
    }
    let profile = flow::loop_erasure(&PathProfile::normalized(graph, atoms)?);
    let peeled = flow::edge_flow(graph, &profile);
    let residual = EdgeFlow::from_rounded(
        i.values()
            .iter()
            .zip(peeled.values())
            .map(|(a, b)| a - b)
            .collect(),
        opts.mass,
    )?;
    Ok(Decomposition {
        profile,
        residual,
        steps,
    })
}

/// Per-path entry of a [`WardropReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct PathCheck {
    pub path: Path,
    pub weight: f64,
    pub length: f64,
    pub distance: f64,
    pub geodesic: bool,
}

/// Outcome of [`wardrop_certificate`].
#[derive(Clone, Debug, PartialEq)]
pub struct WardropReport {
    /// `E_q[L_ξ] − E_{γ[q]}[d_ξ] ≥ 0`.
    pub gap: f64,
    pub paths: Vec<PathCheck>,
    pub equilibrium: bool,
    /// The metric `ξ = g(i[q])` used for the check.
    pub metric: Metric,
}

/// Checks whether `q` is a Wardrop equilibrium for the cost map `cost`,
/// i.e. whether every path in its support is a geodesic for `ξ = cost(i[q])`.
pub fn wardrop_certificate<F>(
    graph: &DirectedGraph,
    q: &PathProfile,
    cost: F,
    tol: &Tolerances,
) -> Result<WardropReport, GraphError>
where
    F: FnOnce(&EdgeFlow) -> Metric,
{
    let i = flow::edge_flow(graph, q);
    let xi = cost(&i);
    let mut by_start: BTreeMap<NodeId, graph::ShortestPaths> = BTreeMap::new();
    let mut paths = Vec::with_capacity(q.len());
    let mut expected_length = 0.0;
    let mut expected_distance = 0.0;
    for (path, weight) in q.iter() {
        if let Entry::Vacant(slot) = by_start.entry(path.start()) {
            slot.insert(graph::shortest_distances(graph, &xi, &[path.start()])?);
        }
        let distance = by_start[&path.start()].distance(path.end());
        let length = graph::path_length(graph, &xi, path)?;
        expected_length += weight * length;
        expected_distance += weight * distance;
        paths.push(PathCheck {
            path: path.clone(),
            weight,
            length,
            distance,
            geodesic: libm::fabs(length - distance) <= tol.geodesic,
        });
    }
    let gap = expected_length - expected_distance;
    Ok(WardropReport {
        gap,
        paths,
        equilibrium: gap <= tol.geodesic,
        metric: xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(g: &DirectedGraph, p: &Path) -> Vec<String> {
        p.names(g)
    }

    #[test]
    fn single_edge_and_chain() {
        let g = DirectedGraph::from_named(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let chain = EdgeFlow::new(vec![1.0, 1.0]).unwrap();
        let p = positive_path_to_sink(&g, &chain, NodeId(0), 1e-12).unwrap();
        assert_eq!(names(&g, &p), ["a", "b", "c"]);
        let d = smirnov_decompose(&g, &chain, &SmirnovOptions::default()).unwrap();
        assert_eq!(d.profile, PathProfile::dirac(p));
        assert_eq!(d.residual.values(), &[0.0, 0.0]);

        let single = EdgeFlow::new(vec![1.0, 0.0]).unwrap();
        let d = smirnov_decompose(&g, &single, &SmirnovOptions::default()).unwrap();
        assert_eq!(d.profile.len(), 1);
        assert_eq!(d.steps, 1);
    }

    #[test]
    fn loops_are_peeled() {
        // chain a → b → c with a cycle b → d → b attached
        let g = DirectedGraph::from_named(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("d", "b"), ("b", "c")],
        )
        .unwrap();
        let i = EdgeFlow::new(vec![1.0, 0.5, 0.5, 1.0]).unwrap();
        let p = positive_path_to_sink(&g, &i, NodeId(0), 1e-12).unwrap();
        assert_eq!(names(&g, &p), ["a", "b", "c"]);
        let d = smirnov_decompose(&g, &i, &SmirnovOptions::default()).unwrap();
        assert_eq!(d.profile, PathProfile::dirac(p));
        assert_eq!(d.residual.values(), &[0.0, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn diamond_splits_evenly() {
        let g = DirectedGraph::from_named(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
        )
        .unwrap();
        let i = EdgeFlow::new(vec![0.5; 4]).unwrap();
        let d = smirnov_decompose(&g, &i, &SmirnovOptions::default()).unwrap();
        assert_eq!(d.profile.len(), 2);
        for (_, w) in d.profile.iter() {
            assert_eq!(w, 0.5);
        }
    }

    #[test]
    fn unbalanced_flow_is_rejected() {
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "b")]).unwrap();
        let i = EdgeFlow::new(vec![2.0]).unwrap();
        assert!(matches!(
            smirnov_decompose(&g, &i, &SmirnovOptions::default()),
            Err(SmirnovError::Precondition { .. })
        ));
    }

    #[test]
    fn certificate_detects_shortcut() {
        let g = DirectedGraph::from_named(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")])
            .unwrap();
        let xi = Metric::nonnegative(vec![1.0, 1.0, 3.0]).unwrap();
        let tol = Tolerances::default();
        let good = PathProfile::dirac(Path::from_names(&g, &["a", "b", "c"]).unwrap());
        let r = wardrop_certificate(&g, &good, |_| xi.clone(), &tol).unwrap();
        assert!(r.equilibrium);
        assert_eq!(r.gap, 0.0);
        let mixed = PathProfile::new(
            &g,
            [
                (Path::from_names(&g, &["a", "b", "c"]).unwrap(), 0.75),
                (Path::from_names(&g, &["a", "c"]).unwrap(), 0.25),
            ],
        )
        .unwrap();
        let r = wardrop_certificate(&g, &mixed, |_| xi.clone(), &tol).unwrap();
        assert!(!r.equilibrium);
        assert!((r.gap - 0.25).abs() < 1e-15);
    }
}
