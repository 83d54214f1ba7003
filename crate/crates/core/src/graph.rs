//! Finite directed graphs, paths and (signed) edge metrics.
//!
//! Distances are computed by a label-correcting Bellman–Ford pass so that
//! signed metrics work. A relaxation is only accepted when it improves a label
//! by more than a small threshold, and a cycle in the predecessor forest is
//! reported as a negative loop the moment it appears.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Index;

/// Index of a node in a [`DirectedGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

/// Index of an edge in a [`DirectedGraph`], in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl EdgeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node index {index} out of range for {count} nodes")]
    NodeOutOfRange { index: usize, count: usize },
    #[error("duplicate edge ({tail}, {head})")]
    DuplicateEdge { tail: String, head: String },
    #[error("({from}, {to}) is not an edge of the graph")]
    InvalidPath { from: String, to: String },
    #[error("empty node sequence is not a path")]
    EmptyPath,
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("metric value {value} on edge {edge} is not admissible")]
    InvalidMetricValue { edge: usize, value: f64 },
    #[error("negative loop {witness:?} with length {length}")]
    NegativeLoop { witness: Vec<String>, length: f64 },
    #[error("metric is not odd on edges {edge} and {reverse}: {value} vs {reverse_value}")]
    NotOdd {
        edge: usize,
        reverse: usize,
        value: f64,
        reverse_value: f64,
    },
}

/// Absolute tolerances shared by the certification routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Slack allowed between a path length and the distance it should realize.
    pub geodesic: f64,
    /// Loops shorter than `-loop_condition` are reported as negative.
    pub loop_condition: f64,
    /// Entries at or below this value count as zero flow.
    pub positivity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            geodesic: 1e-9,
            loop_condition: 1e-9,
            positivity: 1e-12,
        }
    }
}

/// Relaxation threshold used by [`shortest_distances`]: far below any
/// meaningful length, far above accumulated rounding of O(1) sums.
pub const DEFAULT_RELAXATION: f64 = 1e-13;

/// A finite directed graph with at most one edge per ordered pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectedGraph {
    names: Vec<String>,
    edges: Vec<(NodeId, NodeId)>,
    out: Vec<Vec<EdgeId>>,
    inc: Vec<Vec<EdgeId>>,
    lookup: BTreeMap<(NodeId, NodeId), EdgeId>,
}

impl DirectedGraph {
    /// Graph on nodes named `"0"`, `"1"`, … with edges given by index pairs.
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let names = (0..node_count).map(|k| k.to_string()).collect();
        Self::with_names(names, edges)
    }

    /// Graph with explicit node names and edges given by index pairs.
    pub fn with_names(names: Vec<String>, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(GraphError::DuplicateNode(name.clone()));
            }
        }
        let n = names.len();
        let mut graph = DirectedGraph {
            names,
            edges: Vec::with_capacity(edges.len()),
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
            lookup: BTreeMap::new(),
        };
        for &(tail, head) in edges {
            for index in [tail, head] {
                if index >= n {
                    return Err(GraphError::NodeOutOfRange { index, count: n });
                }
            }
            let key = (NodeId(tail), NodeId(head));
            if graph.lookup.contains_key(&key) {
                return Err(GraphError::DuplicateEdge {
                    tail: graph.names[tail].clone(),
                    head: graph.names[head].clone(),
                });
            }
            let id = EdgeId(graph.edges.len());
            graph.edges.push(key);
            graph.out[tail].push(id);
            graph.inc[head].push(id);
            graph.lookup.insert(key, id);
        }
        Ok(graph)
    }

    /// Graph from node names and edges given by name pairs.
    pub fn from_named<S: AsRef<str>>(names: &[S], edges: &[(S, S)]) -> Result<Self, GraphError> {
        let owned: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        let index: BTreeMap<&str, usize> = owned
            .iter()
            .enumerate()
            .map(|(k, s)| (s.as_str(), k))
            .collect();
        let mut pairs = Vec::with_capacity(edges.len());
        for (tail, head) in edges {
            let find = |s: &S| {
                index
                    .get(s.as_ref())
                    .copied()
                    .ok_or_else(|| GraphError::UnknownNode(s.as_ref().to_string()))
            };
            pairs.push((find(tail)?, find(head)?));
        }
        Self::with_names(owned, &pairs)
    }

    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.names.len()).map(NodeId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> + '_ {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn node_name(&self, x: NodeId) -> &str {
        &self.names[x.0]
    }

    pub fn node_names(&self) -> &[String] {
        &self.names
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.names.iter().position(|s| s == name).map(NodeId)
    }

    /// `(tail, head)` of an edge.
    pub fn endpoints(&self, e: EdgeId) -> (NodeId, NodeId) {
        self.edges[e.0]
    }

    pub fn tail(&self, e: EdgeId) -> NodeId {
        self.edges[e.0].0
    }

    pub fn head(&self, e: EdgeId) -> NodeId {
        self.edges[e.0].1
    }

    pub fn edge_between(&self, tail: NodeId, head: NodeId) -> Option<EdgeId> {
        self.lookup.get(&(tail, head)).copied()
    }

    /// The edge `−e` with swapped endpoints, if present.
    pub fn reverse(&self, e: EdgeId) -> Option<EdgeId> {
        let (x, y) = self.edges[e.0];
        self.edge_between(y, x)
    }

    pub fn out_edges(&self, x: NodeId) -> &[EdgeId] {
        &self.out[x.0]
    }

    pub fn in_edges(&self, x: NodeId) -> &[EdgeId] {
        &self.inc[x.0]
    }

    fn names_of(&self, nodes: &[NodeId]) -> Vec<String> {
        nodes.iter().map(|&x| self.names[x.0].clone()).collect()
    }

    pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), GraphError> {
        if expected == found {
            Ok(())
        } else {
            Err(GraphError::LengthMismatch { expected, found })
        }
    }
}

/// A walk `(x₀, …, x_ℓ)` through consecutive edges; loops are allowed.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    /// Validates that consecutive nodes are joined by edges of `graph`.
    pub fn new(graph: &DirectedGraph, nodes: Vec<NodeId>) -> Result<Self, GraphError> {
        if nodes.is_empty() {
            return Err(GraphError::EmptyPath);
        }
        for &x in &nodes {
            if x.0 >= graph.node_count() {
                return Err(GraphError::NodeOutOfRange {
                    index: x.0,
                    count: graph.node_count(),
                });
            }
        }
        for pair in nodes.windows(2) {
            if graph.edge_between(pair[0], pair[1]).is_none() {
                return Err(GraphError::InvalidPath {
                    from: graph.node_name(pair[0]).to_string(),
                    to: graph.node_name(pair[1]).to_string(),
                });
            }
        }
        Ok(Path { nodes })
    }

    /// Same as [`Path::new`] with node names.
    pub fn from_names<S: AsRef<str>>(
        graph: &DirectedGraph,
        names: &[S],
    ) -> Result<Self, GraphError> {
        let nodes = names
            .iter()
            .map(|s| {
                graph
                    .node_by_name(s.as_ref())
                    .ok_or_else(|| GraphError::UnknownNode(s.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(graph, nodes)
    }

    pub fn trivial(x: NodeId) -> Self {
        Path { nodes: vec![x] }
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<NodeId>) -> Self {
        debug_assert!(!nodes.is_empty());
        Path { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn start(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn end(&self) -> NodeId {
        self.nodes[self.nodes.len() - 1]
    }

    /// Number of edges `ℓ`.
    pub fn hop_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    /// True when no node repeats.
    pub fn is_simple(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.nodes.iter().all(|x| seen.insert(*x))
    }

    /// Edge sequence in `graph`, with repetitions.
    pub fn edges(&self, graph: &DirectedGraph) -> Result<Vec<EdgeId>, GraphError> {
        self.nodes
            .windows(2)
            .map(|pair| {
                graph
                    .edge_between(pair[0], pair[1])
                    .ok_or_else(|| GraphError::InvalidPath {
                        from: graph.node_name(pair[0]).to_string(),
                        to: graph.node_name(pair[1]).to_string(),
                    })
            })
            .collect()
    }

    /// Node names, for reports.
    pub fn names(&self, graph: &DirectedGraph) -> Vec<String> {
        graph.names_of(&self.nodes)
    }
}

/// Whether a metric is known to be nonnegative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Nonnegative,
    Signed,
}

/// Per-edge values `ξ(e)`, aligned with edge declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    values: Vec<f64>,
    sign: Sign,
}

impl Metric {
    /// Finite, nonnegative values.
    pub fn nonnegative(values: Vec<f64>) -> Result<Self, GraphError> {
        for (edge, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(GraphError::InvalidMetricValue { edge, value });
            }
        }
        Ok(Metric {
            values,
            sign: Sign::Nonnegative,
        })
    }

    /// Finite values of either sign.
    pub fn signed(values: Vec<f64>) -> Result<Self, GraphError> {
        for (edge, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(GraphError::InvalidMetricValue { edge, value });
            }
        }
        Ok(Metric {
            values,
            sign: Sign::Signed,
        })
    }

    /// The unit metric `𝟙`, which measures hop counts.
    pub fn unit(edge_count: usize) -> Self {
        Metric {
            values: vec![1.0; edge_count],
            sign: Sign::Nonnegative,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn check(&self, graph: &DirectedGraph) -> Result<(), GraphError> {
        DirectedGraph::check_len(graph.edge_count(), self.values.len())
    }
}

impl Index<EdgeId> for Metric {
    type Output = f64;
    fn index(&self, e: EdgeId) -> &f64 {
        &self.values[e.0]
    }
}

/// `L_ξ(ω)`: sum of `ξ` over the edges of `ω`, counted with multiplicity.
pub fn path_length(graph: &DirectedGraph, xi: &Metric, path: &Path) -> Result<f64, GraphError> {
    xi.check(graph)?;
    Ok(path.edges(graph)?.iter().map(|&e| xi[e]).sum())
}

/// Output of [`shortest_distances`].
#[derive(Clone, Debug)]
pub struct ShortestPaths {
    dist: Vec<f64>,
    roots: Vec<bool>,
    geodesic_in: Vec<Vec<EdgeId>>,
}

impl ShortestPaths {
    /// `min` over sources of `d_ξ(source, x)`; `+∞` when unreachable.
    pub fn distance(&self, x: NodeId) -> f64 {
        self.dist[x.0]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    /// Edges `e` with `d(e⁻) + ξ(e) = d(e⁺)` entering `x`.
    pub fn geodesic_edges_into(&self, x: NodeId) -> &[EdgeId] {
        &self.geodesic_in[x.0]
    }

    /// All geodesic edges, sorted by index.
    pub fn geodesic_edges(&self) -> Vec<EdgeId> {
        let mut all: Vec<EdgeId> = self.geodesic_in.iter().flatten().copied().collect();
        all.sort();
        all
    }

    /// A geodesic from some source to `x` through the predecessor structure.
    ///
    /// Breadth-first search backwards from `x`, expanding predecessors in
    /// increasing node index: the fewest-hop geodesic, ties broken towards
    /// small indices. `None` when `x` is unreachable.
    pub fn trace(&self, graph: &DirectedGraph, x: NodeId) -> Option<Path> {
        if !self.dist[x.0].is_finite() {
            return None;
        }
        let n = self.dist.len();
        let mut next: Vec<Option<NodeId>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = VecDeque::new();
        seen[x.0] = true;
        queue.push_back(x);
        while let Some(y) = queue.pop_front() {
            if self.roots[y.0] {
                let mut nodes = vec![y];
                let mut cur = y;
                while let Some(z) = next[cur.0] {
                    nodes.push(z);
                    cur = z;
                }
                return Some(Path::from_nodes_unchecked(nodes));
            }
            let mut preds: Vec<NodeId> = self.geodesic_in[y.0]
                .iter()
                .map(|&e| graph.tail(e))
                .collect();
            preds.sort();
            for p in preds {
                if !seen[p.0] {
                    seen[p.0] = true;
                    next[p.0] = Some(y);
                    queue.push_back(p);
                }
            }
        }
        None
    }
}

/// Distances from a node set under a signed metric.
///
/// Errors with a witness loop when a loop of negative length is reachable.
pub fn shortest_distances(
    graph: &DirectedGraph,
    xi: &Metric,
    sources: &[NodeId],
) -> Result<ShortestPaths, GraphError> {
    shortest_distances_with(
        graph,
        xi,
        sources,
        DEFAULT_RELAXATION,
        Tolerances::default().geodesic,
    )
}

/// [`shortest_distances`] with explicit relaxation threshold and geodesic slack.
///
/// A label moves only when it improves by more than `relaxation`. At
/// quiescence every loop of `k` edges has length at least `−k·relaxation`;
/// every reported loop has length below `−relaxation`.
pub fn shortest_distances_with(
    graph: &DirectedGraph,
    xi: &Metric,
    sources: &[NodeId],
    relaxation: f64,
    geodesic_slack: f64,
) -> Result<ShortestPaths, GraphError> {
    xi.check(graph)?;
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<EdgeId>> = vec![None; n];
    let mut queued = vec![false; n];
    let mut queue = VecDeque::new();
    let mut sorted: Vec<NodeId> = sources.to_vec();
    sorted.sort();
    sorted.dedup();
    for &s in &sorted {
        if s.0 >= n {
            return Err(GraphError::NodeOutOfRange {
                index: s.0,
                count: n,
            });
        }
        dist[s.0] = 0.0;
        queued[s.0] = true;
        queue.push_back(s);
    }
    while let Some(x) = queue.pop_front() {
        queued[x.0] = false;
        for &e in graph.out_edges(x) {
            let y = graph.head(e);
            let candidate = dist[x.0] + xi[e];
            if candidate < dist[y.0] - relaxation {
                dist[y.0] = candidate;
                pred[y.0] = Some(e);
                if let Some(cycle) = predecessor_cycle(graph, &pred, x, y) {
                    let length = cycle.iter().map(|&e| xi[e]).sum();
                    let mut witness: Vec<NodeId> = cycle.iter().map(|&e| graph.tail(e)).collect();
                    witness.push(witness[0]);
                    return Err(GraphError::NegativeLoop {
                        witness: graph.names_of(&witness),
                        length,
                    });
                }
                if !queued[y.0] {
                    queued[y.0] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    let mut roots = vec![false; n];
    for &s in &sorted {
        roots[s.0] = pred[s.0].is_none();
    }
    let mut geodesic_in = vec![Vec::new(); n];
    for e in graph.edge_ids() {
        let (x, y) = graph.endpoints(e);
        if dist[x.0].is_finite() && libm::fabs(dist[x.0] + xi[e] - dist[y.0]) <= geodesic_slack {
            geodesic_in[y.0].push(e);
        }
    }
    Ok(ShortestPaths {
        dist,
        roots,
        geodesic_in,
    })
}

/// After setting `pred[y]` to an edge out of `x`, returns the loop through `y`
/// in forward edge order if the predecessor forest closed one.
fn predecessor_cycle(
    graph: &DirectedGraph,
    pred: &[Option<EdgeId>],
    x: NodeId,
    y: NodeId,
) -> Option<Vec<EdgeId>> {
    let mut cur = x;
    for _ in 0..=pred.len() {
        if cur == y {
            let mut edges = Vec::new();
            let mut z = y;
            loop {
                let e = pred[z.0].expect("loop nodes have predecessors");
                edges.push(e);
                z = graph.tail(e);
                if z == y {
                    break;
                }
            }
            edges.reverse();
            return Some(edges);
        }
        cur = graph.tail(pred[cur.0]?);
    }
    None
}

/// True iff `L_ξ(ω) = d_ξ(ω⁻, ω⁺)` up to `tol.geodesic`.
///
/// When a negative loop is reachable the distance is `−∞` and no path is a
/// geodesic.
pub fn geodesic_check(
    graph: &DirectedGraph,
    xi: &Metric,
    path: &Path,
    tol: &Tolerances,
) -> Result<bool, GraphError> {
    let length = path_length(graph, xi, path)?;
    match shortest_distances(graph, xi, &[path.start()]) {
        Ok(sp) => Ok(libm::fabs(length - sp.distance(path.end())) <= tol.geodesic),
        Err(GraphError::NegativeLoop { .. }) => Ok(false),
        Err(other) => Err(other),
    }
}

/// Every loop-free path from `x` to `y`, in depth-first order over edge
/// indices. Exponential in general; intended as a brute-force oracle.
pub fn enumerate_simple_paths(graph: &DirectedGraph, x: NodeId, y: NodeId) -> Vec<Path> {
    enumerate_simple_paths_within(graph, x, y, |_| true)
}

/// [`enumerate_simple_paths`] restricted to edges accepted by `allowed`.
pub fn enumerate_simple_paths_within<F>(
    graph: &DirectedGraph,
    x: NodeId,
    y: NodeId,
    allowed: F,
) -> Vec<Path>
where
    F: Fn(EdgeId) -> bool,
{
    fn walk<F: Fn(EdgeId) -> bool>(
        graph: &DirectedGraph,
        target: NodeId,
        allowed: &F,
        stack: &mut Vec<NodeId>,
        on_stack: &mut [bool],
        found: &mut Vec<Path>,
    ) {
        let here = *stack.last().expect("nonempty stack");
        if here == target {
            found.push(Path::from_nodes_unchecked(stack.clone()));
            return;
        }
        for &e in graph.out_edges(here) {
            let next = graph.head(e);
            if on_stack[next.0] || !allowed(e) {
                continue;
            }
            on_stack[next.0] = true;
            stack.push(next);
            walk(graph, target, allowed, stack, on_stack, found);
            stack.pop();
            on_stack[next.0] = false;
        }
    }
    let mut found = Vec::new();
    let mut on_stack = vec![false; graph.node_count()];
    on_stack[x.0] = true;
    walk(graph, y, &allowed, &mut vec![x], &mut on_stack, &mut found);
    found
}

/// Outcome of [`nonneg_loop_check`].
#[derive(Clone, Debug, PartialEq)]
pub enum LoopCondition {
    Satisfied,
    Violated { witness: Vec<String>, length: f64 },
}

impl LoopCondition {
    pub fn holds(&self) -> bool {
        matches!(self, LoopCondition::Satisfied)
    }
}

/// Non-negative loop condition: every loop has `L_ξ ≥ −τ_loop`.
///
/// Loops of `k` edges with length in `[−k·τ_loop, −τ_loop)` are tolerated;
/// a reported witness always has length below `−τ_loop`.
pub fn nonneg_loop_check(
    graph: &DirectedGraph,
    xi: &Metric,
    tol: &Tolerances,
) -> Result<LoopCondition, GraphError> {
    let all: Vec<NodeId> = graph.nodes().collect();
    match shortest_distances_with(graph, xi, &all, tol.loop_condition, tol.geodesic) {
        Ok(_) => Ok(LoopCondition::Satisfied),
        Err(GraphError::NegativeLoop { witness, length }) => {
            Ok(LoopCondition::Violated { witness, length })
        }
        Err(other) => Err(other),
    }
}

/// `u(x) = min_{x₀} d_ξ(x₀, x)`, which satisfies `Du ≤ ξ + τ_loop` and `u ≤ 0`.
pub fn potential_from_metric(
    graph: &DirectedGraph,
    xi: &Metric,
    tol: &Tolerances,
) -> Result<crate::flow::NodeFunction, GraphError> {
    let all: Vec<NodeId> = graph.nodes().collect();
    let sp = shortest_distances_with(graph, xi, &all, tol.loop_condition, tol.geodesic)?;
    Ok(crate::flow::NodeFunction::new(sp.dist))
}

/// Provenance of an edge of a symmetrized graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymEdge {
    Original(EdgeId),
    /// `−e` for an edge `e` of the active set that had no reverse in `E`.
    Reversed(EdgeId),
}

/// `Sym_S(G)` with its odd metric `Sym_S[ξ]`.
#[derive(Clone, Debug)]
pub struct Symmetrized {
    pub graph: DirectedGraph,
    pub metric: Metric,
    pub origin: Vec<SymEdge>,
}

/// Adds `−e` with value `−ξ(e)` for every `e ∈ S`. When `−e` is already an
/// edge it keeps its index and takes the value `min{ξ(−e), −ξ(e)}`.
///
/// Requires `ξ(−e) = −ξ(e)` (within `tol.loop_condition`) whenever both
/// `±e ∈ S`; a self-loop in `S` therefore needs `ξ = 0`.
pub fn symmetrize(
    graph: &DirectedGraph,
    active: &BTreeSet<EdgeId>,
    xi: &Metric,
    tol: &Tolerances,
) -> Result<Symmetrized, GraphError> {
    xi.check(graph)?;
    for &e in active {
        if e.0 >= graph.edge_count() {
            return Err(GraphError::LengthMismatch {
                expected: graph.edge_count(),
                found: e.0 + 1,
            });
        }
        if let Some(r) = graph.reverse(e) {
            if active.contains(&r) && libm::fabs(xi[e] + xi[r]) > tol.loop_condition {
                return Err(GraphError::NotOdd {
                    edge: e.0,
                    reverse: r.0,
                    value: xi[e],
                    reverse_value: xi[r],
                });
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = graph
        .edge_ids()
        .map(|e| {
            let (x, y) = graph.endpoints(e);
            (x.0, y.0)
        })
        .collect();
    let mut values = xi.values().to_vec();
    let mut origin: Vec<SymEdge> = graph.edge_ids().map(SymEdge::Original).collect();
    for &e in active {
        match graph.reverse(e) {
            // A parallel copy of `−e` would only add `Du(−e) ≤ −ξ(e)`.
            Some(r) => values[r.0] = values[r.0].min(-xi[e]),
            None => {
                let (x, y) = graph.endpoints(e);
                pairs.push((y.0, x.0));
                values.push(-xi[e]);
                origin.push(SymEdge::Reversed(e));
            }
        }
    }
    Ok(Symmetrized {
        graph: DirectedGraph::with_names(graph.node_names().to_vec(), &pairs)?,
        metric: Metric::signed(values)?,
        origin,
    })
}

/// `in-diam_ξ(A)`: the longest geodesic whose edges all lie in `A`.
///
/// Brute force over simple paths inside `A`; zero-length loops never change
/// a geodesic's length, so simple paths suffice.
pub fn inner_diameter(
    graph: &DirectedGraph,
    xi: &Metric,
    edges: &BTreeSet<EdgeId>,
    tol: &Tolerances,
) -> Result<f64, GraphError> {
    xi.check(graph)?;
    let mut touched = BTreeSet::new();
    for &e in edges {
        touched.insert(graph.tail(e));
    }
    let mut best = 0.0f64;
    for &x in &touched {
        let sp = shortest_distances(graph, xi, &[x])?;
        for y in graph.nodes() {
            if y == x || !sp.distance(y).is_finite() {
                continue;
            }
            for path in enumerate_simple_paths_within(graph, x, y, |e| edges.contains(&e)) {
                let length = path_length(graph, xi, &path)?;
                if libm::fabs(length - sp.distance(y)) <= tol.geodesic {
                    best = best.max(length);
                }
            }
        }
    }
    Ok(best)
}

/// `diam_ξ(A, B) = max_{x∈A, y∈B} d_ξ(x, y)`; zero when either set is empty
/// and `+∞` when some pair is disconnected.
pub fn diameter(
    graph: &DirectedGraph,
    xi: &Metric,
    from: &[NodeId],
    to: &[NodeId],
) -> Result<f64, GraphError> {
    let mut best = 0.0f64;
    for &x in from {
        let sp = shortest_distances(graph, xi, &[x])?;
        for &y in to {
            best = best.max(sp.distance(y));
        }
    }
    Ok(best)
}

/// Pretty form `(a, b, c)` of a path.
pub fn format_path(graph: &DirectedGraph, path: &Path) -> String {
    format!("({})", path.names(graph).join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> (DirectedGraph, Metric) {
        let g = DirectedGraph::from_named(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")])
            .unwrap();
        (g, Metric::nonnegative(vec![1.0, 1.0, 3.0]).unwrap())
    }

    #[test]
    fn lengths_count_multiplicity() {
        let g = DirectedGraph::from_named(&["a"], &[("a", "a")]).unwrap();
        let xi = Metric::nonnegative(vec![0.3]).unwrap();
        let loop2 = Path::from_names(&g, &["a", "a", "a"]).unwrap();
        assert!((path_length(&g, &xi, &loop2).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(
            path_length(&g, &xi, &Path::trivial(NodeId(0))).unwrap(),
            0.0
        );
    }

    #[test]
    fn invalid_paths_and_graphs() {
        let (g, _) = triangle();
        assert!(matches!(
            Path::from_names(&g, &["c", "a"]),
            Err(GraphError::InvalidPath { .. })
        ));
        assert!(matches!(
            DirectedGraph::from_named(&["a", "b"], &[("a", "b"), ("a", "b")]),
            Err(GraphError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn triangle_distances_and_geodesics() {
        let (g, xi) = triangle();
        let sp = shortest_distances(&g, &xi, &[NodeId(0)]).unwrap();
        assert_eq!(sp.distances(), &[0.0, 1.0, 2.0]);
        let traced = sp.trace(&g, NodeId(2)).unwrap();
        assert_eq!(traced, Path::from_names(&g, &["a", "b", "c"]).unwrap());
        let tol = Tolerances::default();
        let direct = Path::from_names(&g, &["a", "c"]).unwrap();
        assert!(!geodesic_check(&g, &xi, &direct, &tol).unwrap());
        assert!(geodesic_check(&g, &xi, &traced, &tol).unwrap());
        assert!(geodesic_check(&g, &xi, &Path::trivial(NodeId(1)), &tol).unwrap());
    }

    #[test]
    fn unreachable_is_infinite() {
        let (g, xi) = triangle();
        let sp = shortest_distances(&g, &xi, &[NodeId(2)]).unwrap();
        assert_eq!(sp.distance(NodeId(0)), f64::INFINITY);
        assert!(sp.trace(&g, NodeId(0)).is_none());
    }

    #[test]
    fn negative_two_cycle_is_reported() {
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap();
        let xi = Metric::signed(vec![1.0, -2.0]).unwrap();
        match shortest_distances(&g, &xi, &[NodeId(0)]) {
            Err(GraphError::NegativeLoop { witness, length }) => {
                assert_eq!(witness.len(), 3);
                assert_eq!(witness.first(), witness.last());
                assert_eq!(length, -1.0);
            }
            other => panic!("expected negative loop, got {other:?}"),
        }
        let tol = Tolerances::default();
        assert!(!nonneg_loop_check(&g, &xi, &tol).unwrap().holds());
        let zero = Metric::signed(vec![1.0, -1.0]).unwrap();
        assert!(nonneg_loop_check(&g, &zero, &tol).unwrap().holds());
    }

    #[test]
    fn negative_self_loop_is_reported() {
        let g = DirectedGraph::from_named(&["a"], &[("a", "a")]).unwrap();
        let xi = Metric::signed(vec![-0.5]).unwrap();
        assert!(matches!(
            shortest_distances(&g, &xi, &[NodeId(0)]),
            Err(GraphError::NegativeLoop { .. })
        ));
    }

    #[test]
    fn zero_length_self_loop_traces_simple_path() {
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "a"), ("a", "b")]).unwrap();
        let xi = Metric::nonnegative(vec![0.0, 1.0]).unwrap();
        let sp = shortest_distances(&g, &xi, &[NodeId(0)]).unwrap();
        assert_eq!(sp.geodesic_edges(), vec![EdgeId(0), EdgeId(1)]);
        let path = sp.trace(&g, NodeId(1)).unwrap();
        assert!(path.is_simple());
        assert_eq!(path.hop_count(), 1);
    }

    #[test]
    fn simple_path_enumeration() {
        let g = DirectedGraph::from_named(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
        )
        .unwrap();
        assert_eq!(enumerate_simple_paths(&g, NodeId(0), NodeId(3)).len(), 2);
        assert_eq!(
            enumerate_simple_paths(&g, NodeId(0), NodeId(0)),
            vec![Path::trivial(NodeId(0))]
        );
        assert!(enumerate_simple_paths(&g, NodeId(3), NodeId(0)).is_empty());
    }

    #[test]
    fn potentials_from_metrics() {
        let tol = Tolerances::default();
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "b")]).unwrap();
        let u = potential_from_metric(&g, &Metric::nonnegative(vec![1.0]).unwrap(), &tol).unwrap();
        assert_eq!(u.values(), &[0.0, 0.0]);
        let g2 = DirectedGraph::from_named(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap();
        let xi = Metric::signed(vec![1.0, -1.0]).unwrap();
        let u = potential_from_metric(&g2, &xi, &tol).unwrap();
        let du = crate::flow::gradient(&g2, &u);
        assert_eq!(du, vec![1.0, -1.0]);
    }

    #[test]
    fn symmetrization_examples() {
        let tol = Tolerances::default();
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "b")]).unwrap();
        let xi = Metric::nonnegative(vec![2.0]).unwrap();
        let none = symmetrize(&g, &BTreeSet::new(), &xi, &tol).unwrap();
        assert_eq!(none.graph, g);
        let s = symmetrize(&g, &[EdgeId(0)].into_iter().collect(), &xi, &tol).unwrap();
        assert_eq!(s.graph.edge_count(), 2);
        assert_eq!(s.graph.endpoints(EdgeId(1)), (NodeId(1), NodeId(0)));
        assert_eq!(s.metric.values(), &[2.0, -2.0]);
        assert_eq!(s.origin[1], SymEdge::Reversed(EdgeId(0)));

        let g2 = DirectedGraph::from_named(&["a", "b"], &[("a", "b"), ("b", "a")]).unwrap();
        let zero = Metric::nonnegative(vec![0.0, 0.0]).unwrap();
        let both: BTreeSet<EdgeId> = [EdgeId(0), EdgeId(1)].into_iter().collect();
        let s2 = symmetrize(&g2, &both, &zero, &tol).unwrap();
        assert_eq!(s2.graph.edge_count(), 2);
        let odd_fail = Metric::nonnegative(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            symmetrize(&g2, &both, &odd_fail, &tol),
            Err(GraphError::NotOdd { .. })
        ));
    }

    #[test]
    fn diameters() {
        let tol = Tolerances::default();
        let chain = DirectedGraph::from_named(&["a", "b", "c"], &[("a", "b"), ("b", "c")]).unwrap();
        let unit = Metric::unit(2);
        let all: BTreeSet<EdgeId> = chain.edge_ids().collect();
        assert_eq!(inner_diameter(&chain, &unit, &all, &tol).unwrap(), 2.0);
        assert_eq!(
            inner_diameter(&chain, &unit, &BTreeSet::new(), &tol).unwrap(),
            0.0
        );
        let (g, xi) = triangle();
        let shortcut: BTreeSet<EdgeId> = [EdgeId(2)].into_iter().collect();
        assert_eq!(inner_diameter(&g, &xi, &shortcut, &tol).unwrap(), 0.0);
        assert_eq!(
            diameter(&g, &xi, &[NodeId(0)], &[NodeId(1), NodeId(2)]).unwrap(),
            2.0
        );
        assert_eq!(
            diameter(&g, &xi, &[NodeId(2)], &[NodeId(0)]).unwrap(),
            f64::INFINITY
        );
    }
}
