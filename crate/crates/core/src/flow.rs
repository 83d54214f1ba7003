//! Path profiles, transport plans, edge flows and the operators `div` and `D`.
//!
//! Edge flows count an edge once per occurrence in a path, so that
//! `div i[q] = π⁻[γ[q]] − π⁺[γ[q]]` and `Σ ξ·i[q] = E_q[L_ξ]` hold for loopy
//! paths too.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Index;

use crate::graph::{DirectedGraph, EdgeId, GraphError, NodeId, Path};

/// Slack on the total mass of a probability vector.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("weight {0} is not a positive finite number")]
    BadWeight(f64),
    #[error("weights sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("flow value {value} on edge {edge} is negative or not finite")]
    NegativeFlow { edge: usize, value: f64 },
    #[error("profile is empty")]
    EmptyProfile,
}

/// Nonnegative per-edge flow `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFlow(Vec<f64>);

impl EdgeFlow {
    pub fn new(values: Vec<f64>) -> Result<Self, FlowError> {
        for (edge, &value) in values.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                return Err(FlowError::NegativeFlow { edge, value });
            }
        }
        Ok(EdgeFlow(values))
    }

    pub fn zeros(edge_count: usize) -> Self {
        EdgeFlow(vec![0.0; edge_count])
    }

    /// Entries in `(−slack, 0)` are set to zero; anything more negative is an
    /// error. Used for differences of flows that are equal up to rounding.
    pub fn from_rounded(values: Vec<f64>, slack: f64) -> Result<Self, FlowError> {
        let cleaned = values
            .into_iter()
            .map(|v| if v < 0.0 && v > -slack { 0.0 } else { v })
            .collect();
        Self::new(cleaned)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Edges carrying more than `threshold`.
    pub fn support(&self, threshold: f64) -> alloc::collections::BTreeSet<EdgeId> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > threshold)
            .map(|(k, _)| EdgeId(k))
            .collect()
    }
}

impl Index<EdgeId> for EdgeFlow {
    type Output = f64;
    fn index(&self, e: EdgeId) -> &f64 {
        &self.0[e.0]
    }
}

/// Signed node masses, e.g. `f = div i`, `μ` or `ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMeasure(Vec<f64>);

impl NodeMeasure {
    pub fn new(values: Vec<f64>) -> Self {
        NodeMeasure(values)
    }

    pub fn zeros(node_count: usize) -> Self {
        NodeMeasure(vec![0.0; node_count])
    }

    /// Unit mass at `x`.
    pub fn dirac(node_count: usize, x: NodeId) -> Self {
        let mut values = vec![0.0; node_count];
        values[x.0] = 1.0;
        NodeMeasure(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Positive part `f⁺`.
    pub fn positive_part(&self) -> NodeMeasure {
        NodeMeasure(self.0.iter().map(|&v| v.max(0.0)).collect())
    }

    /// Negative part `f⁻ = (−f)⁺`.
    pub fn negative_part(&self) -> NodeMeasure {
        NodeMeasure(self.0.iter().map(|&v| (-v).max(0.0)).collect())
    }

    /// Nodes with value above `threshold`.
    pub fn support_above(&self, threshold: f64) -> Vec<NodeId> {
        (0..self.0.len())
            .filter(|&k| self.0[k] > threshold)
            .map(NodeId)
            .collect()
    }

    /// True for nonnegative entries summing to one within [`MASS_TOLERANCE`].
    pub fn is_probability(&self) -> bool {
        self.0.iter().all(|&v| v >= 0.0) && libm::fabs(self.total() - 1.0) <= MASS_TOLERANCE
    }

    /// `‖self − other‖∞`.
    pub fn max_distance(&self, other: &NodeMeasure) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max)
    }
}

impl Index<NodeId> for NodeMeasure {
    type Output = f64;
    fn index(&self, x: NodeId) -> &f64 {
        &self.0[x.0]
    }
}

/// Node potential `u`, typically a Lagrange multiplier.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeFunction(Vec<f64>);

impl NodeFunction {
    pub fn new(values: Vec<f64>) -> Self {
        NodeFunction(values)
    }

    pub fn zeros(node_count: usize) -> Self {
        NodeFunction(vec![0.0; node_count])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Adds a constant; potentials are defined up to constants.
    pub fn shifted(&self, c: f64) -> NodeFunction {
        NodeFunction(self.0.iter().map(|v| v + c).collect())
    }
}

impl Index<NodeId> for NodeFunction {
    type Output = f64;
    fn index(&self, x: NodeId) -> &f64 {
        &self.0[x.0]
    }
}

/// Probability distribution over finitely many paths.
#[derive(Clone, Debug, PartialEq)]
pub struct PathProfile {
    atoms: BTreeMap<Path, f64>,
}

impl PathProfile {
    /// Validates paths, merges repeated paths, and requires total mass one.
    pub fn new<I>(graph: &DirectedGraph, atoms: I) -> Result<Self, FlowError>
    where
        I: IntoIterator<Item = (Path, f64)>,
    {
        let merged = Self::merge(graph, atoms)?;
        let total: f64 = merged.values().sum();
        if libm::fabs(total - 1.0) > MASS_TOLERANCE {
            return Err(FlowError::NotNormalized(total));
        }
        Ok(PathProfile { atoms: merged })
    }

    /// Like [`PathProfile::new`] but rescales positive weights to total one.
    pub fn normalized<I>(graph: &DirectedGraph, atoms: I) -> Result<Self, FlowError>
    where
        I: IntoIterator<Item = (Path, f64)>,
    {
        let mut merged = Self::merge(graph, atoms)?;
        let total: f64 = merged.values().sum();
        if merged.is_empty() || !(total > 0.0) {
            return Err(FlowError::EmptyProfile);
        }
        for w in merged.values_mut() {
            *w /= total;
        }
        Ok(PathProfile { atoms: merged })
    }

    /// `δ_ω`.
    pub fn dirac(path: Path) -> Self {
        let mut atoms = BTreeMap::new();
        atoms.insert(path, 1.0);
        PathProfile { atoms }
    }

    fn merge<I>(graph: &DirectedGraph, atoms: I) -> Result<BTreeMap<Path, f64>, FlowError>
    where
        I: IntoIterator<Item = (Path, f64)>,
    {
        let mut merged = BTreeMap::new();
        for (path, weight) in atoms {
            if !(weight.is_finite() && weight > 0.0) {
                return Err(FlowError::BadWeight(weight));
            }
            path.edges(graph)?;
            *merged.entry(path).or_insert(0.0) += weight;
        }
        Ok(merged)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, f64)> + '_ {
        self.atoms.iter().map(|(p, &w)| (p, w))
    }

    pub fn weight(&self, path: &Path) -> f64 {
        self.atoms.get(path).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Joint law of `(ω⁻, ω⁺)`, stored densely as an `|N|×|N|` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    n: usize,
    entries: Vec<f64>,
}

impl TransportPlan {
    /// Validates nonnegativity and unit total mass.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self, FlowError> {
        if entries.len() != n * n {
            return Err(FlowError::Graph(GraphError::LengthMismatch {
                expected: n * n,
                found: entries.len(),
            }));
        }
        for &v in &entries {
            if !(v.is_finite() && v >= 0.0) {
                return Err(FlowError::BadWeight(v));
            }
        }
        let total: f64 = entries.iter().sum();
        if libm::fabs(total - 1.0) > MASS_TOLERANCE {
            return Err(FlowError::NotNormalized(total));
        }
        Ok(TransportPlan { n, entries })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: NodeId, y: NodeId) -> f64 {
        self.entries[x.0 * self.n + y.0]
    }

    /// Nonzero entries as `(x, y, mass)`, row-major.
    pub fn triplets(&self) -> Vec<(NodeId, NodeId, f64)> {
        let mut out = Vec::new();
        for x in 0..self.n {
            for y in 0..self.n {
                let v = self.entries[x * self.n + y];
                if v != 0.0 {
                    out.push((NodeId(x), NodeId(y), v));
                }
            }
        }
        out
    }
}

/// `γ[q](x, y) = P_q(ω⁻ = x, ω⁺ = y)`.
pub fn transport_plan(graph: &DirectedGraph, q: &PathProfile) -> TransportPlan {
    let n = graph.node_count();
    let mut entries = vec![0.0; n * n];
    for (path, w) in q.iter() {
        entries[path.start().0 * n + path.end().0] += w;
    }
    TransportPlan { n, entries }
}

/// `i[q](e) = Σ_ω q(ω)·(number of occurrences of e in ω)`.
pub fn edge_flow(graph: &DirectedGraph, q: &PathProfile) -> EdgeFlow {
    let mut values = vec![0.0; graph.edge_count()];
    for (path, w) in q.iter() {
        for e in path.edges(graph).expect("profile paths are validated") {
            values[e.0] += w;
        }
    }
    EdgeFlow(values)
}

/// Flow of mass `m` along each occurrence of an edge of `path`, added into `acc`.
pub(crate) fn add_path_flow(graph: &DirectedGraph, path: &Path, m: f64, acc: &mut [f64]) {
    for e in path.edges(graph).expect("validated path") {
        acc[e.0] += m;
    }
}

/// `div i(x) = Σ_{e⁻=x} i(e) − Σ_{e⁺=x} i(e)` for any per-edge vector.
pub fn divergence_of(graph: &DirectedGraph, values: &[f64]) -> NodeMeasure {
    let mut div = vec![0.0; graph.node_count()];
    for e in graph.edge_ids() {
        let (x, y) = graph.endpoints(e);
        div[x.0] += values[e.0];
        div[y.0] -= values[e.0];
    }
    NodeMeasure(div)
}

/// `div i` of an edge flow.
pub fn divergence(graph: &DirectedGraph, i: &EdgeFlow) -> NodeMeasure {
    divergence_of(graph, i.values())
}

/// `Du(e) = u(e⁺) − u(e⁻)`.
pub fn gradient(graph: &DirectedGraph, u: &NodeFunction) -> Vec<f64> {
    graph
        .edge_ids()
        .map(|e| {
            let (x, y) = graph.endpoints(e);
            u.0[y.0] - u.0[x.0]
        })
        .collect()
}

/// Row and column sums `(π⁻[γ], π⁺[γ])`.
pub fn marginals(plan: &TransportPlan) -> (NodeMeasure, NodeMeasure) {
    let n = plan.n;
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    for x in 0..n {
        for y in 0..n {
            let v = plan.entries[x * n + y];
            rows[x] += v;
            cols[y] += v;
        }
    }
    (NodeMeasure(rows), NodeMeasure(cols))
}

/// Chronological loop erasure of a single path.
pub fn erase_loops(path: &Path) -> Path {
    let mut out: Vec<NodeId> = Vec::with_capacity(path.nodes().len());
    for &x in path.nodes() {
        if let Some(pos) = out.iter().position(|&y| y == x) {
            out.truncate(pos + 1);
        } else {
            out.push(x);
        }
    }
    Path::from_nodes_unchecked(out)
}

/// Push-forward of `q` under loop erasure; atoms with the same image merge.
pub fn loop_erasure(q: &PathProfile) -> PathProfile {
    let mut atoms = BTreeMap::new();
    for (path, w) in q.iter() {
        *atoms.entry(erase_loops(path)).or_insert(0.0) += w;
    }
    PathProfile { atoms }
}

/// `Σ_e a(e)·b(e)`.
pub fn pairing(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> DirectedGraph {
        DirectedGraph::from_named(
            &["a", "b", "c", "d"],
            &[("a", "b"), ("b", "d"), ("a", "c"), ("c", "d")],
        )
        .unwrap()
    }

    fn p(g: &DirectedGraph, names: &[&str]) -> Path {
        Path::from_names(g, names).unwrap()
    }

    #[test]
    fn profile_validation() {
        let g = diamond();
        assert!(matches!(
            PathProfile::new(&g, [(p(&g, &["a", "b"]), 0.5)]),
            Err(FlowError::NotNormalized(_))
        ));
        assert!(matches!(
            PathProfile::new(&g, [(p(&g, &["a", "b"]), -1.0)]),
            Err(FlowError::BadWeight(_))
        ));
        let merged =
            PathProfile::new(&g, [(p(&g, &["a", "b"]), 0.5), (p(&g, &["a", "b"]), 0.5)]).unwrap();
        assert_eq!(merged.len(), 1);
        let scaled = PathProfile::normalized(&g, [(p(&g, &["a", "b"]), 3.0)]).unwrap();
        assert_eq!(scaled.weight(&p(&g, &["a", "b"])), 1.0);
    }

    #[test]
    fn plans_and_flows() {
        let g = DirectedGraph::from_named(&["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")])
            .unwrap();
        let q = PathProfile::new(
            &g,
            [(p(&g, &["a", "b", "c"]), 0.5), (p(&g, &["a", "c"]), 0.5)],
        )
        .unwrap();
        assert_eq!(edge_flow(&g, &q).values(), &[0.5, 0.5, 0.5]);
        let plan = transport_plan(&g, &q);
        assert_eq!(plan.get(NodeId(0), NodeId(2)), 1.0);
        let (rows, cols) = marginals(&plan);
        assert_eq!(rows.values(), &[1.0, 0.0, 0.0]);
        assert_eq!(cols.values(), &[0.0, 0.0, 1.0]);

        let two =
            PathProfile::new(&g, [(p(&g, &["a", "b"]), 0.5), (p(&g, &["a", "c"]), 0.5)]).unwrap();
        let plan2 = transport_plan(&g, &two);
        assert_eq!(plan2.get(NodeId(0), NodeId(1)), 0.5);
        assert_eq!(plan2.get(NodeId(0), NodeId(2)), 0.5);
    }

    #[test]
    fn double_loop_counts_twice() {
        let g = DirectedGraph::from_named(&["a"], &[("a", "a")]).unwrap();
        let q = PathProfile::dirac(p(&g, &["a", "a", "a"]));
        assert_eq!(edge_flow(&g, &q).values(), &[2.0]);
        assert_eq!(divergence(&g, &edge_flow(&g, &q)).values(), &[0.0]);
    }

    #[test]
    fn divergence_examples() {
        let g = diamond();
        let i = EdgeFlow::new(vec![0.5; 4]).unwrap();
        assert_eq!(divergence(&g, &i).values(), &[1.0, 0.0, 0.0, -1.0]);
        let single = DirectedGraph::from_named(&["a", "b"], &[("a", "b")]).unwrap();
        let two = EdgeFlow::new(vec![2.0]).unwrap();
        assert_eq!(divergence(&single, &two).values(), &[2.0, -2.0]);
    }

    #[test]
    fn gradient_examples() {
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "b"), ("b", "b")]).unwrap();
        assert_eq!(
            gradient(&g, &NodeFunction::new(vec![0.0, 1.0])),
            vec![1.0, 0.0]
        );
        assert_eq!(
            gradient(&g, &NodeFunction::new(vec![3.0, 3.0])),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn loop_erasure_examples() {
        let g = DirectedGraph::from_named(&["a", "b"], &[("a", "a"), ("a", "b")]).unwrap();
        let loopy = PathProfile::dirac(p(&g, &["a", "a", "b"]));
        assert_eq!(loop_erasure(&loopy), PathProfile::dirac(p(&g, &["a", "b"])));
        let mixed = PathProfile::new(
            &g,
            [(p(&g, &["a", "a", "b"]), 0.25), (p(&g, &["a", "b"]), 0.75)],
        )
        .unwrap();
        let erased = loop_erasure(&mixed);
        assert_eq!(erased.len(), 1);
        assert_eq!(erased.weight(&p(&g, &["a", "b"])), 1.0);
        let simple = PathProfile::dirac(p(&g, &["a", "b"]));
        assert_eq!(loop_erasure(&simple), simple);
    }

    #[test]
    fn product_plan_marginals() {
        let mu = [0.25, 0.75];
        let nu = [0.5, 0.5];
        let entries = vec![mu[0] * nu[0], mu[0] * nu[1], mu[1] * nu[0], mu[1] * nu[1]];
        let plan = TransportPlan::new(2, entries).unwrap();
        let (r, c) = marginals(&plan);
        assert_eq!(r.values(), &mu);
        assert_eq!(c.values(), &nu);
    }
}
