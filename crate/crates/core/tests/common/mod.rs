//! Random instances shared by the property tests.
#![allow(dead_code)]

use congestion_core::graph::{DirectedGraph, NodeId, Path};
use proptest::prelude::*;

/// Edge list on `n` nodes: a ring plus the pairs selected by `mask`.
pub fn edges_from_mask(n: usize, mask: &[bool], self_loops: bool) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
    for x in 0..n {
        for y in 0..n {
            if mask[x * n + y] && (x != y || self_loops) && !edges.contains(&(x, y)) {
                edges.push((x, y));
            }
        }
    }
    edges
}

/// Strongly connected graphs with `2..=max_n` nodes.
pub fn graph(max_n: usize, self_loops: bool) -> impl Strategy<Value = DirectedGraph> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(proptest::bool::weighted(0.3), n * n),
            )
        })
        .prop_map(move |(n, mask)| {
            DirectedGraph::new(n, &edges_from_mask(n, &mask, self_loops)).unwrap()
        })
}

/// A graph with one metric value per edge drawn from `values`.
pub fn graph_with_metric(
    max_n: usize,
    values: impl Strategy<Value = f64> + Clone + 'static,
) -> impl Strategy<Value = (DirectedGraph, Vec<f64>)> {
    graph(max_n, true).prop_flat_map(move |g| {
        let m = g.edge_count();
        (Just(g), proptest::collection::vec(values.clone(), m))
    })
}

/// Walk from `start` following the out-edges picked by `choices`.
pub fn walk(g: &DirectedGraph, start: NodeId, choices: &[usize]) -> Path {
    let mut nodes = vec![start];
    for &c in choices {
        let out = g.out_edges(*nodes.last().unwrap());
        nodes.push(g.head(out[c % out.len()]));
    }
    Path::new(g, nodes).unwrap()
}

/// Walks `(start, choices, weight)` to turn into path profiles.
pub fn walk_specs() -> impl Strategy<Value = Vec<(usize, Vec<usize>, f64)>> {
    proptest::collection::vec(
        (
            0usize..64,
            proptest::collection::vec(0usize..64, 0..7),
            0.01f64..1.0,
        ),
        1..6,
    )
}
