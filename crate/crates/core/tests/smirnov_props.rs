mod common;

use std::collections::BTreeSet;

use congestion_core::flow::{self, EdgeFlow, PathProfile};
use congestion_core::graph::{DirectedGraph, NodeId};
use congestion_core::smirnov::{smirnov_decompose, SmirnovOptions};
use proptest::prelude::*;

/// A unit flow from node 0 to the last node plus circulations around the ring.
fn balanced_flow(
    g: &DirectedGraph,
    specs: &[(usize, Vec<usize>, f64)],
    ring: f64,
) -> Option<EdgeFlow> {
    let n = g.node_count();
    let sink = NodeId(n - 1);
    let atoms: Vec<_> = specs
        .iter()
        .filter_map(|(_, c, w)| {
            let mut p = common::walk(g, NodeId(0), c);
            // Finish along the ring.
            let mut nodes = p.nodes().to_vec();
            while *nodes.last().unwrap() != sink {
                let x = nodes.last().unwrap().0;
                nodes.push(NodeId(x + 1));
            }
            p = congestion_core::graph::Path::new(g, nodes).ok()?;
            Some((p, *w))
        })
        .collect();
    let q = PathProfile::normalized(g, atoms).ok()?;
    let mut i = flow::edge_flow(g, &q).into_values();
    for k in 0..n {
        let e = g.edge_between(NodeId(k), NodeId((k + 1) % n)).unwrap();
        i[e.0] += ring;
    }
    EdgeFlow::new(i).ok()
}

proptest! {
    #[test]
    fn decomposition_round_trip(g in common::graph(7, true), specs in common::walk_specs(), ring in prop_oneof![Just(0.0), 0.0f64..1.0]) {
        let Some(i) = balanced_flow(&g, &specs, ring) else { return Ok(()); };
        let dec = smirnov_decompose(&g, &i, &SmirnovOptions::default()).unwrap();
        let iq = flow::edge_flow(&g, &dec.profile);
        for e in g.edge_ids() {
            prop_assert!(iq[e] <= i[e] + 1e-10);
            prop_assert!((iq[e] + dec.residual[e] - i[e]).abs() <= 1e-10);
        }
        let div = flow::divergence(&g, &i);
        let (a, b) = flow::marginals(&flow::transport_plan(&g, &dec.profile));
        prop_assert!(a.max_distance(&div.positive_part()) <= 1e-10);
        prop_assert!(b.max_distance(&div.negative_part()) <= 1e-10);
        for v in flow::divergence(&g, &dec.residual).values() {
            prop_assert!(v.abs() <= 1e-10);
        }
        for (path, _) in dec.profile.iter() {
            prop_assert!(path.is_simple());
        }
        let support: BTreeSet<_> = i.support(1e-12);
        let bound = support.len() + div.support_above(0.0).len() + div.negative_part().support_above(0.0).len();
        prop_assert!(dec.steps <= bound);
    }
}
