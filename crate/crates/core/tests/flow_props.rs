mod common;

use congestion_core::flow::{self, EdgeFlow, NodeFunction, PathProfile};
use congestion_core::graph::{DirectedGraph, Metric, NodeId, Tolerances};
use congestion_core::smirnov::wardrop_certificate;
use proptest::prelude::*;

fn profile(g: &DirectedGraph, specs: &[(usize, Vec<usize>, f64)]) -> PathProfile {
    let atoms = specs
        .iter()
        .map(|(s, c, w)| (common::walk(g, NodeId(s % g.node_count()), c), *w));
    PathProfile::normalized(g, atoms).unwrap()
}

proptest! {
    #[test]
    fn divergence_of_a_profile_is_start_minus_end(g in common::graph(8, true), specs in common::walk_specs()) {
        let q = profile(&g, &specs);
        let div = flow::divergence(&g, &flow::edge_flow(&g, &q));
        let (start, end) = flow::marginals(&flow::transport_plan(&g, &q));
        for x in g.nodes() {
            prop_assert!((div[x] - (start[x] - end[x])).abs() <= 1e-12);
        }
    }

    #[test]
    fn integration_by_parts((g, i) in common::graph_with_metric(8, 0.0f64..2.0), seed in proptest::collection::vec(-2.0f64..2.0, 8)) {
        let u = NodeFunction::new(seed[..g.node_count()].to_vec());
        let i = EdgeFlow::new(i).unwrap();
        let lhs = flow::pairing(u.values(), flow::divergence(&g, &i).values());
        let rhs = -flow::pairing(&flow::gradient(&g, &u), i.values());
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn expected_length_dominates_expected_distance(
        (g, xi) in common::graph_with_metric(7, 0.0f64..3.0),
        specs in common::walk_specs(),
    ) {
        let q = profile(&g, &specs);
        let xi = Metric::nonnegative(xi).unwrap();
        let tol = Tolerances::default();
        let report = wardrop_certificate(&g, &q, |_| xi.clone(), &tol).unwrap();
        prop_assert!(report.gap >= -1e-12);
        let all_geodesic = report.paths.iter().all(|p| p.geodesic);
        prop_assert_eq!(report.gap <= tol.geodesic, all_geodesic);
    }

    #[test]
    fn loop_erasure_never_costs_more(
        (g, xi) in common::graph_with_metric(7, 0.0f64..3.0),
        specs in common::walk_specs(),
    ) {
        let q = profile(&g, &specs);
        let erased = flow::loop_erasure(&q);
        for (path, _) in erased.iter() {
            prop_assert!(path.is_simple());
        }
        let before = flow::pairing(&xi, flow::edge_flow(&g, &q).values());
        let after = flow::pairing(&xi, flow::edge_flow(&g, &erased).values());
        prop_assert!(after <= before + 1e-12);
        let (a0, b0) = flow::marginals(&flow::transport_plan(&g, &q));
        let (a1, b1) = flow::marginals(&flow::transport_plan(&g, &erased));
        prop_assert!(a0.max_distance(&a1) <= 1e-12 && b0.max_distance(&b1) <= 1e-12);
    }
}
