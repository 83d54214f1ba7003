mod common;

use congestion_core::graph::{self, Metric, NodeId, Tolerances};
use proptest::prelude::*;

proptest! {
    #[test]
    fn triangle_inequality((g, xi) in common::graph_with_metric(7, 0.0f64..5.0)) {
        let xi = Metric::nonnegative(xi).unwrap();
        let all: Vec<_> = g.nodes().map(|x| graph::shortest_distances(&g, &xi, &[x]).unwrap()).collect();
        for x in g.nodes() {
            for y in g.nodes() {
                for z in g.nodes() {
                    let (xy, yz, xz) = (all[x.0].distance(y), all[y.0].distance(z), all[x.0].distance(z));
                    if xy.is_finite() && yz.is_finite() {
                        prop_assert!(xz <= xy + yz + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn integer_metrics_match_brute_force((g, xi) in common::graph_with_metric(7, (0u8..10).prop_map(f64::from))) {
        let xi = Metric::nonnegative(xi).unwrap();
        for x in g.nodes() {
            let sp = graph::shortest_distances(&g, &xi, &[x]).unwrap();
            for y in g.nodes() {
                let brute = graph::enumerate_simple_paths(&g, x, y)
                    .iter()
                    .map(|p| graph::path_length(&g, &xi, p).unwrap())
                    .fold(f64::INFINITY, f64::min);
                prop_assert_eq!(sp.distance(y), brute);
            }
        }
    }

    #[test]
    fn float_metrics_match_brute_force((g, xi) in common::graph_with_metric(6, 0.0f64..3.0)) {
        let xi = Metric::nonnegative(xi).unwrap();
        let x = NodeId(0);
        let sp = graph::shortest_distances(&g, &xi, &[x]).unwrap();
        for y in g.nodes() {
            let brute = graph::enumerate_simple_paths(&g, x, y)
                .iter()
                .map(|p| graph::path_length(&g, &xi, p).unwrap())
                .fold(f64::INFINITY, f64::min);
            prop_assert!((sp.distance(y) - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn traced_paths_are_geodesics((g, xi) in common::graph_with_metric(7, 0.0f64..5.0)) {
        let xi = Metric::nonnegative(xi).unwrap();
        let tol = Tolerances::default();
        for x in g.nodes() {
            let sp = graph::shortest_distances(&g, &xi, &[x]).unwrap();
            for y in g.nodes() {
                let path = sp.trace(&g, y).expect("strongly connected");
                prop_assert_eq!(path.start(), x);
                prop_assert_eq!(path.end(), y);
                prop_assert!(graph::geodesic_check(&g, &xi, &path, &tol).unwrap());
            }
        }
    }

    #[test]
    fn potentials_are_subsolutions((g, xi) in common::graph_with_metric(7, -1.0f64..5.0)) {
        let xi = Metric::signed(xi).unwrap();
        let tol = Tolerances::default();
        if let Ok(u) = graph::potential_from_metric(&g, &xi, &tol) {
            for e in g.edge_ids() {
                let (x, y) = g.endpoints(e);
                prop_assert!(u[y] - u[x] <= xi[e] + tol.loop_condition);
            }
        } else {
            prop_assert!(!graph::nonneg_loop_check(&g, &xi, &tol).unwrap().holds());
        }
    }

    #[test]
    fn subsolutions_are_lipschitz((g, xi) in common::graph_with_metric(7, 0.0f64..5.0), shift in -3.0f64..3.0) {
        let xi = Metric::nonnegative(xi).unwrap();
        let tol = Tolerances::default();
        let u = graph::potential_from_metric(&g, &xi, &tol).unwrap().shifted(shift);
        let all: Vec<_> = g.nodes().map(|x| graph::shortest_distances(&g, &xi, &[x]).unwrap()).collect();
        for x in g.nodes() {
            for y in g.nodes() {
                let diff = u[y] - u[x];
                prop_assert!(diff <= all[x.0].distance(y) + 1e-9);
                prop_assert!(-all[y.0].distance(x) - 1e-9 <= diff);
            }
        }
    }
}
