use congestion_core::beckmann::{kkt_residual, DivergenceConstraint, FrankWolfeOptions};
use congestion_core::dynamic::{self, TimeDependentPotential, TimeExtendedGraph};
use congestion_core::flow::NodeMeasure;
use congestion_core::graph::NodeId;
use congestion_core::roads::{self, SweepSchedule};
use nalgebra::DMatrix;
use proptest::prelude::*;

proptest! {
    #[test]
    fn t0_scan_matches_inverse_formula(beta in 0.01f64..5.0, eps in 0.01f64..5.0) {
        prop_assert_eq!(roads::compute_t0(beta, eps).unwrap(), roads::compute_t0_by_inverse(beta, eps).unwrap());
    }

    #[test]
    fn t0_is_monotone(beta in 0.0f64..3.0, eps in 0.01f64..3.0, db in 0.0f64..1.0, de in 0.0f64..1.0) {
        let a = roads::compute_t0(beta, eps).unwrap().unwrap();
        let b = roads::compute_t0(beta + db, eps + de).unwrap().unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn closed_form_solves_obstacle_problem(beta in 0.0f64..2.0, eps in 0.0f64..2.0, horizon in 1usize..25, mass in 0.1f64..5.0) {
        let closed = roads::one_road_solve_mass(horizon, beta, eps, mass).unwrap();
        let iterated = roads::one_road_obstacle_solve_mass(horizon, beta, eps, mass).unwrap();
        prop_assert!(closed.max_abs_difference(&iterated) <= 1e-8 * mass.max(1.0));
        prop_assert!(roads::obstacle_residual(&closed, beta, eps) <= 1e-10 * mass.max(1.0));
    }

    #[test]
    fn explicit_multiplier_solves_dynamic_equations(beta in 0.0f64..2.0, eps in 0.0f64..2.0, horizon in 1usize..12, linear in 0.0f64..1.0) {
        let j = roads::one_road_solve(horizon, beta, eps).unwrap();
        let teg = TimeExtendedGraph::new(&roads::one_road_graph(), horizon, true).unwrap();
        let i = roads::one_road_flow(&teg, &j).unwrap();
        let u = roads::one_road_multiplier(&teg, &j, beta, eps, linear).unwrap();
        let h = TimeDependentPotential::Stationary(roads::one_road_potential(beta, eps, linear).unwrap());
        let ht = dynamic::extend_potential(&h, &teg).unwrap();
        let (start, end) = dynamic::lift_measures(&teg, &NodeMeasure::dirac(2, NodeId(0)), &NodeMeasure::dirac(2, NodeId(1))).unwrap();
        let report = kkt_residual(teg.graph(), &i, &u, &ht, &DivergenceConstraint::transport(&start, &end)).unwrap();
        prop_assert!(report.max() <= 1e-8, "{report:?}");
    }

    #[test]
    fn rect_minimizer_beats_samples(
        (j1p, w1, j2p, w2) in (0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0),
        gamma in 0.0f64..3.0,
        eps in 0.0f64..1.0,
        samples in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 50),
    ) {
        let (j1m, j2m) = (j1p + w1, j2p + w2);
        let (a, b) = roads::rect_minimize_e(j1m, j1p, j2m, j2p, gamma, eps).unwrap();
        prop_assert!((j1p..=j1m).contains(&a) && (j2p..=j2m).contains(&b));
        let best = roads::local_energy(a, b, j1m, j1p, j2m, j2p, gamma, eps);
        for (s, t) in samples {
            let v = roads::local_energy(j1p + s * w1, j2p + t * w2, j1m, j1p, j2m, j2p, gamma, eps);
            prop_assert!(best <= v + 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn sweeps_never_raise_the_energy(horizon in 2usize..14, m1 in 0.5f64..4.0, m2 in 0.5f64..4.0, gamma in 0.0f64..2.5, eps in 0.0f64..0.5) {
        let sol = roads::two_roads_solve(horizon, (m1, m2), gamma, eps, None, &SweepSchedule::default()).unwrap();
        for w in sol.energy_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()));
        }
        prop_assert!(sol.j1.is_monotone(0.0) && sol.j2.is_monotone(0.0));
        if gamma < 1.0 {
            prop_assert!(roads::two_roads_kkt(&sol.j1, &sol.j2, gamma, eps).unwrap().residual() <= 1e-6);
        }
    }
}

#[test]
fn convex_iff_gamma_below_one() {
    for horizon in [3, 10] {
        for (gamma, convex) in [
            (0.25, true),
            (0.5, true),
            (0.75, true),
            (1.5, false),
            (2.0, false),
        ] {
            let h = roads::two_roads_hessian(horizon, gamma);
            let n = h.len();
            let m = DMatrix::from_fn(n, n, |r, c| h[r][c]);
            let min = m.symmetric_eigen().eigenvalues.min();
            assert_eq!(
                min > 0.0,
                convex,
                "T={horizon} gamma={gamma} min eigenvalue {min}"
            );
        }
    }
}

#[test]
fn obstacle_solution_solves_dynamic_beckmann() {
    let base = roads::one_road_graph();
    for (beta, eps) in [(0.5, 0.1), (1.0, 0.5), (0.2, 0.05)] {
        let h =
            TimeDependentPotential::Stationary(roads::one_road_potential(beta, eps, 0.0).unwrap());
        let opts = FrankWolfeOptions {
            tol: 1e-12,
            max_iter: 100_000,
            ..FrankWolfeOptions::default()
        };
        for horizon in [3, 6, 9] {
            let sol = dynamic::solve_dynamic(
                &base,
                &h,
                &NodeMeasure::dirac(2, NodeId(0)),
                &NodeMeasure::dirac(2, NodeId(1)),
                horizon,
                &opts,
            )
            .unwrap();
            let j = roads::one_road_solve(horizon, beta, eps).unwrap();
            for t in 1..=horizon {
                let waiting = sol.result.flow[sol.extended.edge(roads::WAIT_EDGE, t)];
                assert!(
                    (waiting - j.values()[t]).abs() < 1e-5,
                    "beta={beta} eps={eps} T={horizon} t={t}: {waiting} vs {}",
                    j.values()[t]
                );
            }
        }
    }
}
