//! Certificates shared by `run` and `check`: the same code evaluates a freshly
//! solved flow and one reloaded from disk.

use congestion_core::beckmann::{
    constraint_multiplier, kkt_residual, potential_gradient, support_bound_report,
    DivergenceConstraint, MultiplierOutcome, Potential,
};
use congestion_core::dynamic::{self, TimeDependentPotential, TimeExtendedGraph};
use congestion_core::flow::{self, EdgeFlow, NodeFunction, NodeMeasure};
use congestion_core::graph::{self, DirectedGraph, EdgeId, Metric, NodeId, Tolerances};
use congestion_core::roads::{self, RoadTrajectory};
use congestion_core::smirnov::{smirnov_decompose, wardrop_certificate, SmirnovOptions};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::scenario::{CheckSettings, OneRoadSpec, TwoRoadsSpec};

/// Support bounds enumerate simple paths; skip them on larger supports.
const SUPPORT_BOUND_LIMIT: usize = 24;

/// Solver output is only gap-accurate, so loops count as negative beyond the
/// KKT tolerance and lengths match distances within the Wardrop tolerance.
fn tolerances(check: &CheckSettings) -> Tolerances {
    Tolerances {
        loop_condition: check.kkt,
        geodesic: check.wardrop,
        ..Tolerances::default()
    }
}

pub struct Certificate {
    pub report: Value,
    pub pass: bool,
    pub multiplier: Option<NodeFunction>,
}

fn edge_label(g: &DirectedGraph, e: EdgeId) -> String {
    let (x, y) = g.endpoints(e);
    format!("{}->{}", g.node_name(x), g.node_name(y))
}

fn wardrop(
    g: &DirectedGraph,
    i: &EdgeFlow,
    cost: impl Fn(&EdgeFlow) -> Result<Metric, String>,
    check: &CheckSettings,
) -> (Value, bool) {
    let tol = tolerances(check);
    let dec = match smirnov_decompose(g, i, &SmirnovOptions::default()) {
        Ok(d) => d,
        Err(e) => return (json!({ "error": e.to_string() }), false),
    };
    let mut failure = None;
    let report = wardrop_certificate(
        g,
        &dec.profile,
        |q| {
            cost(q).unwrap_or_else(|e| {
                failure = Some(e);
                Metric::unit(q.len())
            })
        },
        &tol,
    );
    let report = match (report, failure) {
        (Ok(r), None) => r,
        (Err(e), _) => return (json!({ "error": e.to_string() }), false),
        (_, Some(e)) => return (json!({ "error": e }), false),
    };
    let paths: Vec<Value> = report
        .paths
        .iter()
        .map(|p| {
            json!({
                "path": graph::format_path(g, &p.path),
                "weight": p.weight,
                "length": p.length,
                "distance": p.distance,
                "geodesic": p.geodesic,
            })
        })
        .collect();
    let pass = report.gap <= check.wardrop;
    (
        json!({
            "gap": report.gap,
            "equilibrium": report.equilibrium,
            "loop_mass": dec.residual.values().iter().sum::<f64>(),
            "paths": paths,
        }),
        pass,
    )
}

/// KKT residual with a recovered multiplier, Wardrop gap of the Smirnov
/// decomposition, and the support bounds.
pub fn flow(
    g: &DirectedGraph,
    i: &EdgeFlow,
    h: &Potential,
    c: &DivergenceConstraint,
    check: &CheckSettings,
) -> Result<Certificate, CliError> {
    let tol = tolerances(check);
    let outcome =
        constraint_multiplier(g, i, h, c, &tol).map_err(|e| CliError::beckmann("flow", e))?;
    let (kkt, kkt_pass, multiplier) = match outcome {
        MultiplierOutcome::Recovered(u) => {
            let r = kkt_residual(g, i, &u, h, c).map_err(|e| CliError::beckmann("flow", e))?;
            let report = json!({
                "multiplier": "recovered",
                "constitutive": r.constitutive,
                "divergence": r.divergence,
                "worst_edge": r.worst_edge.map(|e| edge_label(g, e)),
                "max": r.max(),
            });
            (report, r.max() <= check.kkt, Some(u))
        }
        MultiplierOutcome::NotOdd { edge, reverse } => (
            json!({
                "multiplier": "not_odd",
                "edge": edge_label(g, edge),
                "reverse": edge_label(g, reverse),
            }),
            false,
            None,
        ),
        MultiplierOutcome::NegativeLoop { witness, length } => (
            json!({ "multiplier": "negative_loop", "witness": witness, "length": length }),
            false,
            None,
        ),
    };
    let (wardrop, wardrop_pass) = wardrop(
        g,
        i,
        |q| potential_gradient(h, q).map_err(|e| e.to_string()),
        check,
    );
    let support = if i.support(tol.positivity).len() <= SUPPORT_BOUND_LIMIT {
        let xi = potential_gradient(h, i).map_err(|e| CliError::beckmann("flow", e))?;
        match support_bound_report(g, i, &xi, &tol) {
            Ok(r) => json!({
                "inner_diameter": r.inner_diameter,
                "diameter": r.diameter,
                "inner_hops": r.inner_hops,
                "unit_diameter": r.unit_diameter,
                "min_metric": r.min_metric,
                "max_metric": r.max_metric,
                "inner_diameter_bounded": r.inner_diameter_bounded,
                "hop_bound": r.hop_bound,
                "hop_bound_holds": r.hop_bound_holds,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        json!({ "skipped": "support too large for path enumeration" })
    };
    Ok(Certificate {
        report: json!({ "kkt": kkt, "wardrop": wardrop, "support_bound": support }),
        pass: kkt_pass && wardrop_pass,
        multiplier,
    })
}

/// A unit flow from `from` to `to` along geodesics of a fixed metric.
pub fn geodesic(
    g: &DirectedGraph,
    xi: &Metric,
    from: NodeId,
    to: NodeId,
    i: &EdgeFlow,
    check: &CheckSettings,
) -> Certificate {
    let div = flow::divergence(g, i);
    let divergence = g
        .nodes()
        .map(|x| {
            let target = f64::from(u8::from(x == from)) - f64::from(u8::from(x == to));
            (div[x] - target).abs()
        })
        .fold(0.0, f64::max);
    let (wardrop, wardrop_pass) = wardrop(g, i, |_| Ok(xi.clone()), check);
    Certificate {
        report: json!({ "divergence": divergence, "wardrop": wardrop }),
        pass: divergence <= check.kkt && wardrop_pass,
        multiplier: None,
    }
}

pub struct DynamicInstance {
    pub teg: TimeExtendedGraph,
    pub h: TimeDependentPotential,
    pub potential: Potential,
    pub constraint: DivergenceConstraint,
    pub mu: NodeMeasure,
    pub nu: NodeMeasure,
}

/// Flow certificate on `G^{T,Ω}` plus finite propagation and extension by zero.
pub fn dynamic(
    inst: &DynamicInstance,
    i: &EdgeFlow,
    check: &CheckSettings,
) -> Result<Certificate, CliError> {
    let tol = tolerances(check);
    let mut cert = flow(
        inst.teg.graph(),
        i,
        &inst.potential,
        &inst.constraint,
        check,
    )?;
    let bounds = match &inst.h {
        TimeDependentPotential::Stationary(p) => p.gradient_bounds_unit_box(),
        TimeDependentPotential::PerStep(ps) => ps
            .iter()
            .map(Potential::gradient_bounds_unit_box)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (m, big)| {
                (a.min(m), b.max(big))
            }),
    };
    let propagation =
        match dynamic::finite_propagation_check(&inst.teg, i, &inst.mu, &inst.nu, bounds, &tol) {
            Ok(r) => json!({
                "active_horizon": r.active_horizon,
                "unit_diameter": r.unit_diameter,
                "gradient_bounds": [r.gradient_bounds.0, r.gradient_bounds.1],
                "bound": r.bound,
                "holds": r.holds,
            }),
            Err(e) => json!({ "error": e.to_string() }),
        };
    let extension = match &cert.multiplier {
        Some(u) => zero_extension(&inst.teg, i, u, &inst.h, check),
        None => json!({ "error": "no multiplier" }),
    };
    cert.report["finite_propagation"] = propagation;
    cert.report["zero_extension"] = extension;
    Ok(cert)
}

fn zero_extension(
    teg: &TimeExtendedGraph,
    i: &EdgeFlow,
    u: &NodeFunction,
    h: &TimeDependentPotential,
    check: &CheckSettings,
) -> Value {
    match dynamic::zero_extension_check(teg, i, u, h, check.kkt, &tolerances(check)) {
        Ok(z) => json!({
            "extendable": z.extendable(),
            "sufficient_margin": z.sufficient_margin,
            "sufficient": z.sufficient,
            "exact": z.exact,
            "witness": z.witness,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Obstacle residual, and for unit mass the dynamic KKT system with the
/// explicit multiplier and the extension-by-zero test.
pub fn one_road(
    spec: &OneRoadSpec,
    values: Vec<f64>,
    check: &CheckSettings,
) -> Result<Certificate, CliError> {
    let j = match RoadTrajectory::new(values) {
        Ok(j) => j,
        Err(e) => {
            return Ok(Certificate {
                report: json!({ "admissible": false, "error": e.to_string() }),
                pass: false,
                multiplier: None,
            })
        }
    };
    let boundary = (j.values()[0] - spec.mass).abs();
    let obstacle = roads::obstacle_residual(&j, spec.beta, spec.eps);
    let scale = spec.mass.max(1.0);
    let mut pass = boundary <= check.kkt * scale && obstacle <= check.kkt * scale;
    let mut report =
        json!({ "admissible": true, "boundary": boundary, "obstacle_residual": obstacle });
    if spec.mass == 1.0 {
        let road = |e| CliError::roads("problem", e);
        let teg = TimeExtendedGraph::new(&roads::one_road_graph(), spec.horizon, true)
            .map_err(|e| CliError::dynamic("problem", e))?;
        let i = roads::one_road_flow(&teg, &j).map_err(road)?;
        let u =
            roads::one_road_multiplier(&teg, &j, spec.beta, spec.eps, spec.linear).map_err(road)?;
        let h = TimeDependentPotential::Stationary(
            roads::one_road_potential(spec.beta, spec.eps, spec.linear).map_err(road)?,
        );
        let ht =
            dynamic::extend_potential(&h, &teg).map_err(|e| CliError::dynamic("problem", e))?;
        let (a, b) = (NodeId(0), NodeId(1));
        let (start, end) =
            dynamic::lift_measures(&teg, &NodeMeasure::dirac(2, a), &NodeMeasure::dirac(2, b))
                .map_err(|e| CliError::dynamic("problem", e))?;
        let c = DivergenceConstraint::transport(&start, &end);
        let r = kkt_residual(teg.graph(), &i, &u, &ht, &c)
            .map_err(|e| CliError::beckmann("problem", e))?;
        pass &= r.max() <= check.kkt;
        report["kkt"] = json!({
            "constitutive": r.constitutive,
            "divergence": r.divergence,
            "max": r.max(),
        });
        report["zero_extension"] = zero_extension(&teg, &i, &u, &h, check);
    }
    Ok(Certificate {
        report,
        pass,
        multiplier: None,
    })
}

/// Boundary values, monotonicity and complementarity of a two-roads pair.
pub fn two_roads(
    spec: &TwoRoadsSpec,
    j1: Vec<f64>,
    j2: Vec<f64>,
    check: &CheckSettings,
) -> Certificate {
    let boundary = (j1[0] - spec.masses.0)
        .abs()
        .max((j2[0] - spec.masses.1).abs());
    let pair = RoadTrajectory::new(j1).and_then(|a| RoadTrajectory::new(j2).map(|b| (a, b)));
    let (j1, j2) = match pair {
        Ok(p) => p,
        Err(e) => {
            return Certificate {
                report: json!({ "admissible": false, "error": e.to_string() }),
                pass: false,
                multiplier: None,
            }
        }
    };
    match roads::two_roads_kkt(&j1, &j2, spec.gamma, spec.eps) {
        Ok(k) => Certificate {
            report: json!({
                "admissible": true,
                "boundary": boundary,
                "complementarity": k.complementarity,
                "admissibility": k.admissibility,
                "residual": k.residual(),
                "alpha1": k.alpha1.values(),
                "alpha2": k.alpha2.values(),
            }),
            pass: boundary <= check.kkt && k.residual() <= check.kkt,
            multiplier: None,
        },
        Err(e) => Certificate {
            report: json!({ "admissible": true, "error": e.to_string() }),
            pass: false,
            multiplier: None,
        },
    }
}
