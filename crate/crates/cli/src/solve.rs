//! Dispatch from a scenario to the solvers.

use congestion_core::beckmann::{solve_beckmann_frank_wolfe, FrankWolfeResult};
use congestion_core::dynamic;
use congestion_core::flow::{self, PathProfile};
use congestion_core::graph::{self, Metric};
use congestion_core::roads::{self, RoadTrajectory};
use serde_json::{json, Value};

use crate::certify::{self, DynamicInstance};
use crate::error::CliError;
use crate::scenario::{
    measure, BeckmannSpec, DynamicSpec, GeodesicSpec, OneRoadMethod, OneRoadSpec, Problem,
    Scenario, TwoRoadsSpec,
};
use crate::table;

pub type RoadPair = (RoadTrajectory, RoadTrajectory);

/// Everything a solved scenario writes, before it touches the disk.
pub struct Solved {
    /// `(file name, CSV contents)`; the first entry is the one `check` reads.
    pub files: Vec<(&'static str, String)>,
    pub report: Value,
    pub iterations: usize,
    pub converged: bool,
    pub pass: bool,
    /// Two-roads solution, for warm-starting the next sweep cell.
    pub warm: Option<RoadPair>,
}

pub fn solve(s: &Scenario, warm: Option<&RoadPair>) -> Result<Solved, CliError> {
    log::info!("solving {} scenario `{}`", s.kind.as_str(), s.name);
    match &s.problem {
        Problem::Geodesic(p) => geodesic(s, p),
        Problem::Beckmann(p) => beckmann(s, p),
        Problem::Dynamic(p) => dynamic_problem(s, p),
        Problem::OneRoad(p) => one_road(s, p),
        Problem::TwoRoads(p) => two_roads(s, p, warm),
    }
}

fn frank_wolfe_summary(fw: &FrankWolfeResult) -> Value {
    json!({
        "iterations": fw.iterations,
        "gap": fw.gap(),
        "objective": fw.objective,
        "certification": format!("{:?}", fw.certification),
        "converged": fw.converged(),
    })
}

fn geodesic(s: &Scenario, p: &GeodesicSpec) -> Result<Solved, CliError> {
    let g = p.graph.build()?;
    let xi = Metric::signed(p.metric.clone()).map_err(|e| CliError::input("problem.metric", e))?;
    if xi.len() != g.edge_count() {
        return Err(CliError::input(
            "problem.metric",
            format!("expected {} values, found {}", g.edge_count(), xi.len()),
        ));
    }
    let (from, to) = p.endpoints(&g)?;
    let sp = graph::shortest_distances(&g, &xi, &[from])
        .map_err(|e| CliError::graph("problem.metric", e))?;
    let path = sp.trace(&g, to).ok_or_else(|| {
        CliError::Infeasible(format!("`{}` is unreachable from `{}`", p.to, p.from))
    })?;
    let i = flow::edge_flow(&g, &PathProfile::dirac(path.clone()));
    let cert = certify::geodesic(&g, &xi, from, to, &i, &s.check);
    Ok(Solved {
        files: vec![
            ("flow.csv", table::flow_csv(&g, &i, &xi)),
            ("distances.csv", table::distances_csv(&g, sp.distances())),
        ],
        report: json!({
            "kind": "geodesic",
            "distance": sp.distance(to),
            "path": graph::format_path(&g, &path),
            "certificate": cert.report,
            "pass": cert.pass,
        }),
        iterations: 0,
        converged: true,
        pass: cert.pass,
        warm: None,
    })
}

fn beckmann(s: &Scenario, p: &BeckmannSpec) -> Result<Solved, CliError> {
    let g = p.graph.build()?;
    let h = p.potential.build("problem.potential")?;
    let c = p.constraint.build(&g)?;
    let fw = solve_beckmann_frank_wolfe(&g, &h, &c, &s.solver.frank_wolfe())
        .map_err(|e| CliError::beckmann("problem", e))?;
    let cert = certify::flow(&g, &fw.flow, &h, &c, &s.check)?;
    Ok(Solved {
        files: vec![("flow.csv", table::flow_csv(&g, &fw.flow, &fw.metric))],
        report: json!({
            "kind": "beckmann",
            "solver": frank_wolfe_summary(&fw),
            "certificate": cert.report,
            "pass": cert.pass,
        }),
        iterations: fw.iterations,
        converged: fw.converged(),
        pass: cert.pass,
        warm: None,
    })
}

/// The time-extended instance described by `p`, built the way
/// [`dynamic::solve_dynamic`] builds it.
pub fn dynamic_instance(p: &DynamicSpec) -> Result<DynamicInstance, CliError> {
    let base = p.graph.build()?;
    let h = p.potential()?;
    let mu = measure(&base, &p.mu, "problem.mu")?;
    let nu = measure(&base, &p.nu, "problem.nu")?;
    let err = |e| CliError::dynamic("problem", e);
    let teg = dynamic::extend_graph(&base, p.horizon, true).map_err(err)?;
    let (start, end) = dynamic::lift_measures(&teg, &mu, &nu).map_err(err)?;
    let potential = dynamic::extend_potential(&h, &teg).map_err(err)?;
    Ok(DynamicInstance {
        teg,
        h,
        potential,
        constraint: congestion_core::beckmann::DivergenceConstraint::transport(&start, &end),
        mu,
        nu,
    })
}

fn dynamic_problem(s: &Scenario, p: &DynamicSpec) -> Result<Solved, CliError> {
    let base = p.graph.build()?;
    let h = p.potential()?;
    let mu = measure(&base, &p.mu, "problem.mu")?;
    let nu = measure(&base, &p.nu, "problem.nu")?;
    let sol = dynamic::solve_dynamic(&base, &h, &mu, &nu, p.horizon, &s.solver.frank_wolfe())
        .map_err(|e| CliError::dynamic("problem", e))?;
    let fw = sol.result;
    let inst = DynamicInstance {
        teg: sol.extended,
        h,
        potential: sol.potential,
        constraint: sol.constraint,
        mu,
        nu,
    };
    let cert = certify::dynamic(&inst, &fw.flow, &s.check)?;
    Ok(Solved {
        files: vec![(
            "flow.csv",
            table::flow_csv(inst.teg.graph(), &fw.flow, &fw.metric),
        )],
        report: json!({
            "kind": "dynamic",
            "solver": frank_wolfe_summary(&fw),
            "certificate": cert.report,
            "pass": cert.pass,
        }),
        iterations: fw.iterations,
        converged: fw.converged(),
        pass: cert.pass,
        warm: None,
    })
}

fn one_road(s: &Scenario, p: &OneRoadSpec) -> Result<Solved, CliError> {
    let err = |e| CliError::roads("problem", e);
    let j = match p.method {
        OneRoadMethod::ClosedForm => roads::one_road_solve_mass(p.horizon, p.beta, p.eps, p.mass),
        OneRoadMethod::Obstacle => {
            roads::one_road_obstacle_solve_mass(p.horizon, p.beta, p.eps, p.mass)
        }
    }
    .map_err(err)?;
    let t0 = roads::compute_t0(p.beta, p.eps).map_err(err)?;
    let t0_inverse = if p.beta > 0.0 {
        roads::compute_t0_by_inverse(p.beta, p.eps).map_err(err)?
    } else {
        None
    };
    let csv = table::series_csv(&[("j", j.values())]);
    let emptying_time = j.emptying_time(1e-12);
    let cert = certify::one_road(p, j.into_values(), &s.check)?;
    Ok(Solved {
        files: vec![("trajectory.csv", csv)],
        report: json!({
            "kind": "one_road",
            "t0": t0,
            "t0_inverse": t0_inverse,
            "emptying_time": emptying_time,
            "certificate": cert.report,
            "pass": cert.pass,
        }),
        iterations: 0,
        converged: true,
        pass: cert.pass,
        warm: None,
    })
}

fn two_roads(s: &Scenario, p: &TwoRoadsSpec, warm: Option<&RoadPair>) -> Result<Solved, CliError> {
    let init = warm.map(|(a, b)| (a, b));
    let sol = roads::two_roads_solve(
        p.horizon,
        p.masses,
        p.gamma,
        p.eps,
        init,
        &s.solver.sweeps(),
    )
    .map_err(|e| CliError::roads("problem", e))?;
    let csv = table::series_csv(&[("j1", sol.j1.values()), ("j2", sol.j2.values())]);
    let cert = certify::two_roads(
        p,
        sol.j1.values().to_vec(),
        sol.j2.values().to_vec(),
        &s.check,
    );
    Ok(Solved {
        files: vec![("trajectory.csv", csv)],
        report: json!({
            "kind": "two_roads",
            "energy": sol.energy(),
            "final_energy_change": sol.final_energy_change(),
            "sweeps": sol.sweeps,
            "rounds": sol.rounds,
            "converged": sol.converged,
            "exclusive_fraction": roads::exclusive_fraction(&sol.j1, &sol.j2, 1e-9),
            "certificate": cert.report,
            "pass": cert.pass,
        }),
        iterations: sol.sweeps,
        converged: sol.converged,
        pass: cert.pass,
        warm: Some((sol.j1, sol.j2)),
    })
}
