use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::certify;
use crate::error::{CliError, EXIT_CHECK_FAILED};
use crate::scenario::{self, Kind, Problem, Scenario};
use crate::solve::{self, RoadPair, Solved};
use crate::table;

/// Command-line overrides of the scenario's solver settings.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: u64,
}

fn load(path: &Path, o: &Overrides) -> Result<Scenario, CliError> {
    let mut s = scenario::load(path)?;
    if o.tol.is_some() {
        s.solver.tol = o.tol;
    }
    if o.max_iter.is_some() {
        s.solver.max_iter = o.max_iter;
    }
    Ok(s)
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write(path, &text)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn solver_settings(s: &Scenario) -> Value {
    match &s.problem {
        Problem::TwoRoads(_) => {
            let sched = s.solver.sweeps();
            json!({
                "energy_tol": sched.energy_tol,
                "step_tol": sched.step_tol,
                "max_sweeps": sched.max_sweeps,
                "refine_plateaus": sched.refine_plateaus,
                "max_rounds": sched.max_rounds,
            })
        }
        Problem::OneRoad(p) => json!({ "method": p.method }),
        Problem::Geodesic(_) => json!({}),
        Problem::Beckmann(_) | Problem::Dynamic(_) => {
            let fw = s.solver.frank_wolfe();
            json!({ "tol": fw.tol, "max_iter": fw.max_iter, "variant": format!("{:?}", fw.variant) })
        }
    }
}

struct ManifestInfo<'a> {
    command: &'a str,
    scenario: &'a Path,
    outputs: Vec<String>,
    iterations: usize,
    seed: u64,
    started: Instant,
    exit_code: u8,
}

fn manifest(s: &Scenario, info: ManifestInfo<'_>) -> Value {
    json!({
        "tool": "congestion",
        "version": env!("CARGO_PKG_VERSION"),
        "command": info.command,
        "scenario": info.scenario.display().to_string(),
        "schema": scenario::SCHEMA_VERSION,
        "name": s.name,
        "kind": s.kind.as_str(),
        "parameters": s.raw.get("problem").cloned().unwrap_or(Value::Null),
        "solver": solver_settings(s),
        "tolerances": s.check,
        "iterations": info.iterations,
        "seed": info.seed,
        "wall_time_seconds": info.started.elapsed().as_secs_f64(),
        "outputs": info.outputs,
        "exit_code": info.exit_code,
    })
}

fn exit_code(solved: &Solved) -> u8 {
    if !solved.converged {
        4
    } else if !solved.pass {
        EXIT_CHECK_FAILED
    } else {
        0
    }
}

/// Solves one scenario into `out`: data CSVs, `report.json`, `manifest.json`.
pub fn run(path: &Path, out: &Path, o: &Overrides) -> Result<u8, CliError> {
    let started = Instant::now();
    let s = load(path, o)?;
    let solved = solve::solve(&s, None)?;
    create_dir(out)?;
    let mut outputs = Vec::new();
    for (name, contents) in &solved.files {
        write(&out.join(name), contents)?;
        outputs.push(name.to_string());
    }
    write_json(&out.join("report.json"), &solved.report)?;
    outputs.push("report.json".into());
    let code = exit_code(&solved);
    let info = ManifestInfo {
        command: "run",
        scenario: path,
        outputs,
        iterations: solved.iterations,
        seed: o.seed,
        started,
        exit_code: code,
    };
    write_json(&out.join("manifest.json"), &manifest(&s, info))?;
    Ok(code)
}

fn grid(axes: &[scenario::Axis]) -> Vec<Vec<(String, f64)>> {
    axes.iter().fold(vec![Vec::new()], |cells, axis| {
        cells
            .iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |&v| {
                    let mut c = cell.clone();
                    c.push((axis.name.clone(), v));
                    c
                })
            })
            .collect()
    })
}

struct Cell {
    record: Value,
    code: u8,
    iterations: usize,
    warm: Option<RoadPair>,
}

fn run_cell(s: &Scenario, k: usize, out: &Path, warm: Option<&RoadPair>) -> Cell {
    let mut record = Map::new();
    record.insert("index".into(), json!(k));
    match solve::solve(s, warm).and_then(|solved| {
        let mut files = Vec::new();
        for (name, contents) in &solved.files {
            let file = format!("cell-{k:02}.{name}");
            write(&out.join(&file), contents)?;
            files.push(file);
        }
        let report = format!("cell-{k:02}.report.json");
        write_json(&out.join(&report), &solved.report)?;
        Ok((solved, files, report))
    }) {
        Ok((solved, files, report)) => {
            let code = exit_code(&solved);
            record.insert("files".into(), json!(files));
            record.insert("report".into(), json!(report));
            record.insert("converged".into(), json!(solved.converged));
            record.insert("pass".into(), json!(solved.pass));
            record.insert("exit_code".into(), json!(code));
            if s.kind == Kind::OneRoad {
                record.insert("t0".into(), solved.report["t0"].clone());
                record.insert("t0_inverse".into(), solved.report["t0_inverse"].clone());
                record.insert(
                    "emptying_time".into(),
                    solved.report["emptying_time"].clone(),
                );
            }
            if s.kind == Kind::TwoRoads {
                record.insert("energy".into(), solved.report["energy"].clone());
            }
            Cell {
                record: Value::Object(record),
                code,
                iterations: solved.iterations,
                warm: solved.warm,
            }
        }
        Err(e) => {
            log::warn!("cell {k}: {e}");
            record.insert("error".into(), json!(e.to_string()));
            record.insert("exit_code".into(), json!(e.exit_code()));
            Cell {
                record: Value::Object(record),
                code: e.exit_code(),
                iterations: 0,
                warm: None,
            }
        }
    }
}

/// Runs `count` independent jobs on at most `jobs` threads, keeping the
/// results in job order.
fn pool<T: Send>(count: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, count.max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= count {
                    break;
                }
                let result = f(k);
                *slots[k]
                    .lock()
                    .expect("no worker panics while holding a slot") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// Runs every cell of the sweep grid into `out` and writes `index.json`.
///
/// Warm-started two-roads sweeps run in grid order, each cell starting from
/// its predecessor; all other grids run on a pool of `jobs` workers. Failed
/// cells are recorded and the remaining cells still run.
pub fn sweep(path: &Path, out: &Path, jobs: usize, o: &Overrides) -> Result<u8, CliError> {
    let started = Instant::now();
    let s = load(path, o)?;
    let (axes, warm_start) = s.sweep_axes()?;
    let cells = grid(&axes);
    let scenarios = cells
        .iter()
        .map(|params| {
            params
                .iter()
                .try_fold(s.clone(), |acc, (name, v)| acc.with_param(name, *v))
        })
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(out)?;
    let chained = warm_start && s.kind == Kind::TwoRoads;
    let results: Vec<Cell> = if chained {
        let mut results: Vec<Cell> = Vec::with_capacity(scenarios.len());
        for (k, cs) in scenarios.iter().enumerate() {
            let warm = results.last().and_then(|c| c.warm.as_ref());
            let cell = run_cell(cs, k, out, warm);
            results.push(cell);
        }
        results
    } else {
        pool(scenarios.len(), jobs, |k| {
            run_cell(&scenarios[k], k, out, None)
        })
    };
    let mut records = Vec::with_capacity(results.len());
    for (params, cell) in cells.iter().zip(&results) {
        let mut record = cell.record.clone();
        record["params"] = params
            .iter()
            .map(|(n, v)| (n.clone(), json!(v)))
            .collect::<Map<_, _>>()
            .into();
        records.push(record);
    }
    let code = results.iter().map(|c| c.code).max().unwrap_or(0);
    let index = json!({
        "scenario": path.display().to_string(),
        "name": s.name,
        "kind": s.kind.as_str(),
        "axes": axes,
        "warm_start": chained,
        "cells": records,
    });
    write_json(&out.join("index.json"), &index)?;
    let info = ManifestInfo {
        command: "sweep",
        scenario: path,
        outputs: vec!["index.json".into()],
        iterations: results.iter().map(|c| c.iterations).sum(),
        seed: o.seed,
        started,
        exit_code: code,
    };
    write_json(&out.join("manifest.json"), &manifest(&s, info))?;
    Ok(code)
}

/// Certifies a flow or trajectory file against its scenario.
///
/// Prints the verdict as JSON (and writes `check.json` into `out` if given);
/// returns 0 iff every residual is within the scenario's tolerances.
pub fn check(
    path: &Path,
    data: &Path,
    tol: Option<f64>,
    out: Option<&PathBuf>,
) -> Result<u8, CliError> {
    let mut s = scenario::load(path)?;
    if let Some(t) = tol {
        s.check.kkt = t;
        s.check.wardrop = t;
    }
    let cert = match &s.problem {
        Problem::Geodesic(p) => {
            let g = p.graph.build()?;
            let xi = congestion_core::graph::Metric::signed(p.metric.clone())
                .map_err(|e| CliError::input("problem.metric", e))?;
            let (from, to) = p.endpoints(&g)?;
            let i = table::read_flow(data, &g)?;
            certify::geodesic(&g, &xi, from, to, &i, &s.check)
        }
        Problem::Beckmann(p) => {
            let g = p.graph.build()?;
            let h = p.potential.build("problem.potential")?;
            let c = p.constraint.build(&g)?;
            let i = table::read_flow(data, &g)?;
            certify::flow(&g, &i, &h, &c, &s.check)?
        }
        Problem::Dynamic(p) => {
            let inst = solve::dynamic_instance(p)?;
            let i = table::read_flow(data, inst.teg.graph())?;
            certify::dynamic(&inst, &i, &s.check)?
        }
        Problem::OneRoad(p) => {
            let mut cols = table::read_series(data, &["j"], p.horizon + 1)?;
            certify::one_road(p, cols.remove(0), &s.check)?
        }
        Problem::TwoRoads(p) => {
            let mut cols = table::read_series(data, &["j1", "j2"], p.horizon + 1)?;
            let j2 = cols.pop().expect("two columns");
            let j1 = cols.pop().expect("two columns");
            certify::two_roads(p, j1, j2, &s.check)
        }
    };
    let verdict = json!({
        "scenario": path.display().to_string(),
        "data": data.display().to_string(),
        "kind": s.kind.as_str(),
        "tolerances": s.check,
        "certificate": cert.report,
        "pass": cert.pass,
    });
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("check.json"), &verdict)?;
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&verdict).expect("JSON values serialize")
    );
    Ok(if cert.pass { 0 } else { EXIT_CHECK_FAILED })
}
