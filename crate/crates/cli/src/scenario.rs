//! Scenario files: a versioned JSON envelope around one problem description.

use std::collections::BTreeMap;
use std::path::Path;

use congestion_core::beckmann::{
    DivergenceConstraint, FrankWolfeOptions, FrankWolfeVariant, Potential,
};
use congestion_core::dynamic::TimeDependentPotential;
use congestion_core::flow::NodeMeasure;
use congestion_core::graph::{DirectedGraph, NodeId};
use congestion_core::roads::SweepSchedule;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Geodesic,
    Beckmann,
    Dynamic,
    OneRoad,
    TwoRoads,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Geodesic => "geodesic",
            Kind::Beckmann => "beckmann",
            Kind::Dynamic => "dynamic",
            Kind::OneRoad => "one_road",
            Kind::TwoRoads => "two_roads",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    schema: u32,
    #[serde(default)]
    name: Option<String>,
    kind: Kind,
    problem: Value,
    #[serde(default)]
    solver: SolverSettings,
    #[serde(default)]
    check: CheckSettings,
    #[serde(default)]
    sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Frank–Wolfe gap tolerance, or the energy tolerance of the two-roads sweeps.
    #[serde(default)]
    pub tol: Option<f64>,
    /// Frank–Wolfe iterations, or two-roads sweeps.
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub variant: Option<Variant>,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Classic,
    Pairwise,
}

impl SolverSettings {
    pub fn frank_wolfe(&self) -> FrankWolfeOptions {
        let d = FrankWolfeOptions::default();
        FrankWolfeOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            variant: match self.variant {
                Some(Variant::Classic) => FrankWolfeVariant::Classic,
                Some(Variant::Pairwise) => FrankWolfeVariant::Pairwise,
                None => d.variant,
            },
        }
    }

    pub fn sweeps(&self) -> SweepSchedule {
        let d = SweepSchedule::default();
        SweepSchedule {
            energy_tol: self.tol.unwrap_or(d.energy_tol),
            max_sweeps: self.max_iter.unwrap_or(d.max_sweeps),
            ..d
        }
    }
}

/// Tolerances a certificate must meet to pass.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    /// Bound on KKT and obstacle residuals.
    #[serde(default = "default_check_tol")]
    pub kkt: f64,
    /// Bound on the Wardrop gap `E_q[L] − E_γ[d]`.
    #[serde(default = "default_check_tol")]
    pub wardrop: f64,
}

fn default_check_tol() -> f64 {
    1e-6
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            kkt: default_check_tol(),
            wardrop: default_check_tol(),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Grid axes; cells run in row-major order over the declared order.
    pub axes: Vec<Axis>,
    /// Start every cell from the previous cell's solution (two-roads only).
    #[serde(default = "yes")]
    pub warm_start: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<DirectedGraph, CliError> {
        DirectedGraph::from_named(&self.nodes, &self.edges)
            .map_err(|e| CliError::input("problem.graph", e))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `Σ_e ξ_e i_e + a_e i_e^q / q`.
    Local { xi: Vec<f64>, a: Vec<f64>, q: f64 },
    /// `½ iᵀQi + c·i` from symmetric entries `(row, col, value)`.
    Quadratic {
        entries: Vec<(usize, usize, f64)>,
        linear: Vec<f64>,
    },
}

impl PotentialSpec {
    pub fn build(&self, pointer: &str) -> Result<Potential, CliError> {
        match self {
            PotentialSpec::Local { xi, a, q } => Potential::local(xi.clone(), a.clone(), *q),
            PotentialSpec::Quadratic { entries, linear } => {
                Potential::quadratic(linear.len(), entries, linear.clone())
            }
        }
        .map_err(|e| CliError::input(pointer, e))
    }
}

/// Node name → mass.
pub type MeasureSpec = BTreeMap<String, f64>;

fn node(g: &DirectedGraph, name: &str, pointer: &str) -> Result<NodeId, CliError> {
    g.node_by_name(name)
        .ok_or_else(|| CliError::input(pointer, format!("unknown node `{name}`")))
}

pub fn measure(
    g: &DirectedGraph,
    spec: &MeasureSpec,
    pointer: &str,
) -> Result<NodeMeasure, CliError> {
    let mut values = vec![0.0; g.node_count()];
    for (name, &mass) in spec {
        values[node(g, name, pointer)?.0] += mass;
    }
    Ok(NodeMeasure::new(values))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSpec {
    /// `div i = μ − ν`.
    Transport { mu: MeasureSpec, nu: MeasureSpec },
    /// Move `μ` into `targets`.
    Target {
        mu: MeasureSpec,
        targets: Vec<String>,
    },
    /// One unit from `sources` to `sinks` in any proportions.
    Capacity {
        sources: Vec<String>,
        sinks: Vec<String>,
    },
}

impl ConstraintSpec {
    pub fn build(&self, g: &DirectedGraph) -> Result<DivergenceConstraint, CliError> {
        let p = "problem.constraint";
        let set = |names: &[String]| {
            names
                .iter()
                .map(|n| node(g, n, p))
                .collect::<Result<_, _>>()
        };
        let c = match self {
            ConstraintSpec::Transport { mu, nu } => {
                DivergenceConstraint::transport(&measure(g, mu, p)?, &measure(g, nu, p)?)
            }
            ConstraintSpec::Target { mu, targets } => DivergenceConstraint::TargetSet {
                mu: measure(g, mu, p)?,
                targets: set(targets)?,
            },
            ConstraintSpec::Capacity { sources, sinks } => DivergenceConstraint::Capacity {
                sources: set(sources)?,
                sinks: set(sinks)?,
            },
        };
        c.validate(g.node_count())
            .map_err(|e| CliError::input(p, e))?;
        Ok(c)
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicSpec {
    pub graph: GraphSpec,
    pub metric: Vec<f64>,
    pub from: String,
    pub to: String,
}

impl GeodesicSpec {
    pub fn endpoints(&self, g: &DirectedGraph) -> Result<(NodeId, NodeId), CliError> {
        let from = node(g, &self.from, "problem.from")?;
        let to = node(g, &self.to, "problem.to")?;
        if from == to {
            return Err(CliError::input("problem.to", "endpoints must differ"));
        }
        Ok((from, to))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BeckmannSpec {
    pub graph: GraphSpec,
    pub potential: PotentialSpec,
    pub constraint: ConstraintSpec,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicSpec {
    pub graph: GraphSpec,
    /// The same potential at every time step…
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// …or one per step `t = 1, …, T`.
    #[serde(default)]
    pub steps: Option<Vec<PotentialSpec>>,
    pub mu: MeasureSpec,
    pub nu: MeasureSpec,
    pub horizon: usize,
}

impl DynamicSpec {
    pub fn potential(&self) -> Result<TimeDependentPotential, CliError> {
        match (&self.potential, &self.steps) {
            (Some(p), None) => Ok(TimeDependentPotential::Stationary(
                p.build("problem.potential")?,
            )),
            (None, Some(steps)) => Ok(TimeDependentPotential::PerStep(
                steps
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p.build(&format!("problem.steps[{k}]")))
                    .collect::<Result<_, _>>()?,
            )),
            _ => Err(CliError::input(
                "problem",
                "give exactly one of `potential` and `steps`",
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OneRoadMethod {
    #[default]
    ClosedForm,
    Obstacle,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OneRoadSpec {
    pub beta: f64,
    pub eps: f64,
    pub horizon: usize,
    #[serde(default = "unit_mass")]
    pub mass: f64,
    /// Constant part of the cost on the road edge.
    #[serde(default)]
    pub linear: f64,
    #[serde(default)]
    pub method: OneRoadMethod,
}

fn unit_mass() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TwoRoadsSpec {
    pub horizon: usize,
    pub masses: (f64, f64),
    pub gamma: f64,
    pub eps: f64,
}

#[derive(Clone, Debug)]
pub enum Problem {
    Geodesic(GeodesicSpec),
    Beckmann(BeckmannSpec),
    Dynamic(DynamicSpec),
    OneRoad(OneRoadSpec),
    TwoRoads(TwoRoadsSpec),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub problem: Problem,
    pub solver: SolverSettings,
    pub check: CheckSettings,
    pub sweep: Option<SweepSpec>,
    /// The file as read, echoed into manifests.
    pub raw: Value,
}

fn decode<T: DeserializeOwned>(value: &Value, prefix: &str) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let pointer = match (prefix, path.as_str()) {
            ("", p) => p.to_string(),
            (pre, ".") => pre.to_string(),
            (pre, p) if p.starts_with('[') => format!("{pre}{p}"),
            (pre, p) => format!("{pre}.{p}"),
        };
        CliError::input(pointer, e.into_inner())
    })
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    let raw: Value = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("line {} column {}", e.line(), e.column()), e))?;
    let env: Envelope = decode(&raw, "")?;
    if env.schema != SCHEMA_VERSION {
        return Err(CliError::input(
            "schema",
            format!(
                "unsupported schema version {}; expected {SCHEMA_VERSION}",
                env.schema
            ),
        ));
    }
    let p = &env.problem;
    let problem = match env.kind {
        Kind::Geodesic => Problem::Geodesic(decode(p, "problem")?),
        Kind::Beckmann => Problem::Beckmann(decode(p, "problem")?),
        Kind::Dynamic => Problem::Dynamic(decode(p, "problem")?),
        Kind::OneRoad => Problem::OneRoad(decode(p, "problem")?),
        Kind::TwoRoads => Problem::TwoRoads(decode(p, "problem")?),
    };
    Ok(Scenario {
        name: env.name.unwrap_or_else(|| env.kind.as_str().to_string()),
        kind: env.kind,
        problem,
        solver: env.solver,
        check: env.check,
        sweep: env.sweep,
        raw,
    })
}

impl Scenario {
    /// Copy with one numeric parameter replaced, for sweep cells.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Scenario, CliError> {
        let mut s = self.clone();
        let pointer = format!("sweep.axes.{name}");
        let count = |v: f64| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(CliError::input(
                    &pointer,
                    format!("{v} is not a valid horizon"),
                ))
            }
        };
        match (&mut s.problem, name) {
            (Problem::OneRoad(r), "beta") => r.beta = value,
            (Problem::OneRoad(r), "eps") => r.eps = value,
            (Problem::OneRoad(r), "mass") => r.mass = value,
            (Problem::OneRoad(r), "linear") => r.linear = value,
            (Problem::OneRoad(r), "horizon") => r.horizon = count(value)?,
            (Problem::TwoRoads(r), "gamma") => r.gamma = value,
            (Problem::TwoRoads(r), "eps") => r.eps = value,
            (Problem::Dynamic(d), "horizon") => d.horizon = count(value)?,
            _ => {
                return Err(CliError::input(
                    pointer,
                    format!(
                        "`{name}` is not a sweep axis for {} scenarios",
                        self.kind.as_str()
                    ),
                ))
            }
        }
        Ok(s)
    }

    /// Declared sweep axes, or the default γ sweep `2, 28/15, …, 0` for two roads.
    pub fn sweep_axes(&self) -> Result<(Vec<Axis>, bool), CliError> {
        match (&self.sweep, self.kind) {
            (Some(spec), _) => Ok((spec.axes.clone(), spec.warm_start)),
            (None, Kind::TwoRoads) => Ok((
                vec![Axis {
                    name: "gamma".into(),
                    values: (0..=15).rev().map(|k| 2.0 * k as f64 / 15.0).collect(),
                }],
                true,
            )),
            (None, _) => Err(CliError::input("sweep", "scenario declares no sweep axis")),
        }
    }
}
