//! Feasible sets `M` for `div i`.

use alloc::collections::BTreeSet;

use super::BeckmannError;
use crate::flow::{NodeFunction, NodeMeasure, MASS_TOLERANCE};
use crate::graph::NodeId;

/// The three constraint families on the divergence of a flow.
#[derive(Clone, Debug, PartialEq)]
pub enum DivergenceConstraint {
    /// `div i = f` with `Σ f = 0` and `f⁺` a probability measure.
    FixedMeasure(NodeMeasure),
    /// `div i = μ` off `targets`, `div i ≤ 0` on `targets`: move `μ` into the
    /// target set. Mass that starts inside the set is already delivered.
    TargetSet {
        mu: NodeMeasure,
        targets: BTreeSet<NodeId>,
    },
    /// One unit leaves `sources` and enters `sinks`, in any proportions.
    Capacity {
        sources: BTreeSet<NodeId>,
        sinks: BTreeSet<NodeId>,
    },
}

impl DivergenceConstraint {
    /// `ι[μ] − ι[ν]` for probability measures with disjoint supports.
    pub fn transport(mu: &NodeMeasure, nu: &NodeMeasure) -> Self {
        let f = mu
            .values()
            .iter()
            .zip(nu.values())
            .map(|(a, b)| a - b)
            .collect();
        DivergenceConstraint::FixedMeasure(NodeMeasure::new(f))
    }

    pub fn validate(&self, node_count: usize) -> Result<(), BeckmannError> {
        let in_range = |set: &BTreeSet<NodeId>| set.iter().all(|x| x.0 < node_count);
        match self {
            DivergenceConstraint::FixedMeasure(f) => {
                if f.len() != node_count {
                    return Err(BeckmannError::Dimension {
                        expected: node_count,
                        found: f.len(),
                    });
                }
                if f.values().iter().any(|v| !v.is_finite()) {
                    return Err(BeckmannError::InvalidConstraint(
                        "measure has non-finite entries",
                    ));
                }
                let plus = f.positive_part().total();
                let minus = f.negative_part().total();
                if libm::fabs(plus - minus) > MASS_TOLERANCE {
                    return Err(BeckmannError::InvalidConstraint(
                        "measure does not balance to zero",
                    ));
                }
                if libm::fabs(plus - 1.0) > MASS_TOLERANCE {
                    return Err(BeckmannError::InvalidConstraint(
                        "positive part is not a probability measure",
                    ));
                }
            }
            DivergenceConstraint::TargetSet { mu, targets } => {
                if mu.len() != node_count {
                    return Err(BeckmannError::Dimension {
                        expected: node_count,
                        found: mu.len(),
                    });
                }
                if !mu.is_probability() {
                    return Err(BeckmannError::InvalidConstraint(
                        "mu is not a probability measure",
                    ));
                }
                if targets.is_empty() || !in_range(targets) {
                    return Err(BeckmannError::InvalidConstraint(
                        "target set must be a nonempty set of graph nodes",
                    ));
                }
            }
            DivergenceConstraint::Capacity { sources, sinks } => {
                if sources.is_empty() || sinks.is_empty() {
                    return Err(BeckmannError::InvalidConstraint(
                        "source and sink sets must be nonempty",
                    ));
                }
                if !in_range(sources) || !in_range(sinks) {
                    return Err(BeckmannError::InvalidConstraint(
                        "unknown node in source or sink set",
                    ));
                }
                if !sources.is_disjoint(sinks) {
                    return Err(BeckmannError::InvalidConstraint(
                        "source and sink sets overlap",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Violation of the divergence part of the optimality system by `(div i, u)`.
    ///
    /// Target sets check `min{−div i, u} = 0` on the targets. For capacity
    /// constraints the unit-mass condition carries its own multiplier `λ`,
    /// taken as `max u` over the sources: the source condition reads
    /// `min{div i, λ − u} = 0`.
    pub fn residual(&self, div: &NodeMeasure, u: &NodeFunction) -> f64 {
        let d = div.values();
        let u = u.values();
        let mut worst = 0.0f64;
        match self {
            DivergenceConstraint::FixedMeasure(f) => {
                for (a, b) in d.iter().zip(f.values()) {
                    worst = worst.max(libm::fabs(a - b));
                }
            }
            DivergenceConstraint::TargetSet { mu, targets } => {
                for x in 0..d.len() {
                    let r = if targets.contains(&NodeId(x)) {
                        (-d[x]).min(u[x])
                    } else {
                        d[x] - mu.values()[x]
                    };
                    worst = worst.max(libm::fabs(r));
                }
            }
            DivergenceConstraint::Capacity { sources, sinks } => {
                let lambda = sources
                    .iter()
                    .map(|s| u[s.0])
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut sent = 0.0;
                for x in 0..d.len() {
                    let node = NodeId(x);
                    let r = if sources.contains(&node) {
                        sent += d[x];
                        d[x].min(lambda - u[x])
                    } else if sinks.contains(&node) {
                        (-d[x]).min(u[x])
                    } else {
                        d[x]
                    };
                    worst = worst.max(libm::fabs(r));
                }
                worst = worst.max(libm::fabs(sent - 1.0));
            }
        }
        worst
    }
}
