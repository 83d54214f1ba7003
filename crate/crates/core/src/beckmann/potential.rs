//! Congestion potentials `H` and their gradients.

use alloc::vec;
use alloc::vec::Vec;

use super::BeckmannError;
use crate::flow::EdgeFlow;
use crate::graph::Metric;

/// Separable cost `g_e(x) = ξ_e + a_e·x^{q−1}`, primitive `ξ_e·x + a_e·x^q/q`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSeparable {
    xi: Vec<f64>,
    a: Vec<f64>,
    q: f64,
}

impl LocalSeparable {
    pub fn new(xi: Vec<f64>, a: Vec<f64>, q: f64) -> Result<Self, BeckmannError> {
        if xi.len() != a.len() {
            return Err(BeckmannError::Dimension {
                expected: xi.len(),
                found: a.len(),
            });
        }
        if !(q.is_finite() && q > 1.0) {
            return Err(BeckmannError::InvalidPotential("exponent q must exceed 1"));
        }
        if xi.iter().chain(&a).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BeckmannError::InvalidPotential(
                "coefficients must be finite and nonnegative",
            ));
        }
        Ok(LocalSeparable { xi, a, q })
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    fn len(&self) -> usize {
        self.xi.len()
    }

    fn value(&self, i: &[f64]) -> f64 {
        let q = self.q;
        i.iter()
            .zip(self.xi.iter().zip(&self.a))
            .map(|(&x, (&xi, &a))| xi * x + a * libm::pow(x.max(0.0), q) / q)
            .sum()
    }

    fn gradient_into(&self, i: &[f64], out: &mut [f64]) {
        let p = self.q - 1.0;
        for (k, &x) in i.iter().enumerate() {
            let x = x.max(0.0);
            let power = if x == 0.0 { 0.0 } else { libm::pow(x, p) };
            out[k] = self.xi[k] + self.a[k] * power;
        }
    }

    fn is_quadratic(&self) -> bool {
        self.q == 2.0
    }
}

/// `H(i) = ½ iᵀQi + cᵀi` with a sparse symmetric `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    rows: Vec<Vec<(usize, f64)>>,
    c: Vec<f64>,
}

impl QuadraticForm {
    /// Each triplet `(e1, e2, v)` sets `Q[e1][e2] = Q[e2][e1] = v`.
    pub fn new(
        n: usize,
        triplets: &[(usize, usize, f64)],
        c: Vec<f64>,
    ) -> Result<Self, BeckmannError> {
        if c.len() != n {
            return Err(BeckmannError::Dimension {
                expected: n,
                found: c.len(),
            });
        }
        if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(BeckmannError::InvalidPotential(
                "linear coefficients must be finite and nonnegative",
            ));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(e1, e2, v) in triplets {
            if e1 >= n || e2 >= n {
                return Err(BeckmannError::Dimension {
                    expected: n,
                    found: e1.max(e2) + 1,
                });
            }
            if !v.is_finite() {
                return Err(BeckmannError::InvalidPotential(
                    "matrix entries must be finite",
                ));
            }
            if rows[e1].iter().any(|&(j, _)| j == e2) {
                return Err(BeckmannError::InvalidPotential("matrix entry set twice"));
            }
            rows[e1].push((e2, v));
            if e1 != e2 {
                rows[e2].push((e1, v));
            }
        }
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
        }
        Ok(QuadraticForm { rows, c })
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    /// Dense copy of `Q`, row-major.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.rows.len();
        let mut q = vec![vec![0.0; n]; n];
        for (r, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                q[r][j] = v;
            }
        }
        q
    }

    fn len(&self) -> usize {
        self.c.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.rows.iter().enumerate() {
            out[r] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    fn value(&self, i: &[f64]) -> f64 {
        let mut qi = vec![0.0; i.len()];
        self.apply(i, &mut qi);
        i.iter()
            .zip(&qi)
            .zip(&self.c)
            .map(|((&x, &qx), &c)| 0.5 * x * qx + c * x)
            .sum()
    }

    fn gradient_into(&self, i: &[f64], out: &mut [f64]) {
        self.apply(i, out);
        for (o, c) in out.iter_mut().zip(&self.c) {
            *o += c;
        }
    }

    fn curvature(&self, d: &[f64]) -> f64 {
        let mut qd = vec![0.0; d.len()];
        self.apply(d, &mut qd);
        d.iter().zip(&qd).map(|(a, b)| a * b).sum()
    }

    /// Cholesky of `Q + δI` with `δ = 1e-10·(1 + max|Q|)`: succeeds for
    /// positive semidefinite `Q`, fails once an eigenvalue is below `−δ`.
    pub fn is_positive_semidefinite(&self) -> bool {
        let mut a = self.dense();
        let n = a.len();
        let scale = a
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(libm::fabs(*v)));
        let delta = 1e-10 * (1.0 + scale);
        for (k, row) in a.iter_mut().enumerate() {
            row[k] += delta;
        }
        for j in 0..n {
            let mut d = a[j][j];
            for k in 0..j {
                d -= a[j][k] * a[j][k];
            }
            if d <= 0.0 {
                return false;
            }
            let d = libm::sqrt(d);
            a[j][j] = d;
            for r in j + 1..n {
                let mut s = a[r][j];
                for k in 0..j {
                    s -= a[r][k] * a[j][k];
                }
                a[r][j] = s / d;
            }
        }
        true
    }

    fn row_bounds(&self, r: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (self.c[r], self.c[r]);
        for &(_, v) in &self.rows[r] {
            lo += v.min(0.0);
            hi += v.max(0.0);
        }
        (lo, hi)
    }
}

/// `H^T(i) = Σ_t H_t(i(t))` over time blocks of `base_edges` entries,
/// followed by `free_edges` zero-cost entries (the deposit edges).
#[derive(Clone, Debug, PartialEq)]
pub struct TimeExtendedPotential {
    base_edges: usize,
    steps: Vec<Potential>,
    free_edges: usize,
}

impl TimeExtendedPotential {
    pub fn new(
        base_edges: usize,
        steps: Vec<Potential>,
        free_edges: usize,
    ) -> Result<Self, BeckmannError> {
        if steps.is_empty() {
            return Err(BeckmannError::InvalidPotential(
                "at least one time step is required",
            ));
        }
        for h in &steps {
            if h.edge_count() != base_edges {
                return Err(BeckmannError::Dimension {
                    expected: base_edges,
                    found: h.edge_count(),
                });
            }
        }
        Ok(TimeExtendedPotential {
            base_edges,
            steps,
            free_edges,
        })
    }

    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    pub fn base_edges(&self) -> usize {
        self.base_edges
    }

    pub fn steps(&self) -> &[Potential] {
        &self.steps
    }

    fn block(&self, t: usize) -> core::ops::Range<usize> {
        t * self.base_edges..(t + 1) * self.base_edges
    }
}

/// A congestion energy `H` on nonnegative edge vectors.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    LocalSeparable(LocalSeparable),
    Quadratic(QuadraticForm),
    TimeExtended(TimeExtendedPotential),
}

impl Potential {
    pub fn local(xi: Vec<f64>, a: Vec<f64>, q: f64) -> Result<Self, BeckmannError> {
        LocalSeparable::new(xi, a, q).map(Potential::LocalSeparable)
    }

    pub fn quadratic(
        n: usize,
        triplets: &[(usize, usize, f64)],
        c: Vec<f64>,
    ) -> Result<Self, BeckmannError> {
        QuadraticForm::new(n, triplets, c).map(Potential::Quadratic)
    }

    pub fn time_extended(
        base_edges: usize,
        steps: Vec<Potential>,
        free_edges: usize,
    ) -> Result<Self, BeckmannError> {
        TimeExtendedPotential::new(base_edges, steps, free_edges).map(Potential::TimeExtended)
    }

    /// Number of edges the potential is defined on.
    pub fn edge_count(&self) -> usize {
        match self {
            Potential::LocalSeparable(h) => h.len(),
            Potential::Quadratic(h) => h.len(),
            Potential::TimeExtended(h) => h.base_edges * h.steps.len() + h.free_edges,
        }
    }

    pub fn value(&self, i: &[f64]) -> f64 {
        match self {
            Potential::LocalSeparable(h) => h.value(i),
            Potential::Quadratic(h) => h.value(i),
            Potential::TimeExtended(h) => h
                .steps
                .iter()
                .enumerate()
                .map(|(t, step)| step.value(&i[h.block(t)]))
                .sum(),
        }
    }

    /// `∇H(i)` as raw values.
    pub fn gradient_values(&self, i: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; i.len()];
        self.gradient_into(i, &mut out);
        out
    }

    fn gradient_into(&self, i: &[f64], out: &mut [f64]) {
        match self {
            Potential::LocalSeparable(h) => h.gradient_into(i, out),
            Potential::Quadratic(h) => h.gradient_into(i, out),
            Potential::TimeExtended(h) => {
                for (t, step) in h.steps.iter().enumerate() {
                    let block = h.block(t);
                    step.gradient_into(&i[block.clone()], &mut out[block]);
                }
                let start = h.base_edges * h.steps.len();
                for o in &mut out[start..] {
                    *o = 0.0;
                }
            }
        }
    }

    /// `dᵀ∇²H d` when `H` restricted to lines is quadratic, else `None`.
    pub(crate) fn curvature(&self, d: &[f64]) -> Option<f64> {
        match self {
            Potential::LocalSeparable(h) if h.is_quadratic() => {
                Some(d.iter().zip(&h.a).map(|(x, a)| a * x * x).sum())
            }
            Potential::LocalSeparable(_) => None,
            Potential::Quadratic(h) => Some(h.curvature(d)),
            Potential::TimeExtended(h) => {
                let mut total = 0.0;
                for (t, step) in h.steps.iter().enumerate() {
                    total += step.curvature(&d[h.block(t)])?;
                }
                Some(total)
            }
        }
    }

    /// Whether `H` is convex: always for separable costs, a semidefiniteness
    /// test for quadratic forms.
    pub fn is_convex(&self) -> bool {
        match self {
            Potential::LocalSeparable(_) => true,
            Potential::Quadratic(h) => h.is_positive_semidefinite(),
            Potential::TimeExtended(h) => h.steps.iter().all(Potential::is_convex),
        }
    }

    /// Whether the gradient is checked for sign at runtime.
    pub(crate) fn needs_sign_check(&self) -> bool {
        match self {
            Potential::LocalSeparable(_) => false,
            Potential::Quadratic(_) => true,
            Potential::TimeExtended(h) => h.steps.iter().any(Potential::needs_sign_check),
        }
    }

    /// `(m, M)`: bounds of `∂_e H` over the unit box `[0,1]^E`, taken over
    /// costed edges (deposit edges are excluded).
    pub fn gradient_bounds_unit_box(&self) -> (f64, f64) {
        match self {
            Potential::LocalSeparable(h) => {
                let lo = h.xi.iter().copied().fold(f64::INFINITY, f64::min);
                let hi =
                    h.xi.iter()
                        .zip(&h.a)
                        .map(|(x, a)| x + a)
                        .fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
            Potential::Quadratic(h) => (0..h.len())
                .map(|r| h.row_bounds(r))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
            Potential::TimeExtended(h) => h
                .steps
                .iter()
                .map(Potential::gradient_bounds_unit_box)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
                    (lo.min(a), hi.max(b))
                }),
        }
    }
}

/// `∇H(i)` as a metric.
///
/// Fails with a model violation when a component is below `−1e-12`: the
/// Beckmann theory requires `g ≥ 0` on visited flows.
pub fn potential_gradient(h: &Potential, i: &EdgeFlow) -> Result<Metric, BeckmannError> {
    if i.len() != h.edge_count() {
        return Err(BeckmannError::Dimension {
            expected: h.edge_count(),
            found: i.len(),
        });
    }
    let g = h.gradient_values(i.values());
    check_sign(&g)?;
    Ok(Metric::signed(g)?)
}

pub(crate) fn check_sign(g: &[f64]) -> Result<(), BeckmannError> {
    match g.iter().position(|&v| !(v >= -1e-12)) {
        Some(edge) => Err(BeckmannError::ModelViolation {
            edge,
            value: g[edge],
        }),
        None => Ok(()),
    }
}

/// `i(e) = h_e⁺(ξ(e))`: the inverse of `g_e` above `g_e(0) = ξ_e`, zero below.
pub fn legendre_flow(h: &LocalSeparable, xi: &Metric) -> Result<EdgeFlow, BeckmannError> {
    if xi.len() != h.len() {
        return Err(BeckmannError::Dimension {
            expected: h.len(),
            found: xi.len(),
        });
    }
    let p = 1.0 / (h.q - 1.0);
    let mut out = Vec::with_capacity(h.len());
    for (e, &x) in xi.values().iter().enumerate() {
        let excess = x - h.xi[e];
        if excess <= 0.0 {
            out.push(0.0);
        } else if h.a[e] > 0.0 {
            out.push(libm::pow(excess / h.a[e], p));
        } else {
            return Err(BeckmannError::LegendreDomain { edge: e, value: x });
        }
    }
    Ok(EdgeFlow::new(out)?)
}

/// Minimizer of `α ↦ H(i + α d)` over `[0, α_max]`.
///
/// Closed form when `H` is quadratic along lines, golden-section otherwise.
pub(crate) fn line_search(h: &Potential, i: &[f64], d: &[f64], slope: f64, alpha_max: f64) -> f64 {
    if alpha_max <= 0.0 {
        return 0.0;
    }
    if let Some(curv) = h.curvature(d) {
        if curv > 0.0 {
            return (-slope / curv).clamp(0.0, alpha_max);
        }
        let end = slope * alpha_max + 0.5 * curv * alpha_max * alpha_max;
        return if end < 0.0 { alpha_max } else { 0.0 };
    }
    let phi = |alpha: f64| {
        let point: Vec<f64> = i.iter().zip(d).map(|(x, y)| x + alpha * y).collect();
        h.value(&point)
    };
    let ratio = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, alpha_max);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * (1.0 + alpha_max) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = phi(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    // Endpoints are common minimizers for flat or monotone segments.
    let mut best = (phi(mid), mid);
    for cand in [0.0, alpha_max] {
        let v = phi(cand);
        if v < best.0 {
            best = (v, cand);
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_examples() {
        let h = Potential::local(vec![1.0], vec![0.0], 2.0).unwrap();
        let g = potential_gradient(&h, &EdgeFlow::new(vec![0.7]).unwrap()).unwrap();
        assert_eq!(g.values(), &[1.0]);
        let h = Potential::local(vec![0.0], vec![1.0], 2.0).unwrap();
        let g = potential_gradient(&h, &EdgeFlow::new(vec![0.5]).unwrap()).unwrap();
        assert_eq!(g.values(), &[0.5]);
    }

    #[test]
    fn coupled_quadratic_gradient() {
        let gamma = 0.5;
        let h = Potential::quadratic(
            2,
            &[(0, 0, 1.0), (1, 1, 1.0), (0, 1, gamma)],
            vec![0.1, 0.1],
        )
        .unwrap();
        let g = h.gradient_values(&[0.4, 0.2]);
        assert!((g[0] - (0.4 + gamma * 0.2 + 0.1)).abs() < 1e-15);
        assert!((g[1] - (0.2 + gamma * 0.4 + 0.1)).abs() < 1e-15);
    }

    #[test]
    fn negative_gradient_is_rejected() {
        let h = Potential::quadratic(2, &[(0, 1, -1.0)], vec![0.0, 0.0]).unwrap();
        let err = potential_gradient(&h, &EdgeFlow::new(vec![0.0, 1.0]).unwrap()).unwrap_err();
        assert!(matches!(err, BeckmannError::ModelViolation { edge: 0, .. }));
    }

    #[test]
    fn legendre_examples() {
        let id = LocalSeparable::new(vec![0.0], vec![1.0], 2.0).unwrap();
        let shifted = LocalSeparable::new(vec![1.0], vec![1.0], 2.0).unwrap();
        let at = |h: &LocalSeparable, x: f64| {
            legendre_flow(h, &Metric::signed(vec![x]).unwrap()).unwrap()[crate::graph::EdgeId(0)]
        };
        assert_eq!(at(&id, -1.0), 0.0);
        assert_eq!(at(&id, 0.0), 0.0);
        assert!((at(&shifted, 1.5) - 0.5).abs() < 1e-15);
        let flat = LocalSeparable::new(vec![1.0], vec![0.0], 2.0).unwrap();
        assert!(legendre_flow(&flat, &Metric::signed(vec![2.0]).unwrap()).is_err());
    }

    #[test]
    fn semidefiniteness() {
        let psd =
            QuadraticForm::new(2, &[(0, 0, 1.0), (1, 1, 1.0), (0, 1, 1.0)], vec![0.0; 2]).unwrap();
        assert!(psd.is_positive_semidefinite());
        let indefinite =
            QuadraticForm::new(2, &[(0, 0, 1.0), (1, 1, 1.0), (0, 1, 2.0)], vec![0.0; 2]).unwrap();
        assert!(!indefinite.is_positive_semidefinite());
    }

    #[test]
    fn time_extended_blocks() {
        let step = Potential::local(vec![0.0, 1.0], vec![1.0, 0.0], 2.0).unwrap();
        let h = Potential::time_extended(2, vec![step.clone(), step], 3).unwrap();
        assert_eq!(h.edge_count(), 7);
        let i = [1.0, 1.0, 2.0, 0.0, 5.0, 5.0, 5.0];
        assert_eq!(h.value(&i), 0.5 + 1.0 + 2.0);
        assert_eq!(
            h.gradient_values(&i),
            vec![1.0, 1.0, 2.0, 1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn golden_section_matches_closed_form() {
        let h = Potential::local(vec![0.0, 0.3], vec![1.0, 2.0], 3.0).unwrap();
        let i = [0.2, 0.8];
        let d = [0.8, -0.8];
        let alpha = line_search(&h, &i, &d, 0.0, 1.0);
        // The directional derivative vanishes at the minimizer.
        let at = |a: f64| {
            let g = h.gradient_values(&[i[0] + a * d[0], i[1] + a * d[1]]);
            g[0] * d[0] + g[1] * d[1]
        };
        assert!(at(alpha).abs() < 1e-6);
    }
}
