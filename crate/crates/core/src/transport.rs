//! Small dense transportation problems, solved exactly by the transportation
//! simplex (northwest-corner start, MODI pricing, Bland's rule).
//!
//! Infinite costs mark forbidden cells. Feasibility is settled first by an
//! augmenting-path max-flow on the allowed cells; the simplex then runs with
//! forbidden cells priced at a penalty large enough that no optimal basis
//! keeps mass on them.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub(crate) enum TransportError {
    #[error("only {routed} of {total} units can be routed through finite-cost cells")]
    Infeasible { routed: f64, total: f64 },
    #[error("transportation simplex did not terminate")]
    Cycling,
}

/// Optimal plan as `(row, column, mass)` with positive mass.
pub(crate) fn solve(
    supply: &[f64],
    demand: &[f64],
    cost: &[Vec<f64>],
) -> Result<Vec<(usize, usize, f64)>, TransportError> {
    let m = supply.len();
    let n = demand.len();
    let total: f64 = supply.iter().sum();
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    let routed = max_flow(supply, demand, cost);
    let slack = 1e-12 * (1.0 + total);
    if routed < total - slack {
        return Err(TransportError::Infeasible { routed, total });
    }

    let finite_max = cost
        .iter()
        .flatten()
        .filter(|c| c.is_finite())
        .fold(0.0f64, |a, &c| a.max(libm::fabs(c)));
    let penalty = 2.0 * (m + n) as f64 * (finite_max + 1.0) + 1.0;
    let price = |i: usize, j: usize| {
        let c = cost[i][j];
        if c.is_finite() {
            c
        } else {
            penalty
        }
    };

    // Balance demand to the supply total so the staircase closes exactly.
    let demand_total: f64 = demand.iter().sum();
    let mut a = supply.to_vec();
    let mut b: Vec<f64> = demand.iter().map(|d| d * total / demand_total).collect();

    // Northwest corner: a staircase of exactly m + n − 1 basic cells.
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let x = a[i].min(b[j]);
        basis.push((i, j, x));
        a[i] -= x;
        b[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && a[i] <= b[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }

    let eps = 1e-12 * (1.0 + finite_max);
    let max_pivots = 50 * (m + n) * (m + n) + 100;
    for _ in 0..max_pivots {
        let (u, v) = duals(m, n, &basis, &price);
        let mut entering = None;
        'search: for r in 0..m {
            for c in 0..n {
                if basis.iter().any(|&(bi, bj, _)| bi == r && bj == c) {
                    continue;
                }
                if price(r, c) - u[r] - v[c] < -eps {
                    entering = Some((r, c));
                    break 'search;
                }
            }
        }
        let Some((r, c)) = entering else {
            let plan = basis
                .into_iter()
                .filter(|&(_, _, x)| x > 0.0)
                .collect::<Vec<_>>();
            return Ok(plan);
        };
        let path = tree_path(m, n, &basis, r, m + c);
        // Cells along the tree path alternate −, +, −, … starting next to the
        // entering row; the entering cell itself is +.
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                let (bi, bj, x) = basis[cell];
                let better = match leaving {
                    None => true,
                    Some(l) => x < theta || (x == theta && (bi, bj) < (basis[l].0, basis[l].1)),
                };
                if better {
                    theta = x;
                    leaving = Some(cell);
                }
            }
        }
        let leaving = leaving.expect("a cycle has a minus cell");
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[cell].2 -= theta;
            } else {
                basis[cell].2 += theta;
            }
        }
        basis[leaving] = (r, c, theta);
    }
    Err(TransportError::Cycling)
}

/// MODI potentials `u_i + v_j = c_ij` on basic cells, with `u_0 = 0`.
fn duals<F: Fn(usize, usize) -> f64>(
    m: usize,
    n: usize,
    basis: &[(usize, usize, f64)],
    price: &F,
) -> (Vec<f64>, Vec<f64>) {
    let mut pot = vec![f64::NAN; m + n];
    let adjacency = adjacency(m, n, basis);
    pot[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        for &cell in &adjacency[node] {
            let (i, j, _) = basis[cell];
            let c = price(i, j);
            let (other, value) = if node < m {
                (m + j, c - pot[node])
            } else {
                (i, c - pot[node])
            };
            if pot[other].is_nan() {
                pot[other] = value;
                queue.push_back(other);
            }
        }
    }
    let v = pot.split_off(m);
    (pot, v)
}

fn adjacency(m: usize, n: usize, basis: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); m + n];
    for (k, &(i, j, _)) in basis.iter().enumerate() {
        adj[i].push(k);
        adj[m + j].push(k);
    }
    adj
}

/// Basic cells on the tree path from bipartite node `from` to node `to`.
fn tree_path(
    m: usize,
    n: usize,
    basis: &[(usize, usize, f64)],
    from: usize,
    to: usize,
) -> Vec<usize> {
    let adj = adjacency(m, n, basis);
    let mut via: Vec<Option<usize>> = vec![None; m + n];
    let mut seen = vec![false; m + n];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(node) = queue.pop_front() {
        if node == to {
            break;
        }
        for &cell in &adj[node] {
            let (i, j, _) = basis[cell];
            let other = if node < m { m + j } else { i };
            if !seen[other] {
                seen[other] = true;
                via[other] = Some(cell);
                queue.push_back(other);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = to;
    while node != from {
        let cell = via[node].expect("basis is a spanning tree");
        cells.push(cell);
        let (i, j, _) = basis[cell];
        node = if node < m { m + j } else { i };
    }
    cells.reverse();
    cells
}

/// Largest mass routable from supplies to demands through finite cells.
fn max_flow(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let m = supply.len();
    let n = demand.len();
    let mut left = supply.to_vec();
    let mut right = demand.to_vec();
    // Cell flows, so that augmenting paths may reroute earlier choices.
    let mut cell = vec![vec![0.0f64; n]; m];
    let tiny = 1e-15;
    let mut routed = 0.0;
    loop {
        // BFS over rows/columns in the residual graph from rows with spare supply.
        let mut prev: Vec<Option<usize>> = vec![None; m + n];
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::new();
        for i in 0..m {
            if left[i] > tiny {
                seen[i] = true;
                queue.push_back(i);
            }
        }
        let mut end = None;
        while let Some(node) = queue.pop_front() {
            if node < m {
                for j in 0..n {
                    if cost[node][j].is_finite() && !seen[m + j] {
                        seen[m + j] = true;
                        prev[m + j] = Some(node);
                        queue.push_back(m + j);
                    }
                }
            } else {
                let j = node - m;
                if right[j] > tiny {
                    end = Some(j);
                    break;
                }
                for i in 0..m {
                    if cell[i][j] > tiny && !seen[i] {
                        seen[i] = true;
                        prev[i] = Some(node);
                        queue.push_back(i);
                    }
                }
            }
        }
        let Some(j_end) = end else {
            return routed;
        };
        let mut delta = right[j_end];
        let mut node = m + j_end;
        while let Some(p) = prev[node] {
            if node >= m {
                // p is a row sending forward into column node − m.
            } else {
                delta = delta.min(cell[node][p - m]);
            }
            node = p;
        }
        delta = delta.min(left[node]);
        let start = node;
        let mut node = m + j_end;
        while let Some(p) = prev[node] {
            if node >= m {
                cell[p][node - m] += delta;
            } else {
                cell[node][p - m] -= delta;
            }
            node = p;
        }
        left[start] -= delta;
        right[j_end] -= delta;
        routed += delta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan_cost(plan: &[(usize, usize, f64)], cost: &[Vec<f64>]) -> f64 {
        plan.iter().map(|&(i, j, x)| x * cost[i][j]).sum()
    }

    #[test]
    fn textbook_instance() {
        let supply = [20.0, 30.0, 25.0];
        let demand = [10.0, 10.0, 35.0, 20.0];
        let cost = vec![
            vec![8.0, 6.0, 10.0, 9.0],
            vec![9.0, 12.0, 13.0, 7.0],
            vec![14.0, 9.0, 16.0, 5.0],
        ];
        let plan = solve(&supply, &demand, &cost).unwrap();
        // Optimum from an independent LP solve.
        assert!((plan_cost(&plan, &cost) - 675.0).abs() < 1e-9);
        for (r, &s) in supply.iter().enumerate() {
            let row: f64 = plan.iter().filter(|c| c.0 == r).map(|c| c.2).sum();
            assert!((row - s).abs() < 1e-9);
        }
    }

    #[test]
    fn forbidden_cells_are_avoided() {
        let inf = f64::INFINITY;
        let cost = vec![vec![inf, 1.0], vec![1.0, 100.0]];
        let plan = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((plan_cost(&plan, &cost) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_when_forbidden() {
        let inf = f64::INFINITY;
        let cost = vec![vec![inf, 1.0], vec![inf, 1.0]];
        assert!(matches!(
            solve(&[0.5, 0.5], &[0.5, 0.5], &cost),
            Err(TransportError::Infeasible { .. })
        ));
    }

    #[test]
    fn degenerate_square() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let plan = solve(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert!((plan_cost(&plan, &cost) - 1.0).abs() < 1e-12);
    }
}
