//! Minibatch couplings: exact assignment and entropic (Sinkhorn) plans.

use crate::error::{Error, Result};
use crate::num::Matrix;

/// How a minibatch of base draws is paired with data points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    Independent,
    Assignment,
    Entropic,
}

/// Pairing of base and data minibatches.
#[derive(Debug, Clone)]
pub struct CouplingPlan {
    pub kind: CouplingKind,
    /// For `Assignment`: sigma[i] is the base index paired with data point i.
    pub permutation: Option<Vec<usize>>,
    /// For `Entropic`: doubly stochastic plan with row/col sums 1/m.
    pub plan: Option<Matrix>,
}

impl CouplingPlan {
    pub fn independent(m: usize) -> Self {
        CouplingPlan {
            kind: CouplingKind::Independent,
            permutation: Some((0..m).collect()),
            plan: None,
        }
    }

    /// Total assignment cost under the given cost matrix.
    pub fn assignment_cost(&self, cost: &Matrix) -> f64 {
        let sigma = self.permutation.as_ref().expect("assignment plan");
        sigma.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum()
    }

    /// Transport cost <P, C>.
    pub fn plan_cost(&self, cost: &Matrix) -> f64 {
        let p = self.plan.as_ref().expect("entropic plan");
        p.data().iter().zip(cost.data()).map(|(a, b)| a * b).sum()
    }
}

/// Exact minimum-cost assignment (Jonker-Volgenant shortest augmenting path).
///
/// `cost[i][j]` is the cost of pairing data point i with base draw j; the
/// returned permutation minimizes the total cost over all pairings.
pub fn ot_assignment(cost: &Matrix) -> Result<CouplingPlan> {
    if !cost.is_square() {
        return Err(Error::NotSquare { rows: cost.rows(), cols: cost.cols() });
    }
    let n = cost.rows();
    if n == 0 {
        return Ok(CouplingPlan {
            kind: CouplingKind::Assignment,
            permutation: Some(vec![]),
            plan: None,
        });
    }

    const UNASSIGNED: usize = usize::MAX;
    // row_of[j] = data row currently assigned to column j
    let mut row_of = vec![UNASSIGNED; n];
    let mut col_of = vec![UNASSIGNED; n];
    let mut u = vec![0.0_f64; n]; // row potentials
    let mut v = vec![0.0_f64; n]; // column potentials

    for start in 0..n {
        // Dijkstra over columns for an augmenting path from `start`
        let mut min_to = vec![f64::INFINITY; n];
        let mut prev_col = vec![UNASSIGNED; n];
        let mut done = vec![false; n];
        let sink;
        let mut i = start;
        let mut last_col = UNASSIGNED;
        loop {
            let mut best = f64::INFINITY;
            let mut best_j = UNASSIGNED;
            for j in 0..n {
                if done[j] {
                    continue;
                }
                let reduced = cost.get(i, j) - u[i] - v[j];
                let through = if last_col == UNASSIGNED { 0.0 } else { min_to[last_col] };
                let cand = through + reduced;
                if cand < min_to[j] {
                    min_to[j] = cand;
                    prev_col[j] = last_col;
                }
                if min_to[j] < best {
                    best = min_to[j];
                    best_j = j;
                }
            }
            let j = best_j;
            done[j] = true;
            last_col = j;
            if row_of[j] == UNASSIGNED {
                sink = j;
                break;
            }
            i = row_of[j];
        }
        // update potentials
        let delta = min_to[sink];
        u[start] += delta;
        for j in 0..n {
            if done[j] && j != sink {
                let ri = row_of[j];
                u[ri] += delta - min_to[j];
                v[j] -= delta - min_to[j];
            }
        }
        // augment along the path
        let mut j = sink;
        while j != UNASSIGNED {
            let pj = prev_col[j];
            let ri = if pj == UNASSIGNED { start } else { row_of[pj] };
            row_of[j] = ri;
            col_of[ri] = j;
            j = pj;
        }
    }

    Ok(CouplingPlan {
        kind: CouplingKind::Assignment,
        permutation: Some(col_of),
        plan: None,
    })
}

/// Entropically regularized OT with uniform marginals 1/m, solved by
/// log-space Sinkhorn iterations.
pub fn sinkhorn(cost: &Matrix, eps: f64, iters: usize) -> Result<CouplingPlan> {
    if !cost.is_square() {
        return Err(Error::NotSquare { rows: cost.rows(), cols: cost.cols() });
    }
    assert!(eps > 0.0, "epsilon must be positive");
    let m = cost.rows();
    let log_marginal = -(m as f64).ln();

    // log P_ij = (f_i + g_j - C_ij) / eps, updated so row sums then column
    // sums hit 1/m.
    let mut f = vec![0.0_f64; m];
    let mut g = vec![0.0_f64; m];
    let mut buf = vec![0.0_f64; m];
    let mut violation = f64::INFINITY;

    for _ in 0..iters {
        // f_i <- f_i + eps*(log(1/m) - log sum_j exp((f_i + g_j - C_ij)/eps))
        for i in 0..m {
            for j in 0..m {
                buf[j] = (f[i] + g[j] - cost.get(i, j)) / eps;
            }
            let lse = crate::num::special::log_sum_exp(&buf);
            f[i] += eps * (log_marginal - lse);
        }
        for j in 0..m {
            for i in 0..m {
                buf[i] = (f[i] + g[j] - cost.get(i, j)) / eps;
            }
            let lse = crate::num::special::log_sum_exp(&buf);
            g[j] += eps * (log_marginal - lse);
        }
        // row-sum violation after the column update
        violation = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                buf[j] = (f[i] + g[j] - cost.get(i, j)) / eps;
            }
            let row_sum = crate::num::special::log_sum_exp(&buf).exp();
            violation = violation.max((row_sum - 1.0 / m as f64).abs());
        }
        if violation < 1e-10 {
            break;
        }
    }
    if violation > 1e-6 {
        return Err(Error::NonConvergence { iters, violation });
    }

    let mut plan = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            plan.set(i, j, ((f[i] + g[j] - cost.get(i, j)) / eps).exp());
        }
    }
    Ok(CouplingPlan { kind: CouplingKind::Entropic, permutation: None, plan: Some(plan) })
}

/// Squared-distance cost matrix C_ij = ||x0[j] - x1[i]||^2.
pub fn squared_cost(x1: &[Vec<f64>], x0: &[Vec<f64>]) -> Matrix {
    let m = x1.len();
    let mut c = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            c.set(i, j, crate::num::dist2(&x0[j], &x1[i]));
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::RngStream;

    fn brute_force_min(cost: &Matrix) -> f64 {
        let n = cost.rows();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |sigma| {
            let c: f64 = sigma.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
            if c < best {
                best = c;
            }
        });
        best
    }

    fn permute(xs: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
        if k == xs.len() {
            visit(xs);
            return;
        }
        for i in k..xs.len() {
            xs.swap(k, i);
            permute(xs, k + 1, visit);
            xs.swap(k, i);
        }
    }

    #[test]
    fn assignment_identity_and_singleton() {
        let c = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let plan = ot_assignment(&c).unwrap();
        assert_eq!(plan.permutation.as_ref().unwrap(), &vec![0, 1]);
        assert_eq!(plan.assignment_cost(&c), 0.0);

        let c1 = Matrix::from_rows(&[&[7.0]]);
        let plan1 = ot_assignment(&c1).unwrap();
        assert_eq!(plan1.permutation.as_ref().unwrap(), &vec![0]);
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = RngStream::new(17, 0);
        for n in 2..=7 {
            for _ in 0..20 {
                let mut c = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        c.set(i, j, rng.uniform_range(0.0, 10.0));
                    }
                }
                let plan = ot_assignment(&c).unwrap();
                let sigma = plan.permutation.as_ref().unwrap();
                // bijection check
                let mut seen = vec![false; n];
                for &j in sigma {
                    assert!(!seen[j]);
                    seen[j] = true;
                }
                let got = plan.assignment_cost(&c);
                let want = brute_force_min(&c);
                assert!((got - want).abs() < 1e-10, "n={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn assignment_rejects_rectangular() {
        let c = Matrix::zeros(2, 3);
        assert!(matches!(ot_assignment(&c), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn sinkhorn_zero_cost_is_uniform() {
        let m = 4;
        let c = Matrix::zeros(m, m);
        let plan = sinkhorn(&c, 0.5, 200).unwrap();
        let p = plan.plan.as_ref().unwrap();
        for v in p.data() {
            assert!((v - 1.0 / (m * m) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn sinkhorn_marginals_and_concentration() {
        let c = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let plan = sinkhorn(&c, 0.01, 5000).unwrap();
        let p = plan.plan.as_ref().unwrap();
        let m = 2;
        for i in 0..m {
            let row: f64 = (0..m).map(|j| p.get(i, j)).sum();
            let col: f64 = (0..m).map(|j| p.get(j, i)).sum();
            assert!((row - 0.5).abs() < 1e-8);
            assert!((col - 0.5).abs() < 1e-8);
        }
        // closed-form 2x2 tilting: off-diagonal mass exp(-1/eps) relative
        assert!(p.get(0, 1) < 0.05 / m as f64);
        assert!(p.get(1, 0) < 0.05 / m as f64);
        assert!((p.get(0, 0) - 0.5).abs() < 0.01);
    }

    #[test]
    fn sinkhorn_cost_decreases_with_eps() {
        let mut rng = RngStream::new(23, 0);
        let m = 8;
        let mut c = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                c.set(i, j, rng.uniform_range(0.0, 4.0));
            }
        }
        let costs: Vec<f64> = [2.0, 0.5, 0.1]
            .iter()
            .map(|&eps| sinkhorn(&c, eps, 4000).unwrap().plan_cost(&c))
            .collect();
        assert!(costs[1] <= costs[0] + 1e-9);
        assert!(costs[2] <= costs[1] + 1e-9);
    }
}
