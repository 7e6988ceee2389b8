//! Dense two-phase tableau simplex for `min cᵀz  s.t.  A z = b, z ≥ 0`.
//!
//! Sized for the recovery problems in this crate (a few hundred rows, about a
//! thousand columns). Measurement vectors of sparse signals leave most rows of
//! `b` at zero, which makes the plain problem massively degenerate; the solver
//! therefore works on a right-hand side shifted by a tiny deterministic
//! perturbation, and once the final basis is known recomputes the basic
//! values against the true `b`. Reduced costs do not depend on `b`, so an
//! optimal basis of the shifted problem whose basic values stay non-negative
//! for the true `b` is optimal for it as well.
//!
//! The tableau is rebuilt from the original data every [`REINVERT_EVERY`]
//! pivots to stop round-off from accumulating. Entering variables follow
//! Dantzig's rule, falling back to Bland's rule after a run of degenerate
//! pivots.

use nalgebra::{DMatrix, DVector};

use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct LpSolution {
    pub z: Vec<f64>,
    pub status: LpStatus,
    pub iterations: usize,
}

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 50;
const REINVERT_EVERY: usize = 400;
const PERTURBATION: f64 = 1e-7;

struct Tableau<'a> {
    a: &'a Matrix,
    /// sign applied to each row so that the working right-hand side is ≥ 0
    sign: Vec<f64>,
    rhs: Vec<f64>,
    rows: usize,
    structural: usize,
    /// structural + artificial columns, then the right-hand side
    width: usize,
    t: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// column costs for the current phase (structural + artificial)
    cost: Vec<f64>,
}

impl<'a> Tableau<'a> {
    fn new(a: &'a Matrix, sign: Vec<f64>, rhs: Vec<f64>) -> Self {
        let (m, n) = a.shape();
        let width = n + m + 1;
        let mut cost = vec![0.0; n + m];
        cost[n..].iter_mut().for_each(|c| *c = 1.0);
        let mut tab = Self {
            a,
            sign,
            rhs,
            rows: m,
            structural: n,
            width,
            t: vec![0.0; m * width],
            obj: vec![0.0; width],
            basis: (n..n + m).collect(),
            cost,
        };
        let aug = tab.augmented();
        for i in 0..m {
            for j in 0..width {
                tab.t[i * width + j] = aug[(i, j)];
            }
        }
        tab.refresh_objective();
        tab
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * self.width + self.width - 1]
    }

    /// `[diag(sign)·A | I | rhs]`.
    fn augmented(&self) -> DMatrix<f64> {
        let (m, n) = (self.rows, self.structural);
        let mut full = DMatrix::zeros(m, self.width);
        for i in 0..m {
            for j in 0..n {
                full[(i, j)] = self.sign[i] * self.a[(i, j)];
            }
            full[(i, n + i)] = 1.0;
            full[(i, self.width - 1)] = self.rhs[i];
        }
        full
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut bm = DMatrix::zeros(self.rows, self.rows);
        for (c, &bj) in self.basis.iter().enumerate() {
            if bj < self.structural {
                for i in 0..self.rows {
                    bm[(i, c)] = self.sign[i] * self.a[(i, bj)];
                }
            } else {
                bm[(bj - self.structural, c)] = 1.0;
            }
        }
        bm
    }

    /// Rebuild `B⁻¹·[A | I | b]` from the original data. A numerically
    /// singular basis leaves the tableau untouched.
    fn reinvert(&mut self) {
        let Some(sol) = self.basis_matrix().lu().solve(&self.augmented()) else {
            return;
        };
        if sol.iter().any(|x| !x.is_finite()) {
            return;
        }
        let w = self.width;
        for i in 0..self.rows {
            for j in 0..w {
                self.t[i * w + j] = sol[(i, j)];
            }
        }
        self.refresh_objective();
    }

    /// `obj = c − c_Bᵀ·T` (objective value, negated, in the last slot).
    fn refresh_objective(&mut self) {
        let w = self.width;
        let mut obj = vec![0.0; w];
        obj[..w - 1].copy_from_slice(&self.cost);
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                for (o, &x) in obj.iter_mut().zip(&self.t[i * w..(i + 1) * w]) {
                    *o -= cb * x;
                }
            }
        }
        self.obj = obj;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let inv = 1.0 / self.t[row * w + col];
        for x in &mut self.t[row * w..(row + 1) * w] {
            *x *= inv;
        }
        self.t[row * w + col] = 1.0;
        let (before, rest) = self.t.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        let eliminate = |r: &mut [f64]| {
            let f = r[col];
            if f != 0.0 {
                for (x, &p) in r.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                r[col] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.obj);
        self.basis[row] = col;
    }

    /// Simplex iterations on the current objective; only structural columns
    /// may enter.
    fn optimize(&mut self, max_iters: usize, iters: &mut usize) -> LpStatus {
        let w = self.width;
        let mut degenerate = 0usize;
        let mut since_reinvert = 0usize;
        loop {
            if *iters >= max_iters {
                return LpStatus::IterationLimit;
            }
            if since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                since_reinvert = 0;
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..self.structural {
                let rc = self.obj[j];
                if rc < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(col) = enter else {
                return LpStatus::Optimal;
            };
            let colmax = (0..self.rows).map(|i| self.t[i * w + col]).fold(0.0, f64::max);
            let piv_tol = PIVOT_TOL.max(1e-7 * colmax);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.t[i * w + col];
                if a <= piv_tol {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                let take = match leave {
                    None => true,
                    Some(_) if ratio < best_ratio * (1.0 - 1e-12) => true,
                    Some(l) if ratio <= best_ratio * (1.0 + 1e-12) => {
                        if bland {
                            self.basis[i] < self.basis[l]
                        } else {
                            a > self.t[l * w + col]
                        }
                    }
                    Some(_) => false,
                };
                if take {
                    leave = Some(i);
                    best_ratio = best_ratio.min(ratio);
                }
            }
            let Some(row) = leave else {
                return LpStatus::Unbounded;
            };
            if best_ratio <= 0.0 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col);
            *iters += 1;
            since_reinvert += 1;
        }
    }

    fn switch_to_phase_two(&mut self, c: &[f64]) {
        let n = self.structural;
        let w = self.width;
        // drive artificials out of the basis; rows without a usable
        // structural entry are redundant and keep their artificial at zero
        for i in 0..self.rows {
            if self.basis[i] >= n {
                let row = &self.t[i * w..i * w + n];
                if let Some(j) = (0..n)
                    .filter(|&j| row[j].abs() > 1e-7)
                    .max_by(|&x, &y| row[x].abs().total_cmp(&row[y].abs()))
                {
                    self.pivot(i, j);
                }
            }
        }
        self.cost[..n].copy_from_slice(c);
        self.cost[n..].iter_mut().for_each(|v| *v = 0.0);
        self.reinvert();
    }

    /// Basic values for the unsigned, unperturbed right-hand side `b`.
    fn basic_values(&self, b: &[f64]) -> Option<Vec<f64>> {
        let signed: Vec<f64> = b.iter().zip(&self.sign).map(|(x, s)| x * s).collect();
        let sol = self.basis_matrix().lu().solve(&DVector::from_vec(signed))?;
        Some(sol.iter().copied().collect())
    }

    fn extract(&self, values: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.structural];
        for (i, &bj) in self.basis.iter().enumerate() {
            if bj < self.structural {
                z[bj] = values[i].max(0.0);
            }
        }
        z
    }

    fn current_values(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.rhs(i)).collect()
    }

    /// Accept basic values for the true right-hand side if they are
    /// non-negative up to round-off and no artificial carries weight.
    fn extract_checked(&self, values: &[f64], scale: f64) -> Option<Vec<f64>> {
        let tol = 1e-9 * scale.max(1.0);
        for (i, &bj) in self.basis.iter().enumerate() {
            if values[i] < -tol || (bj >= self.structural && values[i].abs() > tol) {
                return None;
            }
        }
        let mut z = self.extract(values);
        let zmax = z.iter().fold(0.0f64, |m, x| m.max(*x));
        for v in z.iter_mut() {
            if *v <= 1e-13 * zmax {
                *v = 0.0;
            }
        }
        Some(z)
    }
}

/// Deterministic perturbation magnitudes in `[1, 2)`.
fn jitter(i: usize) -> f64 {
    let h = crate::rng::derive_seed(0x5eed, i as u64);
    1.0 + (h >> 11) as f64 / (1u64 << 53) as f64
}

/// One two-phase run; the second value is the solution re-evaluated at the
/// unperturbed right-hand side when that is valid.
fn run(a: &Matrix, b: &[f64], c: &[f64], max_iters: usize, perturb: bool) -> (LpSolution, Option<Vec<f64>>) {
    let m = a.rows();
    let scale = b.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(f64::MIN_POSITIVE);
    let sign: Vec<f64> = b.iter().map(|&x| if x < 0.0 { -1.0 } else { 1.0 }).collect();
    let rhs: Vec<f64> = (0..m)
        .map(|i| sign[i] * b[i] + if perturb { PERTURBATION * scale * jitter(i) } else { 0.0 })
        .collect();
    let mut tab = Tableau::new(a, sign, rhs);
    let mut iters = 0;
    let status = tab.optimize(max_iters, &mut iters);
    if status == LpStatus::IterationLimit {
        let z = tab.extract(&tab.current_values());
        return (
            LpSolution {
                z,
                status,
                iterations: iters,
            },
            None,
        );
    }
    tab.reinvert();
    let infeasibility = -tab.obj[tab.width - 1];
    if infeasibility > 1e-9 * scale.max(1.0) * (m as f64) {
        let z = tab.extract(&tab.current_values());
        return (
            LpSolution {
                z,
                status: LpStatus::Infeasible,
                iterations: iters,
            },
            None,
        );
    }
    tab.switch_to_phase_two(c);
    let status = tab.optimize(max_iters, &mut iters);
    tab.reinvert();
    let exact = if status == LpStatus::Optimal {
        tab.basic_values(b).and_then(|v| tab.extract_checked(&v, scale))
    } else {
        None
    };
    let z = tab.extract(&tab.current_values());
    (
        LpSolution {
            z,
            status,
            iterations: iters,
        },
        exact,
    )
}

/// Solve the standard-form LP. `a` is `m × N`.
pub(crate) fn solve(a: &Matrix, b: &[f64], c: &[f64], max_iters: usize) -> LpSolution {
    debug_assert_eq!(b.len(), a.rows());
    debug_assert_eq!(c.len(), a.cols());
    let (sol, exact) = run(a, b, c, max_iters, true);
    match (sol.status, exact) {
        (LpStatus::Optimal, Some(z)) => LpSolution { z, ..sol },
        // the shifted basis did not carry over (or the shifted problem was
        // infeasible because `A` lacks full row rank): solve unshifted
        _ => {
            let remaining = max_iters.saturating_sub(sol.iterations).max(1);
            let (plain, exact) = run(a, b, c, remaining, false);
            let iterations = sol.iterations + plain.iterations;
            match exact {
                Some(z) => LpSolution {
                    z,
                    status: plain.status,
                    iterations,
                },
                None => LpSolution { iterations, ..plain },
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6  → x = 1.6, y = 1.2
        let a = Matrix::from_rows(&[vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]]).unwrap();
        let sol = solve(&a, &[4.0, 6.0], &[-1.0, -1.0, 0.0, 0.0], 100);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.z[0] - 1.6).abs() < 1e-12);
        assert!((sol.z[1] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert_eq!(solve(&a, &[-1.0], &[1.0, 1.0], 100).status, LpStatus::Infeasible);
        let a = Matrix::from_rows(&[vec![1.0, -1.0]]).unwrap();
        assert_eq!(solve(&a, &[1.0], &[0.0, -1.0], 100).status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_rows() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
        let sol = solve(&a, &[1.0, 2.0, 1.0], &[1.0, 3.0, 1.0], 100);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.z[0] - 1.0).abs() < 1e-12 && sol.z[1].abs() < 1e-12 && (sol.z[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_zero_rhs() {
        let a = Matrix::from_rows(&[vec![1.0, -1.0, 1.0], vec![0.0, 1.0, -1.0]]).unwrap();
        let sol = solve(&a, &[0.0, 0.0], &[1.0, 1.0, 1.0], 100);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.z.iter().all(|&v| v == 0.0));
    }
}
