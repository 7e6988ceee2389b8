//! Sparse recovery of `x` from `y = P·x`.
//!
//! Two operators share one options/report contract:
//!
//! * [`l1_recover`]: basis pursuit, `argmin ‖x‖₁ s.t. P·x = y`, solved as a
//!   linear program over the split `x = x⁺ − x⁻` (or over `x ≥ 0` directly in
//!   hard non-negative mode).
//! * [`greedy_recover`]: sequential sparse matching pursuit, coordinate moves
//!   that minimize `‖P·x − y‖₁` with periodic pruning to the `k` largest
//!   entries.

mod greedy;
mod simplex;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{norm1, norm2, Matrix};
use crate::sensing::ProjectionMatrix;

pub use greedy::greedy_recover;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecoveryMethod {
    L1Min,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub method: RecoveryMethod,
    pub equality_tol: f64,
    /// Pivot budget for ℓ1 recovery, move budget for greedy recovery.
    pub max_iters: usize,
    /// Non-negative output. Negatives are clamped after unconstrained
    /// recovery unless `hard_nonneg` is also set.
    pub nonneg: bool,
    /// Impose `x ≥ 0` inside the solver instead of clamping afterwards.
    pub hard_nonneg: bool,
    pub sparsity_hint: Option<usize>,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            method: RecoveryMethod::L1Min,
            equality_tol: 1e-8,
            max_iters: 50_000,
            nonneg: false,
            hard_nonneg: false,
            sparsity_hint: None,
        }
    }
}

impl RecoveryOptions {
    pub fn greedy(k: usize) -> Self {
        Self {
            method: RecoveryMethod::Greedy,
            sparsity_hint: Some(k),
            ..Self::default()
        }
    }

    pub fn with_nonneg(mut self, hard: bool) -> Self {
        self.nonneg = true;
        self.hard_nonneg = hard;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.equality_tol > 0.0) {
            return Err(Error::InvalidArgument("equality_tol must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if self.sparsity_hint == Some(0) {
            return Err(Error::InvalidArgument("sparsity_hint must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub x_hat: Vec<f64>,
    /// `‖P·x̂ − y‖₂`
    pub residual_norm: f64,
    pub l1_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Entries set to zero by post-hoc non-negativity clamping.
    pub clamped: usize,
}

impl RecoveryReport {
    pub(crate) fn finish(
        pm: &ProjectionMatrix,
        y: &[f64],
        x_hat: Vec<f64>,
        iterations: usize,
        solved: bool,
        tol: f64,
    ) -> Self {
        let residual_norm = residual(pm, &x_hat, y);
        let converged = solved && residual_norm <= tol * norm2(y).max(1.0);
        Self {
            l1_norm: norm1(&x_hat),
            x_hat,
            residual_norm,
            iterations,
            converged,
            clamped: 0,
        }
    }

    fn zero(n: usize) -> Self {
        Self {
            x_hat: vec![0.0; n],
            residual_norm: 0.0,
            l1_norm: 0.0,
            iterations: 0,
            converged: true,
            clamped: 0,
        }
    }
}

pub(crate) fn residual(pm: &ProjectionMatrix, x: &[f64], y: &[f64]) -> f64 {
    let px = pm.apply(x).expect("length checked by caller");
    norm2(&px.iter().zip(y).map(|(a, b)| a - b).collect::<Vec<_>>())
}

fn check_input(pm: &ProjectionMatrix, y: &[f64], opts: &RecoveryOptions) -> Result<()> {
    opts.validate()?;
    if y.len() != pm.d {
        return dim_err(format!("measurement has length {}, P has {} rows", y.len(), pm.d));
    }
    Ok(())
}

/// Basis pursuit: `argmin ‖x‖₁ s.t. P·x = y`.
///
/// Non-convergence (iteration cap, numerically infeasible system) is reported
/// through `converged = false` rather than an error.
pub fn l1_recover(pm: &ProjectionMatrix, y: &[f64], opts: &RecoveryOptions) -> Result<RecoveryReport> {
    check_input(pm, y, opts)?;
    let n = pm.n;
    if y.iter().all(|&v| v == 0.0) {
        return Ok(RecoveryReport::zero(n));
    }
    let dense = pm.to_dense();
    let hard = opts.nonneg && opts.hard_nonneg;
    let (a, cost) = if hard {
        (dense, vec![1.0; n])
    } else {
        let split = Matrix::from_fn(
            pm.d,
            2 * n,
            |i, j| {
                if j < n {
                    dense[(i, j)]
                } else {
                    -dense[(i, j - n)]
                }
            },
        );
        (split, vec![1.0; 2 * n])
    };
    let sol = simplex::solve(&a, y, &cost, opts.max_iters);
    let mut x: Vec<f64> = if hard {
        sol.z.clone()
    } else {
        (0..n).map(|j| sol.z[j] - sol.z[j + n]).collect()
    };
    let solved = sol.status == simplex::LpStatus::Optimal;
    if solved {
        polish(pm, y, &mut x);
    }
    let mut report = RecoveryReport::finish(pm, y, x, sol.iterations, solved, opts.equality_tol);
    if opts.nonneg && !hard {
        clamp_nonneg(pm, y, &mut report, opts.equality_tol);
    }
    Ok(report)
}

/// Re-solve the equality system on the recovered support by least squares,
/// keeping the result only if it keeps every sign and lowers the residual.
/// Removes the round-off a long pivot sequence accumulates.
fn polish(pm: &ProjectionMatrix, y: &[f64], x: &mut [f64]) {
    let scale = crate::linalg::norm_inf(x);
    if scale == 0.0 {
        return;
    }
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() > 1e-12 * scale).collect();
    if support.is_empty() || support.len() > pm.d {
        return;
    }
    let sub = Matrix::from_fn(pm.d, support.len(), |i, c| {
        if pm.cols[support[c]].binary_search(&i).is_ok() {
            1.0
        } else {
            0.0
        }
    });
    let rhs = Matrix::from_vec(pm.d, 1, y.to_vec()).expect("column vector");
    let Ok(sol) = sub.solve_least_squares(&rhs) else {
        return;
    };
    let mut candidate = vec![0.0; x.len()];
    for (c, &j) in support.iter().enumerate() {
        if sol[(c, 0)].signum() != x[j].signum() {
            return;
        }
        candidate[j] = sol[(c, 0)];
    }
    if residual(pm, &candidate, y) < residual(pm, x, y) {
        x.copy_from_slice(&candidate);
    }
}

fn clamp_nonneg(pm: &ProjectionMatrix, y: &[f64], report: &mut RecoveryReport, tol: f64) {
    let clamped = report.x_hat.iter().filter(|&&v| v < 0.0).count();
    if clamped == 0 {
        return;
    }
    for v in report.x_hat.iter_mut() {
        *v = v.max(0.0);
    }
    report.residual_norm = residual(pm, &report.x_hat, y);
    report.l1_norm = norm1(&report.x_hat);
    report.converged = report.converged && report.residual_norm <= tol * norm2(y).max(1.0);
    report.clamped = clamped;
}

/// Dispatch on `opts.method`.
pub fn recover(pm: &ProjectionMatrix, y: &[f64], opts: &RecoveryOptions) -> Result<RecoveryReport> {
    match opts.method {
        RecoveryMethod::L1Min => l1_recover(pm, y, opts),
        RecoveryMethod::Greedy => greedy_recover(pm, y, opts),
    }
}

/// Recovery operator bound to one projection, counting its invocations.
#[derive(Debug)]
pub struct SparseRecovery<'a> {
    pm: &'a ProjectionMatrix,
    opts: RecoveryOptions,
    calls: AtomicUsize,
}

impl<'a> SparseRecovery<'a> {
    pub fn new(pm: &'a ProjectionMatrix, opts: RecoveryOptions) -> Result<Self> {
        opts.validate()?;
        Ok(Self {
            pm,
            opts,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn projection(&self) -> &ProjectionMatrix {
        self.pm
    }

    pub fn options(&self) -> &RecoveryOptions {
        &self.opts
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn recover(&self, y: &[f64]) -> Result<RecoveryReport> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        recover(self.pm, y, &self.opts)
    }

    /// Recover every column of a `d × r` matrix independently.
    pub fn recover_columns(&self, compressed: &Matrix) -> Result<ColumnRecovery> {
        if compressed.rows() != self.pm.d {
            return dim_err(format!(
                "compressed matrix has {} rows, P has {}",
                compressed.rows(),
                self.pm.d
            ));
        }
        let mut out = Matrix::zeros(self.pm.n, compressed.cols());
        let mut reports = Vec::with_capacity(compressed.cols());
        for j in 0..compressed.cols() {
            let rep = self.recover(&compressed.col(j))?;
            out.set_col(j, &rep.x_hat);
            reports.push(rep);
        }
        Ok(ColumnRecovery {
            recovered: out,
            reports,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRecovery {
    pub recovered: Matrix,
    pub reports: Vec<RecoveryReport>,
}

impl ColumnRecovery {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.converged)
    }
}

/// Recover each column of `compressed` (`d × r`) with a fresh operator.
pub fn recover_columns(pm: &ProjectionMatrix, compressed: &Matrix, opts: &RecoveryOptions) -> Result<ColumnRecovery> {
    SparseRecovery::new(pm, *opts)?.recover_columns(compressed)
}
