//! Factorize-recover and recover-factorize for matrices.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::recovery::{RecoveryOptions, RecoveryReport, SparseRecovery};
use crate::sensing::ProjectionMatrix;

use super::{nmf, sparse_pca, FactorPair, FactorReport, NmfOptions, SpcaOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FactorMethod {
    Nmf,
    SparsePca { lambda: f64 },
}

impl FactorMethod {
    pub fn name(&self) -> &'static str {
        match self {
            FactorMethod::Nmf => "nmf",
            FactorMethod::SparsePca { .. } => "spca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub method: FactorMethod,
    pub iters: usize,
    pub seed: u64,
    /// For NMF the recovery is always run with non-negativity enabled.
    pub recovery: RecoveryOptions,
}

impl PipelineOptions {
    pub fn new(method: FactorMethod) -> Self {
        let iters = match method {
            FactorMethod::Nmf => super::DEFAULT_NMF_ITERS,
            FactorMethod::SparsePca { .. } => SpcaOptions::default().iters,
        };
        Self {
            method,
            iters,
            seed: 0,
            recovery: RecoveryOptions::default(),
        }
    }

    fn recovery_options(&self) -> RecoveryOptions {
        let mut r = self.recovery;
        if self.method == FactorMethod::Nmf {
            r.nonneg = true;
        }
        r
    }
}

/// Wall-clock per stage, milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineTiming {
    pub factorize_ms: f64,
    pub recovery_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// `n × r`.
    pub w_hat: Matrix,
    /// `r × m`.
    pub h_hat: Matrix,
    /// The factorization that was computed: of the compressed data for
    /// factorize-recover, of the recovered ambient data for recover-factorize.
    pub factors: FactorPair,
    pub factor_report: FactorReport,
    pub recovery_calls: usize,
    pub recovery_reports: Vec<RecoveryReport>,
    pub timing: PipelineTiming,
}

impl PipelineOutput {
    pub fn unconverged_recoveries(&self) -> usize {
        self.recovery_reports.iter().filter(|r| !r.converged).count()
    }
}

/// Factorize `m` at rank `r` with the chosen method.
///
/// NMF here tolerates negative entries in `m` (noise pushed through the
/// projection produces them); the objective and updates are unchanged.
pub fn factorize(m: &Matrix, r: usize, method: FactorMethod, iters: usize, seed: u64) -> Result<FactorPair> {
    match method {
        FactorMethod::Nmf => nmf(
            m,
            r,
            &NmfOptions {
                iters,
                seed,
                allow_negative: true,
                ..Default::default()
            },
        ),
        FactorMethod::SparsePca { lambda } => sparse_pca(
            m,
            r,
            &SpcaOptions {
                lambda,
                iters,
                ..Default::default()
            },
        ),
    }
}

fn check_compressed(pm: &ProjectionMatrix, mt: &Matrix) -> Result<()> {
    if mt.rows() != pm.d {
        return Err(Error::InvalidDimension(format!(
            "compressed data has {} rows, projection has d = {}",
            mt.rows(),
            pm.d
        )));
    }
    Ok(())
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Factorize `M̃ = P·M` to `(W̃, H̃)`, then recover each of the `r` columns of
/// `W̃`. Returns `Ŵ = R(W̃)`, `Ĥ = H̃`.
pub fn factorize_recover_matrix(
    pm: &ProjectionMatrix,
    mt: &Matrix,
    r: usize,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    check_compressed(pm, mt)?;
    let start = Instant::now();
    let factors = factorize(mt, r, opts.method, opts.iters, opts.seed)?;
    let factorize_ms = elapsed_ms(start);

    let t = Instant::now();
    let rec = SparseRecovery::new(pm, opts.recovery_options())?;
    let cols = rec.recover_columns(&factors.w)?;
    let recovery_ms = elapsed_ms(t);

    Ok(PipelineOutput {
        w_hat: cols.recovered,
        h_hat: factors.h.clone(),
        factor_report: factors.report(opts.method.name(), opts.seed),
        factors,
        recovery_calls: rec.calls(),
        recovery_reports: cols.reports,
        timing: PipelineTiming {
            factorize_ms,
            recovery_ms,
            total_ms: elapsed_ms(start),
        },
    })
}

/// Recover every one of the `m` columns of `M̃`, then factorize the recovered
/// `n × m` matrix.
pub fn recover_factorize_matrix(
    pm: &ProjectionMatrix,
    mt: &Matrix,
    r: usize,
    opts: &PipelineOptions,
) -> Result<PipelineOutput> {
    check_compressed(pm, mt)?;
    let start = Instant::now();
    let rec = SparseRecovery::new(pm, opts.recovery_options())?;
    let cols = rec.recover_columns(mt)?;
    let recovery_ms = elapsed_ms(start);

    let t = Instant::now();
    let factors = factorize(&cols.recovered, r, opts.method, opts.iters, opts.seed)?;
    let factorize_ms = elapsed_ms(t);

    Ok(PipelineOutput {
        w_hat: factors.w.clone(),
        h_hat: factors.h.clone(),
        factor_report: factors.report(opts.method.name(), opts.seed),
        factors,
        recovery_calls: rec.calls(),
        recovery_reports: cols.reports,
        timing: PipelineTiming {
            factorize_ms,
            recovery_ms,
            total_ms: elapsed_ms(start),
        },
    })
}

/// Sparse PCA regularization grid for data `m`: `{0.005, 0.01, 0.05, 0.1}`
/// times `scale(m)`, where the scale is the largest entry magnitude of the
/// rank-`r` principal component scores `U_r Σ_r`.
pub fn spca_lambda_grid(m: &Matrix, r: usize) -> Vec<f64> {
    let scale = spca_lambda_scale(m, r);
    [0.005, 0.01, 0.05, 0.1].iter().map(|f| f * scale).collect()
}

fn spca_lambda_scale(m: &Matrix, r: usize) -> f64 {
    let svd = m.to_nalgebra().svd(true, false);
    let u = svd.u.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut best = 0.0f64;
    for &l in order.iter().take(r) {
        for i in 0..m.rows() {
            best = best.max((u[(i, l)] * svd.singular_values[l]).abs());
        }
    }
    best
}
