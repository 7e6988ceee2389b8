//! Low-rank matrix factorization and the two compressed pipelines.

mod nmf;
mod pipeline;
mod spca;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

pub use nmf::{nmf, nmf_gradients, nmf_init_variance, nmf_objective, NmfOptions, DEFAULT_NMF_ITERS};
pub use pipeline::{
    factorize, factorize_recover_matrix, recover_factorize_matrix, spca_lambda_grid, FactorMethod, PipelineOptions,
    PipelineOutput, PipelineTiming,
};
pub use spca::{sparse_pca, SpcaOptions};

/// `W·H` with the per-iteration objective values of the solver that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorPair {
    pub w: Matrix,
    pub h: Matrix,
    pub objective_trace: Vec<f64>,
}

impl FactorPair {
    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.w.matmul(&self.h).expect("factor shapes agree")
    }

    pub fn report(&self, method: &str, seed: u64) -> FactorReport {
        FactorReport {
            method: method.to_string(),
            r: self.rank(),
            iters: self.objective_trace.len(),
            objective_trace: self.objective_trace.clone(),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub method: String,
    pub r: usize,
    pub iters: usize,
    pub objective_trace: Vec<f64>,
    pub seed: u64,
}

pub(crate) fn check_rank(m: &Matrix, r: usize) -> crate::Result<()> {
    let (rows, cols) = m.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(crate::Error::InvalidArgument(format!(
            "rank {r} must be in 1..={} for a {rows}x{cols} matrix",
            rows.min(cols)
        )));
    }
    Ok(())
}
