//! Order-3 tensors, CP decomposition and the compressed tensor pipeline.

mod cp;
mod dense;
mod pipeline;
mod power;

use crate::linalg::Matrix;

pub use cp::{cp_als, nncp_als, CpOptions, CpResult};
pub use dense::{cp_reconstruct, khatri_rao, Tensor3, TensorFactors};
pub use pipeline::{factorize_recover_tensor, TensorPipelineOptions, TensorPipelineOutput};
pub use power::{random_unit_vector, symmetry_defect, tensor_power_method, PowerResult};

/// Default relative tolerance for [`check_full_column_rank`].
pub const RANK_TOL: f64 = 1e-10;

/// `σ_min ≥ tol · σ_max`, with at least as many rows as columns.
pub fn check_full_column_rank(a: &Matrix, tol: f64) -> bool {
    if a.cols() == 0 || a.rows() < a.cols() {
        return false;
    }
    let s = a.singular_values();
    let smax = s[0];
    let smin = *s.last().expect("nonempty");
    smax > 0.0 && smin >= tol * smax
}
