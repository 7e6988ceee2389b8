//! ℓ1-penalized sparse PCA: `min ½‖M − W·H‖²_F + λ‖W‖₁` with unit-norm rows
//! of `H`, by alternating a per-row lasso for `W` (cyclic coordinate descent)
//! with a least-squares update of `H`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};

use super::{check_rank, FactorPair};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpcaOptions {
    pub lambda: f64,
    pub iters: usize,
    /// Duality-gap tolerance of each lasso, relative to `½‖row‖²`.
    pub lasso_tol: f64,
    pub max_sweeps: usize,
    /// Early stop on relative objective change below this value.
    pub tol: f64,
}

impl Default for SpcaOptions {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            iters: 100,
            lasso_tol: 1e-8,
            max_sweeps: 1000,
            tol: 1e-10,
        }
    }
}

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Lasso `min ½‖y − Hᵀw‖² + λ‖w‖₁` in Gram form (`gram = HHᵀ`,
/// `c = H·y`, `yy = ‖y‖²`), warm-started at `w`.
fn lasso_row(gram: &Matrix, c: &[f64], yy: f64, lambda: f64, w: &mut [f64], tol: f64, max_sweeps: usize) {
    let r = w.len();
    let mut gw = gram.matvec(w).expect("square");
    for _ in 0..max_sweeps {
        for l in 0..r {
            let gll = gram[(l, l)];
            if gll <= 0.0 {
                w[l] = 0.0;
                continue;
            }
            let rho = c[l] - gw[l] + gll * w[l];
            let new = soft(rho, lambda) / gll;
            let delta = new - w[l];
            if delta != 0.0 {
                for (i, g) in gw.iter_mut().enumerate() {
                    *g += gram[(i, l)] * delta;
                }
                w[l] = new;
            }
        }
        // ‖y − Hᵀw‖² and Hρ from the Gram quantities
        let wc = dot(w, c);
        let res_sq = (yy - 2.0 * wc + dot(w, &gw)).max(0.0);
        let corr: Vec<f64> = c.iter().zip(&gw).map(|(a, b)| a - b).collect();
        let corr_max = corr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let primal = 0.5 * res_sq + lambda * w.iter().map(|v| v.abs()).sum::<f64>();
        let s = if corr_max > lambda { lambda / corr_max } else { 1.0 };
        // θ = s·ρ; dual = ⟨θ, y⟩ − ½‖θ‖²
        let dual = s * (yy - wc) - 0.5 * s * s * res_sq;
        if primal - dual <= tol * (0.5 * yy).max(f64::MIN_POSITIVE) {
            break;
        }
    }
}

fn truncated_svd_init(m: &Matrix, r: usize) -> (Matrix, Matrix) {
    let svd = m.to_nalgebra().svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let w = Matrix::from_fn(m.rows(), r, |i, l| u[(i, order[l])] * svd.singular_values[order[l]]);
    let h = Matrix::from_fn(r, m.cols(), |l, j| vt[(order[l], j)]);
    (w, h)
}

fn objective(m: &Matrix, w: &Matrix, h: &Matrix, lambda: f64) -> Result<f64> {
    let r = m.sub(&w.matmul(h)?)?;
    let fit: f64 = r.as_slice().iter().map(|v| v * v).sum();
    Ok(0.5 * fit + lambda * w.as_slice().iter().map(|v| v.abs()).sum::<f64>())
}

fn update_w(m: &Matrix, h: &Matrix, w: &mut Matrix, opts: &SpcaOptions) -> Result<()> {
    let gram = h.matmul_tr(h)?;
    let cross = m.matmul_tr(h)?; // n × r, row i is H·M_iᵀ
    if opts.lambda == 0.0 {
        *w = gram.solve_least_squares(&cross.transpose())?.transpose();
        return Ok(());
    }
    for i in 0..m.rows() {
        let row = m.row(i);
        let yy = dot(row, row);
        let c = cross.row(i).to_vec();
        lasso_row(
            &gram,
            &c,
            yy,
            opts.lambda,
            w.row_mut(i),
            opts.lasso_tol,
            opts.max_sweeps,
        );
    }
    Ok(())
}

/// Least-squares `H`, then rows scaled to unit ℓ2 with the scale moved into `W`.
/// Rows belonging to all-zero columns of `W` keep their previous value.
fn update_h(m: &Matrix, w: &mut Matrix, h: &mut Matrix) -> Result<()> {
    let active: Vec<usize> = (0..w.cols()).filter(|&l| w.col(l).iter().any(|&v| v != 0.0)).collect();
    if active.is_empty() {
        return Ok(());
    }
    let sub = w.select_columns(&active);
    let sol = sub.solve_least_squares(m)?;
    for (a, &l) in active.iter().enumerate() {
        let row = sol.row(a);
        let norm = norm2(row);
        if norm == 0.0 {
            continue;
        }
        h.row_mut(l).iter_mut().zip(row).for_each(|(dst, &v)| *dst = v / norm);
        for i in 0..w.rows() {
            w[(i, l)] *= norm;
        }
    }
    Ok(())
}

/// Sparse PCA initialized from the rank-`r` truncated SVD (`W = U_r Σ_r`,
/// `H = V_rᵀ`). Deterministic; every returned row of `H` has unit norm.
pub fn sparse_pca(m: &Matrix, r: usize, opts: &SpcaOptions) -> Result<FactorPair> {
    check_rank(m, r)?;
    if !(opts.lambda >= 0.0) || !opts.lambda.is_finite() {
        return Err(Error::InvalidArgument("lambda must be finite and >= 0".into()));
    }
    if opts.iters == 0 {
        return Err(Error::InvalidArgument("iters must be >= 1".into()));
    }
    let (mut w, mut h) = truncated_svd_init(m, r);
    let mut trace = Vec::with_capacity(opts.iters);
    let mut prev = objective(m, &w, &h, opts.lambda)?;
    for _ in 0..opts.iters {
        update_w(m, &h, &mut w, opts)?;
        update_h(m, &mut w, &mut h)?;
        let obj = objective(m, &w, &h, opts.lambda)?;
        trace.push(obj);
        if (prev - obj).abs() <= opts.tol * prev.max(f64::MIN_POSITIVE) {
            break;
        }
        prev = obj;
    }
    Ok(FactorPair {
        w,
        h,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{nnz_eps, rel_err, NNZ_EPS_REL};
    use crate::synthgen::{gen_matrix_instance, MatrixModel, ValueDist};

    fn planted(seed: u64, noise: f64) -> crate::synthgen::SynthInstance {
        gen_matrix_instance(MatrixModel {
            n: 60,
            m: 40,
            r: 3,
            k: 6,
            noise_ratio: noise,
            nonneg: false,
            seed,
            values: ValueDist::Gaussian,
        })
        .unwrap()
    }

    #[test]
    fn unregularized_exact_rank() {
        let inst = planted(1, 0.0);
        let fp = sparse_pca(&inst.m, 3, &SpcaOptions::default()).unwrap();
        assert!(rel_err(&fp.reconstruct(), &inst.m).unwrap() <= 1e-6);
    }

    #[test]
    fn rows_of_h_unit_norm() {
        let inst = planted(2, 0.1);
        for lambda in [0.0, 0.1, 1.0] {
            for iters in [1, 3, 10] {
                let fp = sparse_pca(
                    &inst.m,
                    3,
                    &SpcaOptions {
                        lambda,
                        iters,
                        ..Default::default()
                    },
                )
                .unwrap();
                for l in 0..3 {
                    assert!((norm2(fp.h.row(l)) - 1.0).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn lasso_matches_closed_form_for_orthonormal_design() {
        let gram = Matrix::identity(3);
        let c = [2.0, -0.3, 0.7];
        let mut w = vec![0.0; 3];
        lasso_row(&gram, &c, 10.0, 0.5, &mut w, 1e-12, 100);
        for (a, b) in w.iter().zip([1.5, 0.0, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn larger_lambda_gives_no_more_nonzeros() {
        for seed in 0..3 {
            let inst = planted(seed, 0.1);
            let counts: Vec<usize> = [0.0, 0.01, 0.1, 1.0]
                .iter()
                .map(|&lambda| {
                    let fp = sparse_pca(
                        &inst.m,
                        3,
                        &SpcaOptions {
                            lambda,
                            iters: 50,
                            ..Default::default()
                        },
                    )
                    .unwrap();
                    nnz_eps(&fp.w, NNZ_EPS_REL)
                })
                .collect();
            assert!(counts.windows(2).all(|c| c[1] <= c[0]), "{counts:?}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let inst = planted(0, 0.0);
        assert!(sparse_pca(&inst.m, 41, &SpcaOptions::default()).is_err());
        assert!(sparse_pca(
            &inst.m,
            2,
            &SpcaOptions {
                lambda: -1.0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
