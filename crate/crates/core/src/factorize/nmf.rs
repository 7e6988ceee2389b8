//! Alternating non-negative least squares, each half-step solved by
//! projected gradient with Armijo backtracking along the projection arc.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{self, streams};

use super::{check_rank, FactorPair};

pub const DEFAULT_NMF_ITERS: usize = 250;

const SIGMA: f64 = 0.01;
const BETA: f64 = 0.1;
const MAX_STEP_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmfOptions {
    pub iters: usize,
    pub seed: u64,
    /// Projected-gradient iterations allowed per subproblem.
    pub inner_iters: usize,
    /// Accept inputs with negative entries instead of rejecting them.
    pub allow_negative: bool,
}

impl Default for NmfOptions {
    fn default() -> Self {
        Self {
            iters: DEFAULT_NMF_ITERS,
            seed: 0,
            inner_iters: 50,
            allow_negative: false,
        }
    }
}

/// `‖M − W·H‖²_F`.
pub fn nmf_objective(m: &Matrix, w: &Matrix, h: &Matrix) -> Result<f64> {
    let r = m.sub(&w.matmul(h)?)?;
    Ok(r.as_slice().iter().map(|v| v * v).sum())
}

/// `(2(WH − M)Hᵀ, 2Wᵀ(WH − M))`.
pub fn nmf_gradients(m: &Matrix, w: &Matrix, h: &Matrix) -> Result<(Matrix, Matrix)> {
    let e = w.matmul(h)?.sub(m)?;
    Ok((e.matmul_tr(h)?.scale(2.0), w.tr_matmul(&e)?.scale(2.0)))
}

/// Variance of the half-normal initialization, `Σ M / (n·m·r)`.
pub fn nmf_init_variance(m: &Matrix, r: usize) -> f64 {
    m.sum() / (m.rows() * m.cols() * r) as f64
}

fn projected_grad_sq(x: &Matrix, g: &Matrix) -> f64 {
    x.as_slice()
        .iter()
        .zip(g.as_slice())
        .filter(|(&xv, &gv)| gv < 0.0 || xv > 0.0)
        .map(|(_, &gv)| gv * gv)
        .sum()
}

/// Solves `min_{X ≥ 0} ½‖V − A·X‖²` given `gram = AᵀA` and `cross = AᵀV`,
/// starting from `x`. Returns the iterations used.
fn nls_subproblem(gram: &Matrix, cross: &Matrix, x: &mut Matrix, tol: f64, max_iter: usize) -> usize {
    let mut alpha = 1.0;
    let mut iter = 0;
    while iter < max_iter {
        iter += 1;
        let grad = gram.matmul(x).expect("shapes").sub(cross).expect("shapes");
        if projected_grad_sq(x, &grad).sqrt() < tol {
            break;
        }
        let mut prev: Option<Matrix> = None;
        let mut decreasing = false;
        for trial in 0..MAX_STEP_TRIALS {
            let xn = Matrix::from_vec(
                x.rows(),
                x.cols(),
                x.as_slice()
                    .iter()
                    .zip(grad.as_slice())
                    .map(|(&a, &g)| (a - alpha * g).max(0.0))
                    .collect(),
            )
            .expect("shape");
            let d = xn.sub(x).expect("shape");
            let gd: f64 = grad.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a * b).sum();
            let qd = gram.matmul(&d).expect("shape");
            let dqd: f64 = qd.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a * b).sum();
            let sufficient = (1.0 - SIGMA) * gd + 0.5 * dqd < 0.0;
            if trial == 0 {
                decreasing = !sufficient;
            }
            if decreasing {
                if sufficient {
                    *x = xn;
                    break;
                }
                alpha *= BETA;
            } else {
                let same = prev.as_ref().is_some_and(|p| p == &xn);
                if !sufficient || same {
                    if let Some(p) = prev.take() {
                        *x = p;
                    }
                    break;
                }
                alpha /= BETA;
                prev = Some(xn);
            }
        }
        // every enlarging trial succeeded up to the cap
        if let Some(p) = prev {
            *x = p;
        }
    }
    iter
}

/// Non-negative factorization `M ≈ W·H` with `W, H ≥ 0`.
///
/// Runs exactly `opts.iters` outer sweeps (H then W). The trace records
/// `‖M − WH‖²_F` after each sweep; a sweep that would raise it through
/// rounding is discarded, so the trace is non-increasing.
pub fn nmf(m: &Matrix, r: usize, opts: &NmfOptions) -> Result<FactorPair> {
    check_rank(m, r)?;
    if opts.iters == 0 {
        return Err(Error::InvalidArgument("iters must be >= 1".into()));
    }
    if m.as_slice()
        .iter()
        .any(|&v| !v.is_finite() || (v < 0.0 && !opts.allow_negative))
    {
        return Err(Error::InvalidInput(
            "NMF input must be finite and entrywise non-negative".into(),
        ));
    }
    let (n, cols) = m.shape();
    let sd = nmf_init_variance(m, r).sqrt();
    let mut g = rng::stream(opts.seed, streams::INIT);
    let mut w;
    let mut h;
    if sd > 0.0 {
        let normal = Normal::new(0.0, sd).expect("positive sd");
        w = Matrix::from_fn(n, r, |_, _| normal.sample(&mut g).abs());
        h = Matrix::from_fn(r, cols, |_, _| normal.sample(&mut g).abs());
    } else {
        w = Matrix::zeros(n, r);
        h = Matrix::zeros(r, cols);
    }

    let (gw, gh) = nmf_gradients(m, &w, &h)?;
    let init_grad = (gw.as_slice().iter().chain(gh.as_slice()).map(|v| v * v).sum::<f64>()).sqrt() * 0.5;
    let mut tol_w = 1e-3 * init_grad;
    let mut tol_h = tol_w;
    let mut obj = nmf_objective(m, &w, &h)?;
    let mut trace = Vec::with_capacity(opts.iters);
    for _ in 0..opts.iters {
        let mut w_new = w.clone();
        let mut h_new = h.clone();

        let gram = w_new.tr_matmul(&w_new)?;
        let cross = w_new.tr_matmul(m)?;
        if nls_subproblem(&gram, &cross, &mut h_new, tol_h, opts.inner_iters) == 1 {
            tol_h *= 0.1;
        }

        let gram = h_new.matmul_tr(&h_new)?;
        let cross = h_new.matmul_tr(m)?;
        let mut wt = w_new.transpose();
        if nls_subproblem(&gram, &cross, &mut wt, tol_w, opts.inner_iters) == 1 {
            tol_w *= 0.1;
        }
        w_new = wt.transpose();

        let new_obj = nmf_objective(m, &w_new, &h_new)?;
        if new_obj <= obj {
            w = w_new;
            h = h_new;
            obj = new_obj;
        }
        trace.push(obj);
    }
    Ok(FactorPair {
        w,
        h,
        objective_trace: trace,
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_non_increasing_and_factors_nonneg(
            n in 3usize..15, m in 3usize..15, r in 1usize..4, seed in any::<u64>(),
        ) {
            let r = r.min(n).min(m);
            let mut g = rng::stream(seed, 5);
            let x = Matrix::gaussian(n, m, &mut g).map(f64::abs);
            let opts = NmfOptions { iters: 30, seed, ..Default::default() };
            let fit = nmf(&x, r, &opts).unwrap();
            prop_assert!(fit.objective_trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(fit.w.min_entry() >= 0.0 && fit.h.min_entry() >= 0.0);
            prop_assert_eq!(fit, nmf(&x, r, &opts).unwrap());
        }
    }
}
