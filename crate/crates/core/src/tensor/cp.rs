//! CP decomposition by alternating least squares.
//!
//! The first `orth_sweeps` sweeps follow the orthogonalized schedule: each
//! mode update contracts `T` against orthonormal bases of the other two
//! factors (thin QR), which spreads the components apart before plain ALS
//! takes over. With `nonneg` every update is projected onto the non-negative
//! orthant. After the warm-up, a mode update that would increase the
//! reconstruction error is rejected, so the recorded trace never increases.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};
use crate::rng::{self, streams};

use super::{cp_reconstruct, khatri_rao, Tensor3, TensorFactors};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpOptions {
    pub iters: usize,
    pub seed: u64,
    pub nonneg: bool,
    pub orth_sweeps: usize,
    /// Independent initializations; the lowest final error wins.
    pub restarts: usize,
    /// Stop once a sweep improves the relative error by less than this.
    pub tol: f64,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self {
            iters: 200,
            seed: 0,
            nonneg: false,
            orth_sweeps: 5,
            restarts: 1,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpResult {
    /// Unit-norm columns, scale in `weights`.
    pub factors: TensorFactors,
    /// Relative error `‖T − T̂‖_F / ‖T‖_F` after the warm-up and after each
    /// later sweep.
    pub error_trace: Vec<f64>,
    pub sweeps: usize,
    pub restart: usize,
}

impl CpResult {
    pub fn final_error(&self) -> f64 {
        self.error_trace.last().copied().unwrap_or(f64::INFINITY)
    }
}

struct State {
    f: [Matrix; 3],
    w: Vec<f64>,
}

fn rel_error(t: &Tensor3, tnorm: &f64, s: &State) -> f64 {
    let fac =
        TensorFactors::new(s.f[0].clone(), s.f[1].clone(), s.f[2].clone(), Some(s.w.clone())).expect("consistent");
    let rec = cp_reconstruct(&fac).expect("consistent");
    let diff = t.sub(&rec).expect("same dims").frobenius_norm();
    if *tnorm > 0.0 {
        diff / tnorm
    } else {
        diff
    }
}

/// `T₍mode₎ · (other ⊙ other)` for the Khatri–Rao ordering of each unfolding.
fn mttkrp(unfolded: &[Matrix; 3], mode: usize, f: &[&Matrix; 3]) -> Matrix {
    let kr = match mode {
        0 => khatri_rao(f[2], f[1]),
        1 => khatri_rao(f[2], f[0]),
        _ => khatri_rao(f[1], f[0]),
    }
    .expect("consistent ranks");
    unfolded[mode].matmul(&kr).expect("consistent shapes")
}

fn random_unit_column<R: rand::Rng>(rows: usize, nonneg: bool, g: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..rows)
            .map(|_| {
                let x: f64 = StandardNormal.sample(g);
                if nonneg {
                    x.abs()
                } else {
                    x
                }
            })
            .collect();
        let nrm = norm2(&v);
        if nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
            return v;
        }
    }
}

fn update_mode<R: rand::Rng>(
    unfolded: &[Matrix; 3],
    s: &mut State,
    mode: usize,
    orthogonalize: bool,
    nonneg: bool,
    g: &mut R,
) -> Result<()> {
    let r = s.w.len();
    let others: Vec<usize> = (0..3).filter(|&m| m != mode).collect();
    let mut basis: [Option<Matrix>; 3] = [None, None, None];
    if orthogonalize {
        for &o in &others {
            if s.f[o].rows() >= r {
                basis[o] = Some(s.f[o].thin_q());
            }
        }
    }
    let used: [&Matrix; 3] = std::array::from_fn(|m| basis[m].as_ref().unwrap_or(&s.f[m]));
    let mut x = mttkrp(unfolded, mode, &used);
    let gram = used[others[0]]
        .tr_matmul(used[others[0]])?
        .hadamard(&used[others[1]].tr_matmul(used[others[1]])?)?;
    // X·G = V  ⇔  G·Xᵀ = Vᵀ  (G symmetric)
    x = gram.solve_least_squares(&x.transpose())?.transpose();
    if nonneg {
        x = x.map(|v| v.max(0.0));
    }
    let norms = x.normalize_columns();
    for l in 0..r {
        if norms[l] == 0.0 {
            x.set_col(l, &random_unit_column(x.rows(), nonneg, g));
        }
    }
    s.f[mode] = x;
    s.w = norms;
    Ok(())
}

fn single_run(t: &Tensor3, unfolded: &[Matrix; 3], r: usize, opts: &CpOptions, seed: u64) -> Result<CpResult> {
    let (n, m1, m2) = t.dims();
    let mut g = rng::stream(seed, streams::INIT);
    let init = |rows: usize, g: &mut rand_chacha::ChaCha8Rng| {
        Matrix::from_fn(rows, r, |_, _| {
            let x: f64 = StandardNormal.sample(g);
            if opts.nonneg {
                x.abs()
            } else {
                x
            }
        })
    };
    let mut s = State {
        f: [init(n, &mut g), init(m1, &mut g), init(m2, &mut g)],
        w: vec![1.0; r],
    };
    for f in s.f.iter_mut() {
        f.normalize_columns();
    }
    let tnorm = t.frobenius_norm();
    let warm = opts.orth_sweeps.min(opts.iters);
    for _ in 0..warm {
        for mode in 0..3 {
            update_mode(unfolded, &mut s, mode, true, opts.nonneg, &mut g)?;
        }
    }
    let mut err = rel_error(t, &tnorm, &s);
    let mut trace = vec![err];
    let mut sweeps = warm;
    while sweeps < opts.iters {
        sweeps += 1;
        let before = err;
        for mode in 0..3 {
            let saved = (s.f[mode].clone(), s.w.clone());
            update_mode(unfolded, &mut s, mode, false, opts.nonneg, &mut g)?;
            let e = rel_error(t, &tnorm, &s);
            if e <= err {
                err = e;
            } else {
                s.f[mode] = saved.0;
                s.w = saved.1;
            }
        }
        trace.push(err);
        if before - err <= opts.tol || err <= 1e-14 {
            break;
        }
    }
    let factors = TensorFactors::new(s.f[0].clone(), s.f[1].clone(), s.f[2].clone(), Some(s.w))?;
    Ok(CpResult {
        factors,
        error_trace: trace,
        sweeps,
        restart: 0,
    })
}

/// Rank-`r` CP decomposition of `t`.
pub fn cp_als(t: &Tensor3, r: usize, opts: &CpOptions) -> Result<CpResult> {
    let (n, m1, m2) = t.dims();
    let bound = (n * m1).min(n * m2).min(m1 * m2);
    if r == 0 || r > bound {
        return Err(Error::InvalidArgument(format!(
            "rank {r} must be in 1..={bound} for a {n}x{m1}x{m2} tensor"
        )));
    }
    if opts.iters == 0 || opts.restarts == 0 {
        return Err(Error::InvalidArgument("iters and restarts must be >= 1".into()));
    }
    if t.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("tensor has non-finite entries".into()));
    }
    let unfolded = [t.unfold1(), t.unfold2(), t.unfold3()];
    let mut best: Option<CpResult> = None;
    for restart in 0..opts.restarts {
        let seed = if restart == 0 {
            opts.seed
        } else {
            rng::derive_seed(opts.seed, restart as u64)
        };
        let mut res = single_run(t, &unfolded, r, opts, seed)?;
        res.restart = restart;
        if best.as_ref().is_none_or(|b| res.final_error() < b.final_error()) {
            best = Some(res);
        }
        if best.as_ref().is_some_and(|b| b.final_error() <= 1e-10) {
            break;
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Non-negative CP: [`cp_als`] with projection onto `≥ 0` after every update
/// and half-normal initialization.
pub fn nncp_als(t: &Tensor3, r: usize, iters: usize, seed: u64) -> Result<CpResult> {
    cp_als(
        t,
        r,
        &CpOptions {
            iters,
            seed,
            nonneg: true,
            ..Default::default()
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::match_factors;

    fn planted(n: usize, m1: usize, m2: usize, r: usize, nonneg: bool, seed: u64) -> (Tensor3, TensorFactors) {
        let mut g = rng::stream(seed, 3);
        let mut f = [
            Matrix::gaussian(n, r, &mut g),
            Matrix::gaussian(m1, r, &mut g),
            Matrix::gaussian(m2, r, &mut g),
        ];
        if nonneg {
            for m in f.iter_mut() {
                *m = m.map(f64::abs);
            }
        }
        let [a, b, c] = f;
        let fac = TensorFactors::new(a, b, c, None).unwrap();
        (cp_reconstruct(&fac).unwrap(), fac)
    }

    #[test]
    fn recovers_planted_nonneg_rank_three() {
        let mut ok = 0;
        for seed in 0..10 {
            let (t, truth) = planted(10, 10, 10, 3, true, seed);
            let res = nncp_als(&t, 3, 200, seed).unwrap();
            let f = &res.factors;
            let good = [(&f.a, &truth.a), (&f.b, &truth.b), (&f.c, &truth.c)]
                .iter()
                .all(|(est, tru)| match_factors(est, tru).unwrap().min_abs_correlation() >= 0.95);
            ok += good as usize;
        }
        assert!(ok >= 8, "{ok}/10");
    }

    #[test]
    fn trace_monotone_and_nonneg() {
        let (t, _) = planted(8, 7, 6, 3, true, 1);
        let noisy = Tensor3::from_fn((8, 7, 6), |i, j, k| {
            t.get(i, j, k) + 0.05 * (((i * 7 + j * 3 + k) % 5) as f64)
        });
        let res = cp_als(
            &noisy,
            3,
            &CpOptions {
                iters: 50,
                nonneg: true,
                tol: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.error_trace.windows(2).all(|w| w[1] <= w[0]));
        let f = &res.factors;
        assert!(f.a.min_entry() >= 0.0 && f.b.min_entry() >= 0.0 && f.c.min_entry() >= 0.0);
    }

    #[test]
    fn exact_on_generic_signed_tensor() {
        let (t, _) = planted(12, 9, 8, 3, false, 2);
        let res = cp_als(
            &t,
            3,
            &CpOptions {
                iters: 500,
                restarts: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(res.final_error() < 1e-6, "{}", res.final_error());
    }

    #[test]
    fn rank_validation() {
        let t = Tensor3::zeros(2, 2, 2);
        assert!(cp_als(&t, 0, &CpOptions::default()).is_err());
        assert!(cp_als(&t, 5, &CpOptions::default()).is_err());
    }
}
