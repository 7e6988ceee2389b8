//! Planted instances.
//!
//! Matrices follow `W = B ⊙ Y`, `M = W·H + E`: every column of the binary
//! support `B` has exactly `k` ones at uniformly chosen rows, `Y` and `H` are
//! i.i.d. draws from a continuous law, and `E` is Gaussian noise rescaled to
//! an exact Frobenius ratio. Tensors use the same sparse model for `A` with
//! dense Gaussian `B`, `C`.
//!
//! Seeds are split per component with [`crate::rng::stream`]: support,
//! values, right factor, noise and third factor each draw from their own
//! stream, so changing e.g. the noise ratio never perturbs `W` or `H`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::rng::{self, streams};
use crate::sensing::sample_subset;
use crate::tensor::{check_full_column_rank, cp_reconstruct, Tensor3, TensorFactors, RANK_TOL};

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ValueDist {
    #[default]
    Gaussian,
    /// Magnitudes uniform on `[0.5, 1.5)` with a random sign.
    UniformMagnitude,
}

impl ValueDist {
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        loop {
            let v = match self {
                ValueDist::Gaussian => rng.sample(StandardNormal),
                ValueDist::UniformMagnitude => {
                    let mag: f64 = Uniform::new(0.5, 1.5).expect("valid range").sample(rng);
                    if rng.random::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                }
            };
            // exact zeros would break the nnz = k invariant
            if v != 0.0 {
                return v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixModel {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub k: usize,
    pub noise_ratio: f64,
    pub nonneg: bool,
    pub seed: u64,
    #[serde(default)]
    pub values: ValueDist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthInstance {
    pub w: Matrix,
    pub h: Matrix,
    pub support: Vec<Vec<usize>>,
    pub y: Matrix,
    pub m_clean: Matrix,
    pub m: Matrix,
    pub model: MatrixModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceMeta {
    model: MatrixModel,
    support: Vec<Vec<usize>>,
}

fn sparse_columns<R1: Rng, R2: Rng>(
    n: usize,
    r: usize,
    k: usize,
    dist: ValueDist,
    support_rng: &mut R1,
    value_rng: &mut R2,
) -> (Vec<Vec<usize>>, Matrix) {
    let mut y = Matrix::zeros(n, r);
    let mut support = Vec::with_capacity(r);
    for j in 0..r {
        let s = sample_subset(support_rng, n, k);
        for &i in &s {
            y[(i, j)] = dist.draw(value_rng);
        }
        support.push(s);
    }
    (support, y)
}

/// Draw a planted matrix instance.
pub fn gen_matrix_instance(model: MatrixModel) -> Result<SynthInstance> {
    let MatrixModel {
        n,
        m,
        r,
        k,
        noise_ratio,
        nonneg,
        seed,
        values,
    } = model;
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    if r == 0 || r > n.min(m) {
        return Err(Error::InvalidArgument(format!("need 1 <= r <= min(n, m), got r={r}")));
    }
    if !(noise_ratio >= 0.0) {
        return Err(Error::InvalidArgument("noise_ratio must be >= 0".into()));
    }
    let mut srng = rng::stream(seed, streams::SUPPORT);
    let mut vrng = rng::stream(seed, streams::VALUES);
    let (support, mut y) = sparse_columns(n, r, k, values, &mut srng, &mut vrng);
    let mut hrng = rng::stream(seed, streams::RIGHT);
    let mut h = Matrix::from_fn(r, m, |_, _| values.draw(&mut hrng));
    let mut redraws = 0;
    while h.numerical_rank(RANK_TOL) < r {
        redraws += 1;
        if redraws > MAX_REDRAWS {
            return Err(Error::Degenerate("could not draw a full-row-rank H".into()));
        }
        h = Matrix::from_fn(r, m, |_, _| values.draw(&mut hrng));
    }
    if nonneg {
        y = y.map(f64::abs);
        h = h.map(f64::abs);
    }
    let w = y.clone();
    let m_clean = w.matmul(&h)?;
    let m_noisy = if noise_ratio == 0.0 {
        m_clean.clone()
    } else {
        let mut erng = rng::stream(seed, streams::NOISE);
        let e = Matrix::gaussian(n, m, &mut erng);
        let scale = noise_ratio * m_clean.frobenius_norm() / e.frobenius_norm();
        m_clean.add(&e.scale(scale))?
    };
    Ok(SynthInstance {
        w,
        h,
        support,
        y,
        m_clean,
        m: m_noisy,
        model,
    })
}

impl SynthInstance {
    /// `‖E‖_F / ‖W·H‖_F` as realized.
    pub fn realized_noise_ratio(&self) -> f64 {
        self.m.sub(&self.m_clean).expect("same shape").frobenius_norm() / self.m_clean.frobenius_norm()
    }

    pub fn support_matrix(&self) -> crate::sensing::BinaryMatrix {
        crate::sensing::BinaryMatrix {
            rows: self.model.n,
            cols: self.support.clone(),
        }
    }

    /// Write `M.csv`, `W.csv`, `H.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        crate::io::write_csv_matrix(&dir.join("M.csv"), &self.m)?;
        crate::io::write_csv_matrix(&dir.join("W.csv"), &self.w)?;
        crate::io::write_csv_matrix(&dir.join("H.csv"), &self.h)?;
        crate::io::write_json(
            &dir.join("meta.json"),
            &InstanceMeta {
                model: self.model,
                support: self.support.clone(),
            },
        )
    }

    /// Load an instance directory written by [`SynthInstance::save`]. The
    /// clean matrix is rebuilt as `W·H`.
    pub fn load(dir: &Path) -> Result<Self> {
        let m = crate::io::read_csv_matrix(&dir.join("M.csv"))?;
        let w = crate::io::read_csv_matrix(&dir.join("W.csv"))?;
        let h = crate::io::read_csv_matrix(&dir.join("H.csv"))?;
        let meta: InstanceMeta = crate::io::read_json(&dir.join("meta.json"))?;
        let m_clean = w.matmul(&h)?;
        if m_clean.shape() != m.shape() {
            return Err(Error::InvalidDimension("M does not match W·H".into()));
        }
        Ok(Self {
            y: w.clone(),
            w,
            h,
            support: meta.support,
            m_clean,
            m,
            model: meta.model,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorModel {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    pub r: usize,
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub nonneg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTensorInstance {
    pub factors: TensorFactors,
    pub support: Vec<Vec<usize>>,
    pub tensor: Tensor3,
    pub model: TensorModel,
}

/// Draw a planted tensor instance: `A = X ⊙ Y` with `k`-sparse columns and
/// dense Gaussian `B`, `C` of full column rank.
pub fn gen_tensor_instance(model: TensorModel) -> Result<SynthTensorInstance> {
    let TensorModel {
        n,
        m1,
        m2,
        r,
        k,
        seed,
        nonneg,
    } = model;
    if r == 0 || r > m1.min(m2) {
        return Err(Error::InvalidArgument(format!("need 1 <= r <= min(m1, m2), got r={r}")));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut srng = rng::stream(seed, streams::SUPPORT);
    let mut vrng = rng::stream(seed, streams::VALUES);
    let (support, a) = sparse_columns(n, r, k, ValueDist::Gaussian, &mut srng, &mut vrng);
    let full_rank = |seed_stream: u64| -> Result<Matrix> {
        let mut g = rng::stream(seed, seed_stream);
        let rows = if seed_stream == streams::RIGHT { m1 } else { m2 };
        for _ in 0..MAX_REDRAWS {
            let x = Matrix::gaussian(rows, r, &mut g);
            if check_full_column_rank(&x, RANK_TOL) {
                return Ok(x);
            }
        }
        Err(Error::Degenerate("could not draw a full-column-rank factor".into()))
    };
    let mut b = full_rank(streams::RIGHT)?;
    let mut c = full_rank(streams::THIRD)?;
    let mut a = a;
    if nonneg {
        a = a.map(f64::abs);
        b = b.map(f64::abs);
        c = c.map(f64::abs);
    }
    let factors = TensorFactors::new(a, b, c, None)?;
    let tensor = cp_reconstruct(&factors)?;
    Ok(SynthTensorInstance {
        factors,
        support,
        tensor,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricTensorInstance {
    pub tensor: Tensor3,
    /// Unit-norm factor columns, `n × r`.
    pub factors: Matrix,
    pub weights: Vec<f64>,
    /// Measured `max_{i≠j} |a_iᵀ a_j|`.
    pub incoherence: f64,
    /// `w_max / w_min`.
    pub weight_ratio: f64,
}

/// `max_{i≠j} |a_iᵀ a_j|` over the columns of `a`.
pub fn incoherence(a: &Matrix) -> f64 {
    let cols = a.columns();
    let mut mu = 0.0f64;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            mu = mu.max(dot(&cols[i], &cols[j]).abs());
        }
    }
    mu
}

/// `T = Σ w_i a_i⊗a_i⊗a_i` with unit-norm, `mu_max`-incoherent factors.
///
/// `mu_max = 0` uses distinct standard basis vectors (exactly orthogonal).
/// Otherwise a random orthonormal frame is perturbed by Gaussian noise whose
/// size is halved until the measured incoherence is within `mu_max`.
pub fn gen_symmetric_incoherent_tensor(
    n: usize,
    weights: &[f64],
    mu_max: f64,
    seed: u64,
) -> Result<SymmetricTensorInstance> {
    let r = weights.len();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("need 1 <= r <= n, got r={r}, n={n}")));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("weights must be positive".into()));
    }
    if !(mu_max >= 0.0) {
        return Err(Error::InvalidArgument("mu_max must be >= 0".into()));
    }
    let mut g = rng::stream(seed, streams::VALUES);
    let factors = if mu_max == 0.0 {
        let rows = sample_subset(&mut g, n, r);
        Matrix::from_fn(n, r, |i, j| if i == rows[j] { 1.0 } else { 0.0 })
    } else {
        let frame = Matrix::gaussian(n, r, &mut g).thin_q();
        let mut eps = mu_max;
        let mut found = None;
        for _ in 0..MAX_REDRAWS {
            let noise = Matrix::gaussian(n, r, &mut g).scale(eps / (n as f64).sqrt());
            let mut cand = frame.add(&noise)?;
            cand.normalize_columns();
            if incoherence(&cand) <= mu_max {
                found = Some(cand);
                break;
            }
            eps *= 0.5;
        }
        found.ok_or_else(|| Error::Infeasible(format!("no {r} unit vectors in R^{n} with incoherence <= {mu_max}")))?
    };
    let mut tensor = Tensor3::zeros(n, n, n);
    for (l, &w) in weights.iter().enumerate() {
        let a = factors.col(l);
        for i in 0..n {
            if a[i] == 0.0 {
                continue;
            }
            for k in 0..n {
                for j in 0..n {
                    let v = tensor.get(i, j, k) + w * a[i] * a[j] * a[k];
                    tensor.set(i, j, k, v);
                }
            }
        }
    }
    let wmax = weights.iter().copied().fold(f64::MIN, f64::max);
    let wmin = weights.iter().copied().fold(f64::MAX, f64::min);
    debug_assert!(factors.columns().iter().all(|c| (norm2(c) - 1.0).abs() < 1e-12));
    Ok(SymmetricTensorInstance {
        incoherence: incoherence(&factors),
        tensor,
        factors,
        weights: weights.to_vec(),
        weight_ratio: wmax / wmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{nnz_eps_slice, NNZ_EPS_REL};

    fn model(n: usize, m: usize, r: usize, k: usize, noise: f64, nonneg: bool, seed: u64) -> MatrixModel {
        MatrixModel {
            n,
            m,
            r,
            k,
            noise_ratio: noise,
            nonneg,
            seed,
            values: ValueDist::Gaussian,
        }
    }

    #[test]
    fn column_sparsity_and_noise_ratio_are_exact() {
        for seed in 0..5 {
            let inst = gen_matrix_instance(model(200, 80, 5, 10, 0.1, false, seed)).unwrap();
            for j in 0..5 {
                assert_eq!(nnz_eps_slice(&inst.w.col(j), NNZ_EPS_REL), 10);
                assert_eq!(inst.support[j].len(), 10);
            }
            assert!((inst.realized_noise_ratio() - 0.1).abs() < 1e-9);
            assert_eq!(crate::metrics::nnz_eps(&inst.w, NNZ_EPS_REL), 50);
        }
    }

    #[test]
    fn forced_support_and_noiseless() {
        let inst = gen_matrix_instance(model(6, 5, 2, 6, 0.0, false, 1)).unwrap();
        assert!(inst.w.as_slice().iter().all(|&v| v != 0.0));
        assert_eq!(inst.m, inst.m_clean);
    }

    #[test]
    fn nonneg_and_determinism() {
        let a = gen_matrix_instance(model(50, 40, 3, 5, 0.1, true, 9)).unwrap();
        let b = gen_matrix_instance(model(50, 40, 3, 5, 0.1, true, 9)).unwrap();
        assert_eq!(a, b);
        assert!(a.w.min_entry() >= 0.0 && a.h.min_entry() >= 0.0);
        assert_eq!(a.h.numerical_rank(RANK_TOL), 3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gen_matrix_instance(model(10, 10, 2, 11, 0.0, false, 0)).is_err());
        assert!(gen_matrix_instance(model(10, 5, 6, 2, 0.0, false, 0)).is_err());
        let t = TensorModel {
            n: 10,
            m1: 3,
            m2: 5,
            r: 4,
            k: 2,
            seed: 0,
            nonneg: false,
        };
        assert!(gen_tensor_instance(t).is_err());
    }

    #[test]
    fn uniform_magnitudes() {
        let mut m = model(40, 20, 2, 4, 0.0, false, 3);
        m.values = ValueDist::UniformMagnitude;
        let inst = gen_matrix_instance(m).unwrap();
        for &v in inst.w.as_slice() {
            assert!(v == 0.0 || (0.5..1.5).contains(&v.abs()));
        }
    }

    #[test]
    fn tensor_instances() {
        let t = gen_tensor_instance(TensorModel {
            n: 40,
            m1: 6,
            m2: 7,
            r: 1,
            k: 3,
            seed: 2,
            nonneg: false,
        })
        .unwrap();
        let f = &t.factors;
        for i in 0..40 {
            for j in 0..6 {
                for k in 0..7 {
                    let v = f.a[(i, 0)] * f.b[(j, 0)] * f.c[(k, 0)];
                    assert!((t.tensor.get(i, j, k) - v).abs() < 1e-12);
                }
            }
        }
        let t = gen_tensor_instance(TensorModel {
            n: 100,
            m1: 30,
            m2: 30,
            r: 4,
            k: 10,
            seed: 5,
            nonneg: false,
        })
        .unwrap();
        assert!(check_full_column_rank(&t.factors.b, RANK_TOL));
        assert!(check_full_column_rank(&t.factors.c, RANK_TOL));
        assert!(t.support.iter().all(|s| s.len() == 10));
    }

    #[test]
    fn symmetric_tensors() {
        let orth = gen_symmetric_incoherent_tensor(10, &[1.0, 0.9, 0.8], 0.0, 4).unwrap();
        assert_eq!(orth.incoherence, 0.0);
        assert!((orth.weight_ratio - 1.25).abs() < 1e-15);
        let inc = gen_symmetric_incoherent_tensor(100, &[1.0; 5], 0.05, 4).unwrap();
        assert!(inc.incoherence <= 0.05);
        assert!(gen_symmetric_incoherent_tensor(3, &[1.0; 4], 0.1, 0).is_err());
        assert!(gen_symmetric_incoherent_tensor(5, &[1.0, -1.0], 0.1, 0).is_err());
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = std::env::temp_dir().join(format!("compfact-synth-{}", std::process::id()));
        let inst = gen_matrix_instance(model(30, 20, 3, 4, 0.1, true, 1)).unwrap();
        inst.save(&dir).unwrap();
        let back = SynthInstance::load(&dir).unwrap();
        assert_eq!(back.m, inst.m);
        assert_eq!(back.w, inst.w);
        assert_eq!(back.support, inst.support);
        std::fs::remove_dir_all(&dir).ok();
    }
}
