//! Order-3 dense tensors and CP algebra (unfoldings, Khatri–Rao, reconstruction).
//!
//! Storage is mode-1-major: entry `(i, j, k)` of an `n × m1 × m2` tensor lives at
//! `i·m1·m2 + k·m1 + j`. Row `i` of the backing buffer is therefore exactly row
//! `i` of the mode-1 unfolding `T₍₁₎ ∈ ℝ^{n × m1·m2}`, whose column index is
//! `j + k·m1`. With this ordering `T₍₁₎ = A·(C ⊙ B)ᵀ` for a CP tensor.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    dims: (usize, usize, usize),
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize, m1: usize, m2: usize) -> Self {
        Self {
            dims: (n, m1, m2),
            data: vec![0.0; n * m1 * m2],
        }
    }

    pub fn from_vec(dims: (usize, usize, usize), data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.0 * dims.1 * dims.2 {
            return dim_err(format!("{} values cannot fill a {:?} tensor", data.len(), dims));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn((n, m1, m2): (usize, usize, usize), mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(n, m1, m2);
        for i in 0..n {
            for k in 0..m2 {
                for j in 0..m1 {
                    t.data[i * m1 * m2 + k * m1 + j] = f(i, j, k);
                }
            }
        }
        t
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        let (_, m1, m2) = self.dims;
        i * m1 * m2 + k * m1 + j
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::linalg::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.dims != other.dims {
            return dim_err(format!("tensor dims {:?} vs {:?}", self.dims, other.dims));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Tensor3 { dims: self.dims, data })
    }

    /// Mode-1 unfolding, `n × (m1·m2)`, column index `j + k·m1`.
    pub fn unfold1(&self) -> Matrix {
        let (n, m1, m2) = self.dims;
        Matrix::from_vec(n, m1 * m2, self.data.clone()).expect("consistent storage")
    }

    /// Mode-2 unfolding, `m1 × (n·m2)`, column index `i + k·n`.
    pub fn unfold2(&self) -> Matrix {
        let (n, m1, m2) = self.dims;
        Matrix::from_fn(m1, n * m2, |j, c| self.get(c % n, j, c / n))
    }

    /// Mode-3 unfolding, `m2 × (n·m1)`, column index `i + j·n`.
    pub fn unfold3(&self) -> Matrix {
        let (n, m1, m2) = self.dims;
        Matrix::from_fn(m2, n * m1, |k, c| self.get(c % n, c / n, k))
    }

    /// Inverse of [`Tensor3::unfold1`].
    pub fn fold1(unfolded: &Matrix, m1: usize, m2: usize) -> Result<Self> {
        if unfolded.cols() != m1 * m2 {
            return dim_err(format!("unfolding has {} columns, expected {m1}·{m2}", unfolded.cols()));
        }
        Self::from_vec((unfolded.rows(), m1, m2), unfolded.as_slice().to_vec())
    }

    /// `T(I, x, x)`: contract modes 2 and 3 with `x`.
    pub fn contract_23(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let (n, m1, m2) = self.dims;
        if x.len() != m1 || y.len() != m2 {
            return dim_err("contraction vector lengths do not match tensor modes");
        }
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (k, &yk) in y.iter().enumerate() {
                let base = i * m1 * m2 + k * m1;
                s += yk * crate::linalg::dot(&self.data[base..base + m1], x);
            }
            *o = s;
        }
        Ok(out)
    }
}

/// Column-wise Kronecker product `C ⊙ B`, `(m2·m1) × r`, row index `j + k·m1`.
pub fn khatri_rao(c: &Matrix, b: &Matrix) -> Result<Matrix> {
    if c.cols() != b.cols() {
        return dim_err("Khatri–Rao factors need the same column count");
    }
    let m1 = b.rows();
    Ok(Matrix::from_fn(c.rows() * m1, c.cols(), |row, l| {
        c[(row / m1, l)] * b[(row % m1, l)]
    }))
}

/// CP factors `(A, B, C)` with optional component weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFactors {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub weights: Option<Vec<f64>>,
}

impl TensorFactors {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, weights: Option<Vec<f64>>) -> Result<Self> {
        let r = a.cols();
        if b.cols() != r || c.cols() != r {
            return dim_err("factor matrices must share the rank dimension");
        }
        if weights.as_ref().is_some_and(|w| w.len() != r) {
            return dim_err("weights length must equal rank");
        }
        Ok(Self { a, b, c, weights })
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.rows(), self.b.rows(), self.c.rows())
    }

    pub fn weight(&self, l: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[l])
    }

    /// Rescale every column to unit ℓ2 norm, folding scales into `weights`,
    /// and flip signs so the largest-magnitude entry of the `B` and `C`
    /// columns is positive (the sign flip is pushed into `A`).
    pub fn normalized(&self) -> Self {
        let r = self.rank();
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        let mut c = self.c.clone();
        let na = a.normalize_columns();
        let nb = b.normalize_columns();
        let nc = c.normalize_columns();
        let mut w: Vec<f64> = (0..r).map(|l| self.weight(l) * na[l] * nb[l] * nc[l]).collect();
        for l in 0..r {
            for m in [&mut b, &mut c] {
                if sign_of_peak(&m.col(l)) < 0.0 {
                    let flipped: Vec<f64> = m.col(l).iter().map(|x| -x).collect();
                    m.set_col(l, &flipped);
                    let fa: Vec<f64> = a.col(l).iter().map(|x| -x).collect();
                    a.set_col(l, &fa);
                }
            }
            if sign_of_peak(&a.col(l)) < 0.0 {
                let fa: Vec<f64> = a.col(l).iter().map(|x| -x).collect();
                a.set_col(l, &fa);
                w[l] = -w[l];
            }
        }
        Self {
            a,
            b,
            c,
            weights: Some(w),
        }
    }
}

fn sign_of_peak(v: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for &x in v {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `Σ_l w_l · A_l ⊗ B_l ⊗ C_l`, built through the mode-1 identity
/// `T₍₁₎ = A·diag(w)·(C ⊙ B)ᵀ`.
pub fn cp_reconstruct(f: &TensorFactors) -> Result<Tensor3> {
    let (_, m1, m2) = f.dims();
    let r = f.rank();
    let mut aw = f.a.clone();
    for i in 0..aw.rows() {
        for l in 0..r {
            aw[(i, l)] *= f.weight(l);
        }
    }
    let kr = khatri_rao(&f.c, &f.b)?;
    let unfolded = aw.matmul_tr(&kr)?;
    Tensor3::fold1(&unfolded, m1, m2)
}


#[cfg(test)]
mod props {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn reconstruction_matches_triple_loop(
            n in 1usize..6, m1 in 1usize..6, m2 in 1usize..6, r in 1usize..4, seed in any::<u64>(),
        ) {
            let mut g = rng::stream(seed, 6);
            let (a, b, c) = (Matrix::gaussian(n, r, &mut g), Matrix::gaussian(m1, r, &mut g), Matrix::gaussian(m2, r, &mut g));
            let w: Vec<f64> = (0..r).map(|l| 1.0 + l as f64).collect();
            let t = cp_reconstruct(&TensorFactors::new(a.clone(), b.clone(), c.clone(), Some(w.clone())).unwrap()).unwrap();
            for i in 0..n {
                for j in 0..m1 {
                    for k in 0..m2 {
                        let want: f64 = (0..r).map(|l| w[l] * a[(i, l)] * b[(j, l)] * c[(k, l)]).sum();
                        prop_assert!((t.get(i, j, k) - want).abs() <= 1e-12);
                    }
                }
            }
        }
    }
}
