//! Empirical checks of the structure behind sparse-factor uniqueness:
//! dense combinations of several compressed factor columns are less sparse
//! than any single column, factor neighborhoods expand, and the compressed
//! data spans exactly the compressed factor space.
//!
//! The cancellation argument bounds `nnz(v) > |N(S)| − |S|·p` for a fully
//! dense combination `v` of the columns in `S`; the `|S|·p` form is used
//! throughout (some statements of the argument drop the factor `p`).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::nnz_eps_slice;
use crate::rng::{self, streams};
use crate::sensing::{for_each_subset, neighborhood_size, sample_subset, BinaryMatrix, ColumnSupports};

/// Smallest coefficient magnitude in a "fully dense" combination.
pub const COEFF_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// Combinations examined.
    pub instances: usize,
    pub min_combo_nnz: usize,
    pub max_column_nnz: usize,
    /// `6kp/5` when the generative `k`, `p` are known.
    pub bound_6kp5: Option<f64>,
    /// Combinations whose nnz does not exceed `max_column_nnz`.
    pub violations: usize,
    pub colspace_equal: Option<bool>,
}

/// `nnz_eps(Σ_{j∈S} c_j · Wt_j)` with the threshold relative to the largest
/// entry of the combination.
pub fn combination_nnz(wt: &Matrix, subset: &[usize], coeffs: &[f64], eps_rel: f64) -> Result<usize> {
    if subset.len() != coeffs.len() {
        return Err(Error::InvalidArgument(
            "subset and coefficients differ in length".into(),
        ));
    }
    let mut v = vec![0.0; wt.rows()];
    for (&j, &c) in subset.iter().zip(coeffs) {
        if j >= wt.cols() {
            return Err(Error::InvalidArgument(format!("column {j} out of range")));
        }
        for (i, x) in v.iter_mut().enumerate() {
            *x += c * wt[(i, j)];
        }
    }
    Ok(nnz_eps_slice(&v, eps_rel))
}

fn dense_coefficient<R: Rng>(g: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(g);
        if z.abs() >= COEFF_FLOOR {
            return z;
        }
    }
}

/// Sample `trials` fully dense combinations of `|S| ≥ 2` columns of `wt`
/// (subset size uniform on `2..=r`, coefficients standard normal with
/// magnitude at least [`COEFF_FLOOR`]) and count those whose nnz is at most
/// the largest single-column nnz.
pub fn sparsest_column_check(wt: &Matrix, trials: usize, seed: u64, eps_rel: f64) -> Result<UniquenessReport> {
    let r = wt.cols();
    if r < 2 {
        return Err(Error::InvalidArgument(
            "need at least two columns to form combinations".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    if !(eps_rel > 0.0) {
        return Err(Error::InvalidArgument("eps must be > 0".into()));
    }
    let max_column_nnz = (0..r)
        .map(|j| nnz_eps_slice(&wt.col(j), eps_rel))
        .max()
        .expect("r >= 2");
    let mut g = rng::stream(seed, streams::TRIALS);
    let mut min_combo_nnz = usize::MAX;
    let mut violations = 0;
    for _ in 0..trials {
        let size = g.random_range(2..=r);
        let subset = sample_subset(&mut g, r, size);
        let coeffs: Vec<f64> = (0..size).map(|_| dense_coefficient(&mut g)).collect();
        let nnz = combination_nnz(wt, &subset, &coeffs, eps_rel)?;
        min_combo_nnz = min_combo_nnz.min(nnz);
        if nnz <= max_column_nnz {
            violations += 1;
        }
    }
    Ok(UniquenessReport {
        instances: trials,
        min_combo_nnz,
        max_column_nnz,
        bound_6kp5: None,
        violations,
        colspace_equal: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionParams {
    pub k: usize,
    pub p: usize,
    pub d: usize,
    /// Enumerate every subset when there are at most this many.
    pub exhaustive_limit: u64,
    /// Subsets drawn otherwise (size uniform on `1..=r`).
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetNeighborhood {
    pub subset: Vec<usize>,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub exhaustive: bool,
    pub subsets_tested: u64,
    /// `min_S |N(S)| − min{16|S|kp/25, d/200}`.
    pub worst_margin: f64,
    pub worst_subset: Vec<usize>,
    pub violations: u64,
    /// `min_{|S|≥2} |N(S)| − |S|p − 6kp/5`; `None` when no such subset was tested.
    pub worst_margin_6kp5: Option<f64>,
    pub violations_6kp5: u64,
    /// Largest single-column neighborhood, never above `k·p`.
    pub max_singleton: usize,
    /// Every `(S, |N(S)|)` in exhaustive mode.
    pub neighborhoods: Vec<SubsetNeighborhood>,
}

/// `min{16|S|kp/25, d/200}`.
pub fn expansion_lower_bound(size: usize, k: usize, p: usize, d: usize) -> f64 {
    (16.0 * (size * k * p) as f64 / 25.0).min(d as f64 / 200.0)
}

/// Compare neighborhood sizes of column subsets of the support `g` (rows are
/// compressed coordinates, columns are factors) against the expansion bounds.
pub fn expansion_bound_check(g: &BinaryMatrix, params: &ExpansionParams) -> Result<ExpansionReport> {
    let r = g.num_cols();
    if r == 0 {
        return Err(Error::InvalidArgument("support has no columns".into()));
    }
    let ExpansionParams { k, p, d, .. } = *params;
    let kp6 = 6.0 * (k * p) as f64 / 5.0;
    let mut rep = ExpansionReport {
        exhaustive: false,
        subsets_tested: 0,
        worst_margin: f64::INFINITY,
        worst_subset: Vec::new(),
        violations: 0,
        worst_margin_6kp5: None,
        violations_6kp5: 0,
        max_singleton: (0..r).map(|j| g.support(j).len()).max().unwrap_or(0),
        neighborhoods: Vec::new(),
    };
    let record = |rep: &mut ExpansionReport, subset: &[usize], nb: usize| {
        rep.subsets_tested += 1;
        let margin = nb as f64 - expansion_lower_bound(subset.len(), k, p, d);
        if margin < 0.0 {
            rep.violations += 1;
        }
        if margin < rep.worst_margin {
            rep.worst_margin = margin;
            rep.worst_subset = subset.to_vec();
        }
        if subset.len() >= 2 {
            let m6 = nb as f64 - (subset.len() * p) as f64 - kp6;
            if m6 < 0.0 {
                rep.violations_6kp5 += 1;
            }
            rep.worst_margin_6kp5 = Some(rep.worst_margin_6kp5.map_or(m6, |w: f64| w.min(m6)));
        }
    };
    let total = crate::sensing::subsets_up_to(r, r);
    if total <= params.exhaustive_limit as u128 {
        rep.exhaustive = true;
        let mut seen = Vec::new();
        for_each_subset(g, r, |s, nb| {
            seen.push(SubsetNeighborhood {
                subset: s.to_vec(),
                size: nb,
            })
        });
        for sn in &seen {
            record(&mut rep, &sn.subset, sn.size);
        }
        rep.neighborhoods = seen;
    } else {
        let mut rng = rng::stream(params.seed, streams::TRIALS);
        for _ in 0..params.trials {
            let size = rng.random_range(1..=r);
            let subset = sample_subset(&mut rng, r, size);
            let nb = neighborhood_size(g, &subset)?;
            record(&mut rep, &subset, nb);
        }
    }
    Ok(rep)
}

/// `rank(Mt) = rank(Wt) = rank([Wt | Mt])` with ranks counted above
/// `tol · σ_max`.
pub fn colspace_equality_check(mt: &Matrix, wt: &Matrix, tol: f64) -> Result<bool> {
    if mt.rows() != wt.rows() {
        return Err(Error::InvalidDimension("Mt and Wt differ in row count".into()));
    }
    let (d, r) = wt.shape();
    let joined = Matrix::from_fn(d, r + mt.cols(), |i, j| if j < r { wt[(i, j)] } else { mt[(i, j - r)] });
    let rm = mt.numerical_rank(tol);
    Ok(rm == wt.numerical_rank(tol) && rm == joined.numerical_rank(tol))
}
