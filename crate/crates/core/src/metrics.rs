//! Error metrics and factor alignment.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{dot, Matrix};

/// Default relative zero threshold for [`nnz_eps`].
pub const NNZ_EPS_REL: f64 = 1e-8;

/// `‖X − X*‖_F / ‖X*‖_F`.
pub fn rel_err(x: &Matrix, x_star: &Matrix) -> Result<f64> {
    let denom = x_star.frobenius_norm();
    if denom == 0.0 {
        return Err(Error::Undefined("relative error against an all-zero reference".into()));
    }
    Ok(x.sub(x_star)?.frobenius_norm() / denom)
}

/// Entries with `|x| > eps_rel · max|X|`; a zero matrix has none.
pub fn nnz_eps(x: &Matrix, eps_rel: f64) -> usize {
    nnz_eps_slice(x.as_slice(), eps_rel)
}

pub fn nnz_eps_slice(x: &[f64], eps_rel: f64) -> usize {
    let thr = eps_rel * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter().filter(|v| v.abs() > thr && **v != 0.0).count()
}

/// Pearson correlation; `None` when either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `permutation[i]` is the column of `F_hat` matched to true column `i`.
    pub permutation: Vec<usize>,
    /// Signed correlation of each matched pair, in true-column order.
    pub correlations: Vec<f64>,
    pub median_correlation: f64,
    /// True columns whose pair had an undefined (constant-column) correlation.
    pub undefined_pairs: Vec<usize>,
}

impl MatchResult {
    pub fn min_abs_correlation(&self) -> f64 {
        self.correlations.iter().fold(f64::INFINITY, |m, c| m.min(c.abs()))
    }
}

/// Pair the columns of `f_hat` with those of `f_true` by maximum total
/// `|Pearson correlation|` (exact assignment).
pub fn match_factors(f_hat: &Matrix, f_true: &Matrix) -> Result<MatchResult> {
    if f_hat.shape() != f_true.shape() {
        return dim_err(format!("shapes {:?} vs {:?}", f_hat.shape(), f_true.shape()));
    }
    let r = f_true.cols();
    let hat_cols = f_hat.columns();
    let true_cols = f_true.columns();
    let corr: Vec<Vec<Option<f64>>> = true_cols
        .iter()
        .map(|t| hat_cols.iter().map(|h| pearson(h, t)).collect())
        .collect();
    let weight: Vec<Vec<f64>> = corr
        .iter()
        .map(|row| row.iter().map(|c| c.map_or(0.0, f64::abs)).collect())
        .collect();
    let permutation = max_weight_assignment(&weight);
    let mut correlations = Vec::with_capacity(r);
    let mut undefined_pairs = Vec::new();
    for (i, &j) in permutation.iter().enumerate() {
        match corr[i][j] {
            Some(c) => correlations.push(c),
            None => {
                correlations.push(0.0);
                undefined_pairs.push(i);
            }
        }
    }
    let median_correlation = median(&correlations);
    Ok(MatchResult {
        permutation,
        correlations,
        median_correlation,
        undefined_pairs,
    })
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

/// Maximum-weight perfect matching on a square weight matrix
/// (Hungarian algorithm with potentials, `O(r³)`). Returns, for each row,
/// the assigned column.
pub fn max_weight_assignment(weight: &[Vec<f64>]) -> Vec<usize> {
    let n = weight.len();
    if n == 0 {
        return Vec::new();
    }
    let wmax = weight.iter().flatten().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    // minimize cost = wmax − weight; 1-based arrays with a sentinel at 0
    let cost = |i: usize, j: usize| wmax - weight[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] != 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Factor error after alignment: columns of `f_hat` are matched to `f_true`
/// by [`match_factors`], then each matched column is rescaled by its
/// least-squares coefficient onto the true column (factor scale and sign are
/// not identifiable), and the Frobenius relative error is taken.
pub fn aligned_rel_err(f_hat: &Matrix, f_true: &Matrix) -> Result<(f64, MatchResult)> {
    let m = match_factors(f_hat, f_true)?;
    let aligned = align_columns(f_hat, f_true, &m.permutation);
    Ok((rel_err(&aligned, f_true)?, m))
}

/// Permute and rescale `f_hat` onto `f_true` given a matching.
pub fn align_columns(f_hat: &Matrix, f_true: &Matrix, permutation: &[usize]) -> Matrix {
    let mut aligned = Matrix::zeros(f_true.rows(), f_true.cols());
    for (i, &j) in permutation.iter().enumerate() {
        let h = f_hat.col(j);
        let t = f_true.col(i);
        let hh = dot(&h, &h);
        let s = if hh > 0.0 { dot(&h, &t) / hh } else { 0.0 };
        let scaled: Vec<f64> = h.iter().map(|x| s * x).collect();
        aligned.set_col(i, &scaled);
    }
    aligned
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force_best(weight: &[Vec<f64>]) -> f64 {
        all_permutations(weight.len())
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, &j)| weight[i][j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn rel_err_cases() {
        let mut rng = crate::rng::stream(0, 0);
        let x = Matrix::gaussian(4, 3, &mut rng);
        assert_eq!(rel_err(&x, &x).unwrap(), 0.0);
        assert!((rel_err(&Matrix::zeros(4, 3), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((rel_err(&x.scale(2.0), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(rel_err(&x, &Matrix::zeros(4, 3)), Err(Error::Undefined(_))));
    }

    #[test]
    fn nnz_cases() {
        assert_eq!(nnz_eps(&Matrix::identity(5), NNZ_EPS_REL), 5);
        assert_eq!(nnz_eps(&Matrix::zeros(3, 3), NNZ_EPS_REL), 0);
        let m = Matrix::from_rows(&[vec![1.0, 1e-10, -2.0]]).unwrap();
        assert_eq!(nnz_eps(&m, NNZ_EPS_REL), 2);
    }

    #[test]
    fn matching_identity_and_reversal() {
        let mut rng = crate::rng::stream(1, 0);
        let f = Matrix::gaussian(20, 4, &mut rng);
        let m = match_factors(&f, &f).unwrap();
        assert_eq!(m.permutation, vec![0, 1, 2, 3]);
        assert!(m.correlations.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        let rev = f.select_columns(&[3, 2, 1, 0]);
        let m = match_factors(&rev, &f).unwrap();
        assert_eq!(m.permutation, vec![3, 2, 1, 0]);
    }

    #[test]
    fn constant_column_is_flagged() {
        let mut rng = crate::rng::stream(2, 0);
        let f = Matrix::gaussian(10, 2, &mut rng);
        let mut g = f.clone();
        g.set_col(1, &[3.0; 10]);
        let m = match_factors(&g, &f).unwrap();
        assert_eq!(m.undefined_pairs, vec![1]);
        assert_eq!(m.correlations[1], 0.0);
    }

    #[test]
    fn matching_beats_every_permutation_on_random_pairs() {
        for seed in 0..20 {
            let mut rng = crate::rng::stream(seed, 5);
            let a = Matrix::gaussian(20, 4, &mut rng);
            let b = Matrix::gaussian(20, 4, &mut rng);
            let m = match_factors(&a, &b).unwrap();
            let total: f64 = m.correlations.iter().map(|c| c.abs()).sum();
            let weight: Vec<Vec<f64>> = (0..4)
                .map(|i| (0..4).map(|j| pearson(&a.col(j), &b.col(i)).unwrap().abs()).collect())
                .collect();
            assert!(total >= brute_force_best(&weight) - 1e-12);
        }
    }

    #[test]
    fn alignment_undoes_permutation_and_scale() {
        let mut rng = crate::rng::stream(3, 0);
        let f = Matrix::gaussian(15, 3, &mut rng);
        let mut g = f.select_columns(&[2, 0, 1]);
        for i in 0..15 {
            g[(i, 0)] *= -4.0;
            g[(i, 2)] *= 0.1;
        }
        let (err, m) = aligned_rel_err(&g, &f).unwrap();
        assert!(err < 1e-12);
        assert_eq!(m.permutation, vec![1, 2, 0]);
        assert!(m.correlations[2] < 0.0);
    }

    proptest! {
        #[test]
        fn assignment_is_exact(r in 1usize..7, seed in 0u64..10_000) {
            let mut rng = crate::rng::stream(seed, 1);
            let w: Vec<Vec<f64>> = Matrix::gaussian(r, r, &mut rng).map(f64::abs)
                .as_slice().chunks(r).map(|c| c.to_vec()).collect();
            let p = max_weight_assignment(&w);
            let mut seen = p.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..r).collect::<Vec<_>>());
            let total: f64 = p.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
            prop_assert!((total - brute_force_best(&w)).abs() < 1e-9);
        }

        #[test]
        fn rel_err_is_scale_invariant(c in prop_oneof![-50.0f64..-0.01, 0.01f64..50.0], seed in 0u64..1000) {
            let mut rng = crate::rng::stream(seed, 2);
            let x = Matrix::gaussian(5, 4, &mut rng);
            let y = Matrix::gaussian(5, 4, &mut rng);
            let a = rel_err(&x, &y).unwrap();
            let b = rel_err(&x.scale(c), &y.scale(c)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            prop_assert_eq!(nnz_eps(&x, NNZ_EPS_REL), nnz_eps(&x.scale(c), NNZ_EPS_REL));
        }
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn nnz_invariant_under_global_scaling(
            vals in prop::collection::vec(prop_oneof![Just(0.0f64), -1e3f64..1e3], 1..50),
            c in prop_oneof![-1e6f64..-1e-6, 1e-6f64..1e6],
        ) {
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            prop_assert_eq!(nnz_eps_slice(&vals, NNZ_EPS_REL), nnz_eps_slice(&scaled, NNZ_EPS_REL));
        }
    }
}
