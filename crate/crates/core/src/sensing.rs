//! Sparse binary projection matrices and bipartite-expander certification.
//!
//! A [`ProjectionMatrix`] `P ∈ {0,1}^{d×n}` is stored column-wise: column `j`
//! is the sorted list of the `p` rows holding a one. Viewed as a bipartite
//! graph (columns on the left, rows on the right, every left node of degree
//! `p`), `N(S)` is the set of rows touched by the columns in `S`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::tensor::Tensor3;

/// Default enumeration budget for exhaustive certification.
pub const DEFAULT_SUBSET_BUDGET: u128 = 10_000_000;

/// Default number of sampled subsets for certification.
pub const DEFAULT_SAMPLED_TRIALS: usize = 10_000;

/// Anything with a column-wise 0/1 support structure.
pub trait ColumnSupports {
    fn num_rows(&self) -> usize;
    fn num_cols(&self) -> usize;
    fn support(&self, col: usize) -> &[usize];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub cols: Vec<Vec<usize>>,
}

/// `max(5, ⌈3·log₂ n⌉)`.
pub fn default_column_weight(n: usize) -> usize {
    let lg = (n.max(2) as f64).log2();
    5usize.max((3.0 * lg).ceil() as usize)
}

/// Draw a `d × n` projection with exactly `p` ones per column.
///
/// Column `j` uses its own ChaCha stream under `seed` and a partial
/// Fisher–Yates shuffle of `0..d`, so supports are uniform `p`-subsets,
/// independent across columns, and reproducible.
pub fn gen_projection(n: usize, d: usize, p: usize, seed: u64) -> Result<ProjectionMatrix> {
    if p == 0 || p > d || d > n {
        return dim_err(format!("need 1 <= p <= d <= n, got n={n}, d={d}, p={p}"));
    }
    gen_sparse_binary(n, d, p, seed)
}

/// Same sampler as [`gen_projection`] without the compression requirement
/// `d <= n`, for measurement-model studies where `d` may exceed `n`.
/// Column supports agree with [`gen_projection`] for equal `(d, p, seed)`.
pub fn gen_sparse_binary(n: usize, d: usize, p: usize, seed: u64) -> Result<ProjectionMatrix> {
    if p == 0 || p > d {
        return dim_err(format!("need 1 <= p <= d, got d={d}, p={p}"));
    }
    let mut pool: Vec<usize> = Vec::with_capacity(d);
    let cols = (0..n)
        .map(|j| {
            let mut rng = rng::stream(seed, j as u64);
            pool.clear();
            pool.extend(0..d);
            for t in 0..p {
                let s = rng.random_range(t..d);
                pool.swap(t, s);
            }
            let mut support = pool[..p].to_vec();
            support.sort_unstable();
            support
        })
        .collect();
    Ok(ProjectionMatrix { d, n, p, seed, cols })
}

impl ProjectionMatrix {
    /// Validate and wrap explicit supports.
    pub fn from_supports(d: usize, p: usize, seed: u64, cols: Vec<Vec<usize>>) -> Result<Self> {
        let pm = Self {
            d,
            n: cols.len(),
            p,
            seed,
            cols,
        };
        pm.validate()?;
        Ok(pm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols.len() != self.n {
            return dim_err(format!("{} column lists for n={}", self.cols.len(), self.n));
        }
        if self.p == 0 || self.p > self.d {
            return dim_err(format!("need 1 <= p <= d, got p={}, d={}", self.p, self.d));
        }
        for (j, c) in self.cols.iter().enumerate() {
            if c.len() != self.p {
                return dim_err(format!("column {j} has {} entries, expected {}", c.len(), self.p));
            }
            if c.windows(2).any(|w| w[0] >= w[1]) || c.iter().any(|&i| i >= self.d) {
                return Err(Error::InvalidInput(format!(
                    "column {j} support must be sorted, distinct and < d"
                )));
            }
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.d, self.n);
        for (j, c) in self.cols.iter().enumerate() {
            for &i in c {
                m[(i, j)] = 1.0;
            }
        }
        m
    }

    /// `P·x` for a length-`n` vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return dim_err(format!("vector has length {}, P has {} columns", x.len(), self.n));
        }
        let mut y = vec![0.0; self.d];
        for (c, &xj) in self.cols.iter().zip(x) {
            if xj != 0.0 {
                for &i in c {
                    y[i] += xj;
                }
            }
        }
        Ok(y)
    }

    /// `Pᵀ·y` for a length-`d` vector.
    pub fn apply_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.d {
            return dim_err(format!("vector has length {}, P has {} rows", y.len(), self.d));
        }
        Ok(self.cols.iter().map(|c| c.iter().map(|&i| y[i]).sum()).collect())
    }

    /// `P·M` for an `n × m` matrix; each output cell is a sum of `p` entries.
    pub fn project_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if m.rows() != self.n {
            return dim_err(format!("matrix has {} rows, P has {} columns", m.rows(), self.n));
        }
        let mut out = Matrix::zeros(self.d, m.cols());
        for (j, c) in self.cols.iter().enumerate() {
            let src = m.row(j);
            for &i in c {
                for (o, &s) in out.row_mut(i).iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
        Ok(out)
    }

    /// Project the first mode: `unfold₁(result) = P · unfold₁(T)`.
    pub fn project_tensor_mode1(&self, t: &Tensor3) -> Result<Tensor3> {
        let (n, m1, m2) = t.dims();
        if n != self.n {
            return dim_err(format!("tensor first mode is {n}, P has {} columns", self.n));
        }
        let projected = self.project_matrix(&t.unfold1())?;
        Tensor3::fold1(&projected, m1, m2)
    }

    /// `|N(S)|` for a set of column indices.
    pub fn neighborhood_size(&self, subset: &[usize]) -> Result<usize> {
        neighborhood_size(self, subset)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, self)
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let pm: Self = crate::io::read_json(path)?;
        pm.validate()?;
        Ok(pm)
    }
}

impl ColumnSupports for ProjectionMatrix {
    fn num_rows(&self) -> usize {
        self.d
    }
    fn num_cols(&self) -> usize {
        self.n
    }
    fn support(&self, col: usize) -> &[usize] {
        &self.cols[col]
    }
}

/// General binary matrix stored by column supports (columns may differ in weight).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMatrix {
    pub rows: usize,
    pub cols: Vec<Vec<usize>>,
}

impl BinaryMatrix {
    pub fn new(rows: usize, mut cols: Vec<Vec<usize>>) -> Result<Self> {
        for c in cols.iter_mut() {
            c.sort_unstable();
            c.dedup();
            if c.iter().any(|&i| i >= rows) {
                return dim_err("support index out of range");
            }
        }
        Ok(Self { rows, cols })
    }

    /// Support pattern of `m`: entries with `|x| > eps_rel · max|m|`.
    pub fn from_nonzeros(m: &Matrix, eps_rel: f64) -> Self {
        let thr = eps_rel * m.max_abs();
        let cols = (0..m.cols())
            .map(|j| {
                (0..m.rows())
                    .filter(|&i| m[(i, j)].abs() > thr && m[(i, j)] != 0.0)
                    .collect()
            })
            .collect();
        Self { rows: m.rows(), cols }
    }

    /// Support of the product `P·S` where `S` is this matrix (as a 0/1 matrix
    /// over `P`'s columns): row set reachable in the two-layer graph.
    pub fn compose(&self, p: &ProjectionMatrix) -> Result<Self> {
        if self.rows != p.n {
            return dim_err("support rows must match projection columns");
        }
        let cols = self
            .cols
            .iter()
            .map(|c| {
                let mut rows: Vec<usize> = c.iter().flat_map(|&i| p.cols[i].iter().copied()).collect();
                rows.sort_unstable();
                rows.dedup();
                rows
            })
            .collect();
        Ok(Self { rows: p.d, cols })
    }
}

impl ColumnSupports for BinaryMatrix {
    fn num_rows(&self) -> usize {
        self.rows
    }
    fn num_cols(&self) -> usize {
        self.cols.len()
    }
    fn support(&self, col: usize) -> &[usize] {
        &self.cols[col]
    }
}

/// Number of rows with a one in at least one column of `subset`.
pub fn neighborhood_size<G: ColumnSupports + ?Sized>(g: &G, subset: &[usize]) -> Result<usize> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("neighborhood of an empty set".into()));
    }
    let mut seen = vec![false; g.num_rows()];
    let mut count = 0;
    for &c in subset {
        if c >= g.num_cols() {
            return Err(Error::InvalidArgument(format!("column {c} out of range")));
        }
        for &i in g.support(c) {
            if !seen[i] {
                seen[i] = true;
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Incremental neighborhood counter: add/remove columns in stack order.
pub(crate) struct NeighborhoodCounter {
    mult: Vec<u32>,
    size: usize,
}

impl NeighborhoodCounter {
    pub(crate) fn new(rows: usize) -> Self {
        Self {
            mult: vec![0; rows],
            size: 0,
        }
    }

    pub(crate) fn push(&mut self, support: &[usize]) {
        for &i in support {
            if self.mult[i] == 0 {
                self.size += 1;
            }
            self.mult[i] += 1;
        }
    }

    pub(crate) fn pop(&mut self, support: &[usize]) {
        for &i in support {
            self.mult[i] -= 1;
            if self.mult[i] == 0 {
                self.size -= 1;
            }
        }
    }

    pub(crate) fn size(&self) -> usize {
        self.size
    }
}

/// Visit every subset of `0..n` with size in `1..=max_size`, in lexicographic
/// DFS order, with the running neighborhood size.
pub(crate) fn for_each_subset<G: ColumnSupports + ?Sized>(
    g: &G,
    max_size: usize,
    mut visit: impl FnMut(&[usize], usize),
) {
    fn rec<G: ColumnSupports + ?Sized>(
        g: &G,
        start: usize,
        max_size: usize,
        stack: &mut Vec<usize>,
        counter: &mut NeighborhoodCounter,
        visit: &mut dyn FnMut(&[usize], usize),
    ) {
        for c in start..g.num_cols() {
            stack.push(c);
            counter.push(g.support(c));
            visit(stack, counter.size());
            if stack.len() < max_size {
                rec(g, c + 1, max_size, stack, counter, visit);
            }
            counter.pop(g.support(c));
            stack.pop();
        }
    }
    let mut counter = NeighborhoodCounter::new(g.num_rows());
    let mut stack = Vec::with_capacity(max_size);
    rec(g, 0, max_size, &mut stack, &mut counter, &mut visit);
}

/// `Σ_{s=1}^{k} C(n, s)`, saturating.
pub fn subsets_up_to(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 1..=k.min(n) {
        binom = binom.saturating_mul((n - s + 1) as u128) / s as u128;
        total = total.saturating_add(binom);
    }
    total
}

/// Uniformly random `s`-subset of `0..n` (sorted).
pub(crate) fn sample_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, s: usize) -> Vec<usize> {
    let mut out = rand::seq::index::sample(rng, n, s).into_vec();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CertifyMode {
    Exhaustive { budget: u128 },
    Sampled { trials: usize, seed: u64 },
}

impl CertifyMode {
    pub fn exhaustive() -> Self {
        CertifyMode::Exhaustive {
            budget: DEFAULT_SUBSET_BUDGET,
        }
    }

    pub fn sampled(seed: u64) -> Self {
        CertifyMode::Sampled {
            trials: DEFAULT_SAMPLED_TRIALS,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpanderReport {
    /// `min |N(S)| / (|S|·p)` over the tested subsets.
    pub alpha_observed: f64,
    pub worst_subset: Vec<usize>,
    pub subsets_tested: u64,
    pub exhaustive: bool,
    pub gamma_n: usize,
    pub alpha: f64,
    pub certified: bool,
}

/// `γn = max(1, ⌊d / (p·e⁵)⌋)`, the subset-size ceiling of the expansion regime.
pub fn expander_gamma_n(d: usize, p: usize) -> usize {
    ((d as f64 / (p as f64 * 5f64.exp())).floor() as usize).max(1)
}

/// Check the `(γn, α)` expansion property of a left-`p`-regular graph.
///
/// Singletons always expand perfectly (`|N({j})| = p`) and are included in the
/// count for both modes; sampled mode then cycles through sizes
/// `2..=gamma_n`, drawing one uniform subset per trial.
pub fn certify_expander(
    pm: &ProjectionMatrix,
    gamma_n: usize,
    alpha: f64,
    mode: CertifyMode,
) -> Result<ExpanderReport> {
    if gamma_n == 0 {
        return Err(Error::InvalidArgument("gamma_n must be >= 1".into()));
    }
    let gamma_n = gamma_n.min(pm.n);
    let p = pm.p as f64;
    let mut best = f64::INFINITY;
    let mut worst = Vec::new();
    let mut tested: u64 = 0;
    let mut consider = |s: &[usize], nb: usize| {
        let ratio = nb as f64 / (s.len() as f64 * p);
        if ratio < best {
            best = ratio;
            worst = s.to_vec();
        }
    };
    let exhaustive = match mode {
        CertifyMode::Exhaustive { budget } => {
            let needed = subsets_up_to(pm.n, gamma_n);
            if needed > budget {
                return Err(Error::BudgetExceeded { needed, budget });
            }
            for_each_subset(pm, gamma_n, |s, nb| {
                tested += 1;
                consider(s, nb);
            });
            true
        }
        CertifyMode::Sampled { trials, seed } => {
            for j in 0..pm.n {
                tested += 1;
                consider(&[j], pm.cols[j].len());
            }
            if gamma_n >= 2 {
                let mut rng = rng::stream(seed, rng::streams::TRIALS);
                let levels = gamma_n - 1;
                for t in 0..trials {
                    let size = 2 + t % levels;
                    let s = sample_subset(&mut rng, pm.n, size);
                    let nb = neighborhood_size(pm, &s)?;
                    tested += 1;
                    consider(&s, nb);
                }
            }
            false
        }
    };
    Ok(ExpanderReport {
        alpha_observed: best,
        worst_subset: worst,
        subsets_tested: tested,
        exhaustive,
        gamma_n,
        alpha,
        certified: best >= alpha,
    })
}

/// Union-bound failure probability for a random left-`D`-regular bipartite
/// graph with `n1` left and `n2` right nodes not being a `(γn1, 4/5)`
/// expander: `x/(1−x)` with `x = (n1·e⁶/n2)·D·e^{−D/25}`, capped at 1.
pub fn expander_failure_bound(n1: usize, n2: usize, degree: usize) -> f64 {
    let x = (n1 as f64 * 6f64.exp() / n2 as f64) * degree as f64 * (-(degree as f64) / 25.0).exp();
    if x < 1.0 {
        (x / (1.0 - x)).min(1.0)
    } else {
        1.0
    }
}

/// Sparse sign projection: `d × n`, each column holding exactly `p` entries
/// equal to `±1` at uniformly chosen rows with independent uniform signs.
///
/// Used for the symmetric power-method suite, where all three modes are
/// projected. The binary [`ProjectionMatrix`] is used everywhere else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedProjection {
    pub d: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    /// Per column, sorted `(row, sign)` pairs.
    pub cols: Vec<Vec<(usize, i8)>>,
}

pub fn gen_signed_projection(n: usize, d: usize, p: usize, seed: u64) -> Result<SignedProjection> {
    let base = gen_sparse_binary(n, d, p, seed)?;
    let mut signs = rng::stream(seed, rng::streams::TRIALS);
    let cols = base
        .cols
        .iter()
        .map(|support| {
            support
                .iter()
                .map(|&i| (i, if signs.random::<bool>() { 1 } else { -1 }))
                .collect()
        })
        .collect();
    Ok(SignedProjection { d, n, p, seed, cols })
}

impl SignedProjection {
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.d, self.n);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, s) in col {
                m[(i, j)] = s as f64;
            }
        }
        m
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return dim_err(format!("vector length {} != n = {}", x.len(), self.n));
        }
        let mut y = vec![0.0; self.d];
        for (col, &v) in self.cols.iter().zip(x) {
            for &(i, s) in col {
                y[i] += s as f64 * v;
            }
        }
        Ok(y)
    }

    /// `T ×₁ P ×₂ P ×₃ P` for a cubic `n × n × n` tensor.
    pub fn project_cubic_tensor(&self, t: &Tensor3) -> Result<Tensor3> {
        let (n, m1, m2) = t.dims();
        if n != self.n || m1 != self.n || m2 != self.n {
            return dim_err(format!("tensor {n}x{m1}x{m2} is not {0}x{0}x{0}", self.n));
        }
        let d = self.d;
        // one mode at a time, each step rotating the projected mode to the back
        let mut cur = t.clone();
        let mut dims = (n, n, n);
        for _ in 0..3 {
            let (a, b, c) = dims;
            let mut next = Tensor3::zeros(b, c, d);
            for i in 0..a {
                for &(row, s) in &self.cols[i] {
                    let s = s as f64;
                    for k in 0..c {
                        for j in 0..b {
                            let v = next.get(j, k, row) + s * cur.get(i, j, k);
                            next.set(j, k, row, v);
                        }
                    }
                }
            }
            cur = next;
            dims = (b, c, d);
        }
        Ok(cur)
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    fn dims() -> impl Strategy<Value = (usize, usize, usize, u64)> {
        (2usize..60, 1usize..30, any::<u64>())
            .prop_flat_map(|(n, d, seed)| (Just(n), Just(d.min(n)), 1..=d.min(n), Just(seed)))
            .prop_map(|(n, d, p, seed)| (n, d, p, seed))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn supports_are_valid_and_deterministic((n, d, p, seed) in dims()) {
            let pm = gen_projection(n, d, p, seed).unwrap();
            prop_assert_eq!(pm.nnz(), n * p);
            for col in &pm.cols {
                prop_assert_eq!(col.len(), p);
                prop_assert!(col.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(col.iter().all(|&i| i < d));
            }
            prop_assert_eq!(pm, gen_projection(n, d, p, seed).unwrap());
        }

        #[test]
        fn projection_matches_dense_product((n, d, p, seed) in dims(), m in 1usize..6) {
            let pm = gen_projection(n, d, p, seed).unwrap();
            let mut g = rng::stream(seed, 1);
            let x = Matrix::gaussian(n, m, &mut g);
            let dense = pm.to_dense().matmul(&x).unwrap();
            let fast = pm.project_matrix(&x).unwrap();
            prop_assert!(fast.sub(&dense).unwrap().frobenius_norm() <= 1e-12 * dense.frobenius_norm().max(1.0));
        }

        #[test]
        fn tensor_projection_is_a_mode_one_sum((n, d, p, seed) in dims(), m1 in 1usize..4, m2 in 1usize..4) {
            let pm = gen_projection(n, d, p, seed).unwrap();
            let t = Tensor3::from_fn((n, m1, m2), |i, j, k| ((i * 31 + j * 7 + k * 3) % 11) as f64 - 5.0);
            let tt = pm.project_tensor_mode1(&t).unwrap();
            for r in 0..d {
                for j in 0..m1 {
                    for k in 0..m2 {
                        let want: f64 = (0..n).filter(|&i| pm.cols[i].contains(&r)).map(|i| t.get(i, j, k)).sum();
                        prop_assert!((tt.get(r, j, k) - want).abs() <= 1e-12);
                    }
                }
            }
        }

        #[test]
        fn neighborhoods_are_monotone_and_subadditive(
            (n, d, p, seed) in dims(),
            a in prop::collection::btree_set(0usize..60, 0..6),
            b in prop::collection::btree_set(0usize..60, 0..6),
        ) {
            let pm = gen_projection(n, d, p, seed).unwrap();
            let a: Vec<usize> = a.into_iter().filter(|&i| i < n).collect();
            let b: Vec<usize> = b.into_iter().filter(|&i| i < n).collect();
            prop_assume!(!a.is_empty() && !b.is_empty());
            let mut union = a.clone();
            union.extend(&b);
            union.sort_unstable();
            union.dedup();
            let (na, nb, nu) = (
                pm.neighborhood_size(&a).unwrap(),
                pm.neighborhood_size(&b).unwrap(),
                pm.neighborhood_size(&union).unwrap(),
            );
            prop_assert!(na <= nu && nb <= nu);
            prop_assert!(nu <= na + nb);
        }
    }
}
