//! Tensor power iteration `x ← T(I, x, x) / ‖T(I, x, x)‖` on symmetric tensors.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};
use crate::rng;

use super::Tensor3;

const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    /// Unit-norm factor estimate.
    pub x: Vec<f64>,
    /// `T(x, x, x)`.
    pub weight: f64,
    pub steps: usize,
}

/// Largest deviation from symmetry under index transpositions, relative to
/// the largest entry.
pub fn symmetry_defect(t: &Tensor3) -> f64 {
    let (n, m1, m2) = t.dims();
    if n != m1 || n != m2 {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let v = t.get(i, j, k);
                worst = worst.max((v - t.get(j, i, k)).abs()).max((v - t.get(i, k, j)).abs());
            }
        }
    }
    let scale = t.max_abs();
    if scale > 0.0 {
        worst / scale
    } else {
        0.0
    }
}

/// A point drawn uniformly from the unit sphere in `R^n`.
pub fn random_unit_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut g = rng::stream(seed, rng::streams::INIT);
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut g)).collect();
        let nrm = norm2(&v);
        if nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
            return v;
        }
    }
}

/// Runs `steps` power iterations from the unit vector `x0`.
pub fn tensor_power_method(t: &Tensor3, x0: &[f64], steps: usize) -> Result<PowerResult> {
    let (n, _, _) = t.dims();
    if symmetry_defect(t) > SYMMETRY_TOL {
        return Err(Error::InvalidInput(
            "power method needs a symmetric cubic tensor".into(),
        ));
    }
    if x0.len() != n {
        return Err(Error::InvalidDimension(format!(
            "initial vector has length {}, tensor side is {n}",
            x0.len()
        )));
    }
    if (norm2(x0) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("initial vector must have unit norm".into()));
    }
    let mut x = x0.to_vec();
    for _ in 0..steps {
        let mut y = t.contract_23(&x, &x)?;
        let nrm = norm2(&y);
        if !(nrm > 0.0) || !nrm.is_finite() {
            return Err(Error::Degenerate("power iterate vanished".into()));
        }
        y.iter_mut().for_each(|v| *v /= nrm);
        x = y;
    }
    let weight = dot(&x, &t.contract_23(&x, &x)?);
    Ok(PowerResult { x, weight, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::gen_symmetric_incoherent_tensor;

    #[test]
    fn rank_one_fixed_point() {
        let inst = gen_symmetric_incoherent_tensor(6, &[2.5], 0.1, 1).unwrap();
        let a = inst.factors.col(0);
        let x0 = random_unit_vector(6, 3);
        let res = tensor_power_method(&inst.tensor, &x0, 5).unwrap();
        assert!(dot(&res.x, &a).abs() >= 1.0 - 1e-9);
        assert!((res.weight.abs() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn iterates_are_unit_norm() {
        let inst = gen_symmetric_incoherent_tensor(20, &[1.0, 0.9, 0.8], 0.0, 2).unwrap();
        for steps in [1, 2, 7] {
            let res = tensor_power_method(&inst.tensor, &random_unit_vector(20, 9), steps).unwrap();
            assert!((norm2(&res.x) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = Tensor3::from_fn((3, 3, 3), |i, j, k| (i + 2 * j + 3 * k) as f64);
        assert!(tensor_power_method(&t, &random_unit_vector(3, 0), 3).is_err());
        let zero = Tensor3::zeros(3, 3, 3);
        assert!(matches!(
            tensor_power_method(&zero, &random_unit_vector(3, 0), 3),
            Err(Error::Degenerate(_))
        ));
        let inst = gen_symmetric_incoherent_tensor(4, &[1.0], 0.0, 0).unwrap();
        assert!(tensor_power_method(&inst.tensor, &[1.0, 1.0, 0.0, 0.0], 3).is_err());
    }
}
