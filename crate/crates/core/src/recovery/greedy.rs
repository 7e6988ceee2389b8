//! Sequential sparse matching pursuit.
//!
//! Each step picks the coordinate `i` and increment `z` that most reduce
//! `‖y − P·x‖₁`. Because column `i` of `P` is the indicator of its support
//! `S_i`, the best increment for `i` is a median of the residual over `S_i`,
//! so one sweep over the columns costs `O(n·p log p)`. Every `period` moves
//! the iterate is pruned to its `k` largest entries.

use crate::error::{Error, Result};
use crate::linalg::{norm1, Matrix};
use crate::sensing::ProjectionMatrix;

use super::{check_input, residual, RecoveryOptions, RecoveryReport};

struct Move {
    col: usize,
    delta: f64,
    gain: f64,
}

fn best_move(pm: &ProjectionMatrix, r: &[f64], x: &[f64], nonneg: bool, buf: &mut Vec<f64>) -> Option<Move> {
    let mut best: Option<Move> = None;
    for (col, support) in pm.cols.iter().enumerate() {
        buf.clear();
        buf.extend(support.iter().map(|&i| r[i]));
        buf.sort_by(f64::total_cmp);
        let m = buf.len();
        let mut delta = if m % 2 == 1 {
            buf[m / 2]
        } else {
            0.5 * (buf[m / 2 - 1] + buf[m / 2])
        };
        if nonneg {
            delta = delta.max(-x[col]);
        }
        if delta == 0.0 {
            continue;
        }
        let gain: f64 = buf.iter().map(|&v| v.abs() - (v - delta).abs()).sum();
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Move { col, delta, gain });
        }
    }
    best
}

fn prune(x: &mut [f64], k: usize) {
    if k >= x.len() {
        return;
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()));
    for &i in &idx[k..] {
        x[i] = 0.0;
    }
}

fn residual_vec(pm: &ProjectionMatrix, x: &[f64], y: &[f64]) -> Vec<f64> {
    let px = pm.apply(x).expect("checked");
    y.iter().zip(px).map(|(a, b)| a - b).collect()
}

/// Least-squares refit on the final support, kept only if it lowers the residual.
fn debias(pm: &ProjectionMatrix, y: &[f64], x: &mut [f64], nonneg: bool) {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x[j] != 0.0).collect();
    if support.is_empty() || support.len() > pm.d {
        return;
    }
    let sub = Matrix::from_fn(pm.d, support.len(), |i, c| {
        if pm.cols[support[c]].binary_search(&i).is_ok() {
            1.0
        } else {
            0.0
        }
    });
    let rhs = Matrix::from_vec(pm.d, 1, y.to_vec()).expect("column");
    let Ok(sol) = sub.solve_least_squares(&rhs) else {
        return;
    };
    let mut cand = vec![0.0; x.len()];
    for (c, &j) in support.iter().enumerate() {
        cand[j] = sol[(c, 0)];
    }
    if nonneg && cand.iter().any(|&v| v < 0.0) {
        return;
    }
    if residual(pm, &cand, y) < residual(pm, x, y) {
        x.copy_from_slice(&cand);
    }
}

/// Greedy ℓ1-residual recovery; requires `opts.sparsity_hint`.
///
/// Returns the best iterate seen (smallest ℓ1 residual after pruning).
pub fn greedy_recover(pm: &ProjectionMatrix, y: &[f64], opts: &RecoveryOptions) -> Result<RecoveryReport> {
    check_input(pm, y, opts)?;
    let k = opts
        .sparsity_hint
        .ok_or_else(|| Error::InvalidArgument("greedy recovery needs sparsity_hint".into()))?;
    let n = pm.n;
    let nonneg = opts.nonneg;
    let target = opts.equality_tol * crate::linalg::norm2(y).max(1.0);
    let period = (n / 10).max(1);

    let mut x = vec![0.0; n];
    let mut r = y.to_vec();
    let mut best_x = x.clone();
    let mut best_res = norm1(&r);
    let mut buf = Vec::with_capacity(pm.p);
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < opts.max_iters && crate::linalg::norm2(&r) > target {
        match best_move(pm, &r, &x, nonneg, &mut buf) {
            Some(mv) if mv.gain > 1e-15 * best_res.max(1e-300) => {
                x[mv.col] += mv.delta;
                for &i in &pm.cols[mv.col] {
                    r[i] -= mv.delta;
                }
            }
            _ => stalled = true,
        }
        iterations += 1;
        if stalled || iterations % period == 0 {
            prune(&mut x, k);
            r = residual_vec(pm, &x, y);
            let res = norm1(&r);
            if res < best_res {
                best_res = res;
                best_x.clone_from(&x);
            }
            if stalled {
                break;
            }
        }
    }
    prune(&mut x, k);
    if norm1(&residual_vec(pm, &x, y)) < best_res {
        best_x = x;
    }
    debias(pm, y, &mut best_x, nonneg);
    Ok(RecoveryReport::finish(
        pm,
        y,
        best_x,
        iterations,
        true,
        opts.equality_tol,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::gen_projection;

    #[test]
    fn zero_input() {
        let pm = gen_projection(30, 10, 3, 1).unwrap();
        let rep = greedy_recover(&pm, &[0.0; 10], &RecoveryOptions::greedy(2)).unwrap();
        assert!(rep.converged);
        assert!(rep.x_hat.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn needs_hint() {
        let pm = gen_projection(30, 10, 3, 1).unwrap();
        let opts = RecoveryOptions {
            method: super::super::RecoveryMethod::Greedy,
            ..Default::default()
        };
        assert!(greedy_recover(&pm, &[1.0; 10], &opts).is_err());
    }

    #[test]
    fn recovers_well_measured_sparse_vector() {
        let pm = gen_projection(300, 120, 5, 4).unwrap();
        let mut x = vec![0.0; 300];
        for (i, v) in [(3, 1.2), (77, -0.7), (150, 2.5), (299, 0.4)] {
            x[i] = v;
        }
        let y = pm.apply(&x).unwrap();
        let rep = greedy_recover(&pm, &y, &RecoveryOptions::greedy(4)).unwrap();
        assert!(rep.converged, "residual {}", rep.residual_norm);
        for (a, b) in rep.x_hat.iter().zip(&x) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn nonneg_respected() {
        let pm = gen_projection(100, 40, 4, 9).unwrap();
        let mut x = vec![0.0; 100];
        x[5] = 1.0;
        x[40] = 0.5;
        let y = pm.apply(&x).unwrap();
        let rep = greedy_recover(&pm, &y, &RecoveryOptions::greedy(2).with_nonneg(false)).unwrap();
        assert!(rep.x_hat.iter().all(|&v| v >= 0.0));
    }
}
