//! Factorize-recover for tensors compressed along the first mode.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::factorize::PipelineTiming;
use crate::recovery::{RecoveryOptions, RecoveryReport, SparseRecovery};
use crate::sensing::ProjectionMatrix;

use super::{cp_als, CpOptions, CpResult, Tensor3, TensorFactors};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TensorPipelineOptions {
    pub cp: CpOptions,
    pub recovery: RecoveryOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorPipelineOutput {
    /// `Â` (n × r) with `B̂ = B̃`, `Ĉ = C̃` and the compressed weights.
    pub factors: TensorFactors,
    /// Decomposition of the compressed tensor.
    pub compressed: CpResult,
    pub recovery_calls: usize,
    pub recovery_reports: Vec<RecoveryReport>,
    pub timing: PipelineTiming,
}

/// Decompose `T̃ = T ×₁ P`, keep `B̃`, `C̃`, and recover each column of `Ã`.
pub fn factorize_recover_tensor(
    pm: &ProjectionMatrix,
    tt: &Tensor3,
    r: usize,
    opts: &TensorPipelineOptions,
) -> Result<TensorPipelineOutput> {
    if tt.dims().0 != pm.d {
        return Err(Error::InvalidDimension(format!(
            "compressed tensor has first mode {}, projection has d = {}",
            tt.dims().0,
            pm.d
        )));
    }
    let start = Instant::now();
    let compressed = cp_als(tt, r, &opts.cp)?;
    let factorize_ms = start.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let mut ropts = opts.recovery;
    ropts.nonneg |= opts.cp.nonneg;
    let rec = SparseRecovery::new(pm, ropts)?;
    let cols = rec.recover_columns(&compressed.factors.a)?;
    let recovery_ms = t.elapsed().as_secs_f64() * 1e3;

    let f = &compressed.factors;
    let factors = TensorFactors::new(cols.recovered, f.b.clone(), f.c.clone(), f.weights.clone())?;
    Ok(TensorPipelineOutput {
        factors,
        recovery_calls: rec.calls(),
        recovery_reports: cols.reports,
        compressed,
        timing: PipelineTiming {
            factorize_ms,
            recovery_ms,
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::match_factors;
    use crate::sensing::gen_projection;
    use crate::synthgen::{gen_tensor_instance, TensorModel};

    #[test]
    fn planted_instance_round_trip() {
        let inst = gen_tensor_instance(TensorModel {
            n: 150,
            m1: 10,
            m2: 12,
            r: 3,
            k: 5,
            seed: 4,
            nonneg: false,
        })
        .unwrap();
        let pm = gen_projection(150, 60, 5, 8).unwrap();
        let tt = pm.project_tensor_mode1(&inst.tensor).unwrap();
        let opts = TensorPipelineOptions {
            cp: CpOptions {
                restarts: 3,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = factorize_recover_tensor(&pm, &tt, 3, &opts).unwrap();
        assert_eq!(out.recovery_calls, 3);
        assert_eq!(out.factors.b, out.compressed.factors.b);
        assert_eq!(out.factors.c, out.compressed.factors.c);
        let truth = &inst.factors;
        for (est, tru) in [
            (&out.factors.a, &truth.a),
            (&out.factors.b, &truth.b),
            (&out.factors.c, &truth.c),
        ] {
            assert!(match_factors(est, tru).unwrap().min_abs_correlation() >= 0.95);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let pm = gen_projection(40, 10, 2, 0).unwrap();
        let tt = Tensor3::zeros(9, 3, 3);
        assert!(factorize_recover_tensor(&pm, &tt, 1, &TensorPipelineOptions::default()).is_err());
    }
}
