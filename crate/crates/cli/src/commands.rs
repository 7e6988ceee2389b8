use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use compfact::factorize::{
    factorize_recover_matrix, recover_factorize_matrix, FactorMethod, PipelineOptions, PipelineTiming,
};
use compfact::io;
use compfact::recovery::{self, RecoveryOptions};
use compfact::sensing::{certify_expander, expander_gamma_n, gen_sparse_binary, BinaryMatrix, CertifyMode};
use compfact::synthgen::{gen_matrix_instance, MatrixModel, SynthInstance, ValueDist};
use compfact::uniqueness::{colspace_equality_check, expansion_bound_check, sparsest_column_check, ExpansionParams};
use compfact::ProjectionMatrix;

use crate::{
    ExpanderArgs, FactorizeArgs, GenProjectionArgs, MethodFlags, MethodKind, PipelineArgs, PipelineMode, RecoverArgs,
    RecoveryFlags, RecoveryKind, SynthArgs, UniquenessArgs,
};

fn load_projection(path: &Path) -> Result<ProjectionMatrix> {
    ProjectionMatrix::load_json(path).with_context(|| format!("reading projection {}", path.display()))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => io::write_json(path, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

pub fn recovery_options(f: &RecoveryFlags) -> Result<RecoveryOptions> {
    let mut opts = match f.recovery {
        RecoveryKind::L1 => RecoveryOptions::default(),
        RecoveryKind::Greedy => {
            let Some(k) = f.sparsity else {
                bail!("--recovery greedy needs --sparsity")
            };
            RecoveryOptions::greedy(k)
        }
    };
    if f.nonneg || f.hard_nonneg {
        opts = opts.with_nonneg(f.hard_nonneg);
    }
    if let Some(it) = f.max_iters {
        opts.max_iters = it;
    }
    opts.validate()?;
    Ok(opts)
}

fn factor_method(f: &MethodFlags) -> FactorMethod {
    match f.method {
        MethodKind::Nmf => FactorMethod::Nmf,
        MethodKind::Spca => FactorMethod::SparsePca { lambda: f.lambda },
    }
}

fn pipeline_options(f: &MethodFlags) -> PipelineOptions {
    let mut opts = PipelineOptions::new(factor_method(f));
    opts.seed = f.seed;
    if let Some(it) = f.iters {
        opts.iters = it;
    }
    opts
}

pub fn gen_projection(a: &GenProjectionArgs) -> Result<()> {
    let pm = gen_sparse_binary(a.n, a.d, a.p, a.seed)?;
    pm.save_json(&a.out)?;
    Ok(())
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let model = MatrixModel {
        n: a.n,
        m: a.m,
        r: a.r,
        k: a.k,
        noise_ratio: a.noise,
        nonneg: a.nonneg,
        seed: a.seed,
        values: ValueDist::Gaussian,
    };
    gen_matrix_instance(model)?.save(&a.out)?;
    Ok(())
}

pub fn recover(a: &RecoverArgs) -> Result<()> {
    let pm = load_projection(&a.projection)?;
    let y = io::read_csv_vector(&a.y)?;
    let rep = recovery::recover(&pm, &y, &recovery_options(&a.flags)?)?;
    io::write_csv_vector(&a.out, &rep.x_hat)?;
    if let Some(path) = &a.report {
        io::write_json(path, &rep)?;
    }
    if !rep.converged {
        eprintln!(
            "warning: recovery did not converge (residual {:.3e})",
            rep.residual_norm
        );
    }
    Ok(())
}

pub fn expander_check(a: &ExpanderArgs) -> Result<()> {
    let pm = load_projection(&a.projection)?;
    let gamma_n = a.gamma_n.unwrap_or_else(|| expander_gamma_n(pm.d, pm.p));
    let mode = if a.exhaustive {
        CertifyMode::Exhaustive { budget: a.budget }
    } else {
        CertifyMode::Sampled {
            trials: a.trials,
            seed: a.seed,
        }
    };
    let rep = certify_expander(&pm, gamma_n, a.alpha, mode)?;
    emit_json(&rep, a.out.as_deref())
}

pub fn factorize(a: &FactorizeArgs) -> Result<()> {
    let m = io::read_csv_matrix(&a.input)?;
    let opts = pipeline_options(&a.method);
    let fit = compfact::factorize::factorize(&m, a.method.r, opts.method, opts.iters, opts.seed)?;
    io::write_csv_matrix(&a.out.join("W.csv"), &fit.w)?;
    io::write_csv_matrix(&a.out.join("H.csv"), &fit.h)?;
    io::write_json(&a.out.join("report.json"), &fit.report(opts.method.name(), opts.seed))?;
    Ok(())
}

#[derive(Serialize)]
struct PipelineSummary<'a> {
    mode: &'a str,
    method: &'a str,
    r: usize,
    m: usize,
    recovery_calls: usize,
    unconverged_recoveries: usize,
    timing: PipelineTiming,
    factor_report: &'a compfact::factorize::FactorReport,
}

pub fn pipeline(a: &PipelineArgs) -> Result<()> {
    let pm = load_projection(&a.projection)?;
    let input = io::read_csv_matrix(&a.input)?;
    let mt = if a.ambient { pm.project_matrix(&input)? } else { input };
    let mut opts = pipeline_options(&a.method);
    opts.recovery = recovery_options(&a.recovery)?;
    let (mode, out) = match a.mode {
        PipelineMode::Fr => ("fr", factorize_recover_matrix(&pm, &mt, a.method.r, &opts)?),
        PipelineMode::Rf => ("rf", recover_factorize_matrix(&pm, &mt, a.method.r, &opts)?),
    };
    io::write_csv_matrix(&a.out.join("W_hat.csv"), &out.w_hat)?;
    io::write_csv_matrix(&a.out.join("H_hat.csv"), &out.h_hat)?;
    let summary = PipelineSummary {
        mode,
        method: opts.method.name(),
        r: a.method.r,
        m: mt.cols(),
        recovery_calls: out.recovery_calls,
        unconverged_recoveries: out.unconverged_recoveries(),
        timing: out.timing,
        factor_report: &out.factor_report,
    };
    io::write_json(&a.out.join("pipeline.json"), &summary)?;
    println!(
        "{mode}: {} recovery calls, recovery {:.1} ms",
        out.recovery_calls, out.timing.recovery_ms
    );
    Ok(())
}

/// `ceil(2(r+k)·log2 n)`.
pub fn default_uniqueness_d(n: usize, r: usize, k: usize) -> usize {
    (2.0 * (r + k) as f64 * (n.max(2) as f64).log2()).ceil() as usize
}

pub fn uniqueness(a: &UniquenessArgs) -> Result<()> {
    let inst = SynthInstance::load(&a.instance).with_context(|| format!("loading {}", a.instance.display()))?;
    let MatrixModel { n, r, k, .. } = inst.model;
    let pm = match &a.projection {
        Some(path) => load_projection(path)?,
        None => gen_sparse_binary(n, a.d.unwrap_or_else(|| default_uniqueness_d(n, r, k)), a.p, a.seed)?,
    };
    let wt = pm.project_matrix(&inst.w)?;
    let mt = pm.project_matrix(&inst.m)?;
    let mut sparsest = sparsest_column_check(&wt, a.trials, a.seed, a.eps)?;
    sparsest.bound_6kp5 = Some(6.0 * (k * pm.p) as f64 / 5.0);
    sparsest.colspace_equal = Some(colspace_equality_check(&mt, &wt, a.rank_tol)?);
    let params = ExpansionParams {
        k,
        p: pm.p,
        d: pm.d,
        exhaustive_limit: a.exhaustive_limit,
        trials: a.trials,
        seed: a.seed,
    };
    let expansion = expansion_bound_check(&BinaryMatrix::from_nonzeros(&wt, a.eps), &params)?;
    let report = json!({
        "n": n,
        "d": pm.d,
        "p": pm.p,
        "r": r,
        "k": k,
        "sparsest": sparsest,
        "expansion": expansion,
    });
    emit_json(&report, a.out.as_deref())
}
