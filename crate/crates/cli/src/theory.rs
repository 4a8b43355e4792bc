use std::io::Write;

use boundarylab::data::HalfmoonTruth;
use boundarylab::theory::{
    beta_monotonicity_experiment, beta_sweep_csv_string, beta_sweep_summary, correctness_region,
    thm1_constants, thm2_bound, thm3_bound, verify_knn_bound, BetaSweepConfig, Thm1Params,
    Thm2Params, Thm3Params, VerifyConfig,
};
use boundarylab::{FittedClassifier, ModelSpec};

use crate::args::{BetaSweepArgs, BoundsArgs, RegionArgs, VerifyArgs};
use crate::error::{CliError, CliResult};
use crate::{missing, write_file};

fn estimator_spec(name: &str, a: &BetaSweepArgs) -> CliResult<ModelSpec> {
    Ok(match name.trim() {
        "knn" => ModelSpec::Knn { k: a.k },
        "nw" => format!("nw:{}", a.bandwidth).parse()?,
        "krr" => format!("krr:{}", a.lambda).parse()?,
        other => other.parse()?,
    })
}

pub fn beta_sweep(a: BetaSweepArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.beta.is_empty() {
        return Err(CliError::usage(
            "the beta list is empty; pass --beta B1,B2,..",
        ));
    }
    let specs = a
        .estimator
        .iter()
        .map(|e| estimator_spec(e, &a))
        .collect::<CliResult<Vec<_>>>()?;
    let truth = HalfmoonTruth::new(a.sigma)?;
    let cfg = BetaSweepConfig {
        betas: a.beta.clone(),
        n: a.n,
        seeds: a.seeds,
        grid_resolution: a.grid,
        density_floor: a.density_floor,
        seed: a.seed,
    };
    let reports = beta_monotonicity_experiment(&truth, &specs, &cfg)?;
    let summary = beta_sweep_summary(&reports);
    write_file(
        &a.out_dir.join("beta_sweep.csv"),
        &beta_sweep_csv_string(&reports),
    )?;
    write_file(&a.out_dir.join("beta_sweep_summary.txt"), &summary)?;
    out.write_all(summary.as_bytes())?;
    Ok(())
}

pub fn bounds(a: BoundsArgs, out: &mut dyn Write) -> CliResult<()> {
    let thm = a.thm.ok_or_else(|| missing(&["theory", "bounds"], "thm"))?;
    let n = a.n.ok_or_else(|| missing(&["theory", "bounds"], "n"))?;
    match thm {
        1 => {
            let k = a.k.ok_or_else(|| missing(&["theory", "bounds"], "k"))?;
            let p = Thm1Params {
                alpha: a.alpha,
                lipschitz: a.lipschitz,
                c_dp: a.c_dp,
                ..Thm1Params::new(n, k, a.d, a.delta)
            };
            let (c0, dp) = thm1_constants(&p)?;
            writeln!(out, "C0 = {c0:?}")?;
            writeln!(out, "delta_p = {dp:?}")?;
            writeln!(out, "mass = {:?}", k as f64 / n as f64 + dp)?;
        }
        2 | 3 => {
            let h = a.h.ok_or_else(|| missing(&["theory", "bounds"], "h"))?;
            let base = Thm2Params {
                lipschitz: a.lipschitz,
                c: a.c,
                t: a.t,
                ..Thm2Params::new(n, h, a.d)
            };
            writeln!(out, "t = {:?}", base.t())?;
            let b = if thm == 2 {
                thm2_bound(&base, a.mu)?
            } else {
                let lambda_n = a
                    .lambda_n
                    .ok_or_else(|| missing(&["theory", "bounds"], "lambda-n"))?;
                thm3_bound(&Thm3Params { base, lambda_n }, a.mu)?
            };
            writeln!(out, "bound = {b:?}")?;
        }
        other => {
            return Err(CliError::usage(format!(
                "--thm must be 1, 2 or 3, got {other}"
            )))
        }
    }
    Ok(())
}

pub fn verify(a: VerifyArgs, out: &mut dyn Write) -> CliResult<()> {
    let truth = HalfmoonTruth::new(a.sigma)?;
    let cfg = VerifyConfig {
        beta: a.beta,
        n: a.n,
        k: a.k,
        delta: a.delta,
        trials: a.trials,
        alpha: a.alpha,
        lipschitz: a.lipschitz,
        lipschitz_scale: a.lipschitz_scale,
        c_dp: a.c_dp,
        grid_resolution: a.grid,
        reference_samples: a.reference_samples,
        density_floor: a.density_floor,
        seed: a.seed,
    };
    let report = verify_knn_bound(&truth, &cfg)?;
    let summary = report.summary();
    write_file(&a.out_dir.join("verify.csv"), &report.to_csv_string())?;
    write_file(&a.out_dir.join("verify_summary.txt"), &summary)?;
    out.write_all(summary.as_bytes())?;
    Ok(())
}

pub fn region(a: RegionArgs, out: &mut dyn Write) -> CliResult<()> {
    let path = a
        .model
        .ok_or_else(|| missing(&["theory", "region"], "model"))?;
    let model = FittedClassifier::load(&path)?;
    let truth = HalfmoonTruth::new(a.sigma)?;
    let report = correctness_region(&model, &truth, a.grid)?;
    if let Some(dest) = &a.out {
        write_file(dest, &report.to_csv_string())?;
    }
    out.write_all(report.summary().as_bytes())?;
    Ok(())
}
