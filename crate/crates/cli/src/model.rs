use std::io::Write;

use boundarylab::attacks::{
    run_attack_in_pool, scale_perturbation, write_adversarial_csv, AttackConfig, AttackKind,
};
use boundarylab::classifiers::Classifier;
use boundarylab::{Dataset, Error, FittedClassifier, ModelSpec, Role};
use rayon::prelude::*;

use crate::args::{AttackArgs, AttackFlags, TrainArgs};
use crate::error::{CliError, CliResult};
use crate::missing;

/// Overrides `base` with every flag that was given.
pub(crate) fn attack_config(
    flags: &AttackFlags,
    mut base: AttackConfig,
) -> CliResult<AttackConfig> {
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = flags.$flag { base.$($field).+ = v; })*
        };
    }
    set!(
        epsilon => epsilon,
        steps => steps,
        step_size => step_size,
        candidates => candidates,
        kernel_c => kernel_c,
        overshoot => overshoot,
        max_iter => max_iter,
        cw_iterations => cw.iterations,
        bbox_directions => bbox.directions,
        bbox_ray_step => bbox.ray_step,
        bbox_max_radius => bbox.max_radius,
        bbox_tol => bbox.bs_tol,
        bbox_refine => bbox.refine_iters,
        bbox_anchors => bbox.anchors,
        attack_seed => seed,
    );
    if flags.direct_factor.is_some() {
        base.direct_factor = flags.direct_factor;
    }
    base.clip_unit_box |= flags.clip;
    base.validate()?;
    Ok(base)
}

fn accuracy(model: &FittedClassifier, ds: &Dataset) -> f64 {
    if ds.is_empty() {
        return 0.0;
    }
    let hits = ds
        .rows()
        .zip(ds.labels())
        .filter(|(x, y)| model.predict(x) == **y)
        .count();
    hits as f64 / ds.len() as f64
}

pub fn train(a: TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    let data = a.data.ok_or_else(|| missing(&["train"], "data"))?;
    let dest = a.out.ok_or_else(|| missing(&["train"], "out"))?;
    let spec: ModelSpec = a.model.parse()?;
    let train = Dataset::read_csv(&data, "train", Role::Train, a.classes)?;
    let model = spec.fit(&train, a.seed)?;
    model.save(&dest)?;
    writeln!(out, "model: {spec}")?;
    writeln!(out, "train accuracy: {:.4}", accuracy(&model, &train))?;
    if let Some(test) = a.test {
        let test = Dataset::read_csv(&test, "test", Role::Test, a.classes)?;
        writeln!(out, "test accuracy: {:.4}", accuracy(&model, &test))?;
    }
    writeln!(out, "saved {}", dest.display())?;
    Ok(())
}

pub fn attack(a: AttackArgs, out: &mut dyn Write) -> CliResult<()> {
    let model_path = a.model.ok_or_else(|| missing(&["attack"], "model"))?;
    let data = a.data.ok_or_else(|| missing(&["attack"], "data"))?;
    let method: AttackKind = a
        .method
        .as_deref()
        .ok_or_else(|| missing(&["attack"], "method"))?
        .parse()?;
    let dest = a.out.ok_or_else(|| missing(&["attack"], "out"))?;
    let cfg = attack_config(
        &a.attack,
        AttackConfig {
            method,
            ..Default::default()
        },
    )?;
    let victim = FittedClassifier::load(&model_path)?;
    let ds = Dataset::read_csv(&data, "targets", Role::Adversary, a.classes)?;
    let rows: Vec<Vec<f64>> = ds.rows().map(<[f64]>::to_vec).collect();
    let n = a.limit.map_or(rows.len(), |l| l.min(rows.len()));
    let results: Vec<Option<_>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = boundarylab::rng::split_seed(cfg.seed, i as u64);
            match run_attack_in_pool(&victim, &rows[i], &cfg, seed, &rows) {
                Ok(adv) => scale_perturbation(&adv, a.scale, &victim).map(Some),
                Err(Error::AttackInfeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_, _>>()?;
    let found: Vec<_> = results.into_iter().flatten().collect();
    let flipped = found.iter().filter(|e| e.success).count();
    writeln!(out, "attack: {method}")?;
    writeln!(out, "points: {n}")?;
    writeln!(out, "examples: {}", found.len())?;
    writeln!(out, "label flips: {flipped}")?;
    if !found.is_empty() {
        let mean = found.iter().map(|e| e.perturbation_l2).sum::<f64>() / found.len() as f64;
        let queries: u64 = found.iter().map(|e| e.queries_used).sum();
        writeln!(out, "mean L2: {mean:.6}")?;
        writeln!(out, "victim queries: {queries}")?;
    }
    if found.is_empty() && n > 0 {
        return Err(CliError::Numeric(format!(
            "{method} found no adversarial example"
        )));
    }
    write_adversarial_csv(&found, &dest)?;
    writeln!(out, "wrote {}", dest.display())?;
    Ok(())
}
