use std::fmt::Write as _;
use std::io::Write;

use boundarylab::active::{
    reports_csv_string, PipelineConfig, PipelineData, PipelineReport, Session, Strategy,
};
use boundarylab::attacks::{AttackConfig, AttackKind, BboxConfig};
use boundarylab::data::{generate_halfmoon, load_mnist_idx};
use boundarylab::{Dataset, ModelSpec, Role};
use rayon::prelude::*;

use crate::args::{AlArgs, AlDataset};
use crate::dataset::mnist_paths;
use crate::error::{CliError, CliResult};
use crate::model::attack_config;
use crate::{missing, write_file};

/// The reports of one `al` invocation with their CSV and markdown renderings.
#[derive(Debug, Clone)]
pub struct AlOutput {
    pub reports: Vec<PipelineReport>,
    pub csv: String,
    pub markdown: String,
}

/// Random first, then the requested strategies in order without repeats.
fn strategies(a: &AlArgs) -> CliResult<Vec<Strategy>> {
    let attacks = a
        .attacks
        .iter()
        .map(|s| s.parse::<AttackKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = vec![Strategy::Random];
    for name in &a.strategy {
        let expanded: Vec<Strategy> = match name.trim() {
            "adversarial" => attacks.iter().map(|&k| Strategy::Adversarial(k)).collect(),
            "augmented" => attacks.iter().map(|&k| Strategy::Augmented(k)).collect(),
            s => vec![s.parse()?],
        };
        for s in expanded {
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// BBox-OPT settings for 784-dimensional images: start from the directions
/// towards differently-labeled pool images and keep the search coarse.
fn image_bbox() -> BboxConfig {
    BboxConfig {
        directions: 1,
        ray_step: 0.5,
        max_radius: 20.0,
        bs_tol: 1e-2,
        refine_iters: 10,
        anchors: 10,
        ..BboxConfig::default()
    }
}

fn halfmoon_data(a: &AlArgs, seed: u64, pool_size: usize) -> CliResult<PipelineData> {
    let base = a.data_seed;
    let train = generate_halfmoon(a.train_size, a.sigma, base + 1000 + seed)?.0;
    let pool = generate_halfmoon(pool_size, a.sigma, base + 2000 + seed)?
        .0
        .with_role(Role::Adversary);
    let test = generate_halfmoon(a.test_size, a.sigma, base + 3000 + seed)?
        .0
        .with_role(Role::Test);
    Ok(PipelineData::new(train, pool, test)?)
}

fn fixed_data(a: &AlArgs) -> CliResult<PipelineData> {
    match a.dataset {
        Some(AlDataset::Mnist1v7) => {
            let (img, lbl) = mnist_paths(a.images.clone(), a.labels.clone());
            let all = load_mnist_idx(img, lbl, Some(&[1, 7]))?;
            if a.split.len() != 2 {
                return Err(CliError::usage("--split takes the train and test sizes"));
            }
            let mut parts = all.stratified_split(&a.split, a.data_seed)?.into_iter();
            let train = parts.next().expect("two parts");
            let test = parts.next().expect("two parts").with_role(Role::Test);
            // the adversary draws its queries from the victim's own training images
            let pool = train.clone().with_role(Role::Adversary);
            Ok(PipelineData::new(train, pool, test)?)
        }
        _ => {
            let read =
                |p: &Option<std::path::PathBuf>, flag: &str, role: Role| -> CliResult<Dataset> {
                    let p = p.as_ref().ok_or_else(|| missing(&["al"], flag))?;
                    Ok(Dataset::read_csv(p, "csv", role, a.classes)?)
                };
            Ok(PipelineData::new(
                read(&a.train, "train", Role::Train)?,
                read(&a.pool, "pool", Role::Adversary)?,
                read(&a.test, "test", Role::Test)?,
            )?)
        }
    }
}

/// Runs every strategy and budget for one adversary seed against one session.
fn run_seed(
    session: &Session,
    base: &PipelineConfig,
    strategies: &[Strategy],
    budgets: &[usize],
    seed: u64,
) -> CliResult<Vec<PipelineReport>> {
    let mut out = Vec::with_capacity(strategies.len() * budgets.len());
    for &strategy in strategies {
        for &budget in budgets {
            let cfg = PipelineConfig {
                strategy,
                budget,
                seed,
                ..base.clone()
            };
            out.push(session.run(&cfg)?);
        }
    }
    Ok(out)
}

/// Executes the `al` cross-product without writing any file.
pub fn execute(a: &AlArgs) -> CliResult<AlOutput> {
    let kind = a.dataset.ok_or_else(|| missing(&["al"], "dataset"))?;
    let strategies = strategies(a)?;
    if a.budgets.is_empty() {
        return Err(CliError::usage("the budget list is empty"));
    }
    if a.seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let victim: ModelSpec = a.victim.parse()?;
    let shadow: ModelSpec = a.shadow.as_deref().map_or(Ok(victim.clone()), str::parse)?;
    let mut attack_base = AttackConfig {
        scale: a.scale,
        ..AttackConfig::default()
    };
    let name = match kind {
        AlDataset::Halfmoon => "halfmoon",
        AlDataset::Mnist1v7 => {
            attack_base.bbox = image_bbox();
            "mnist1v7"
        }
        AlDataset::Csv => "csv",
    };
    let mut base = PipelineConfig::new(name, victim, Strategy::Random, 0, 0);
    base.victim_seed = a.victim_seed;
    base.shadow = shadow;
    if let Some(s) = &a.surrogate {
        base.surrogate = s.parse()?;
    }
    base.attack = attack_config(&a.attack, attack_base)?;
    base.warmup_fraction = a.warmup;
    base.dfal_magnitude = a.dfal_magnitude;
    base.validate()?;

    // per_seed[s][strategy * budgets + budget]
    let per_seed: Vec<Vec<PipelineReport>> = match kind {
        AlDataset::Halfmoon => {
            let max_budget = a.budgets.iter().copied().max().unwrap_or(0);
            let pool_size = a.pool_size.unwrap_or(max_budget.max(2000));
            (0..a.seeds as u64)
                .into_par_iter()
                .map(|seed| {
                    let data = halfmoon_data(a, seed, pool_size)?;
                    let session = Session::new(&base, &data)?;
                    run_seed(&session, &base, &strategies, &a.budgets, seed)
                })
                .collect::<CliResult<_>>()?
        }
        _ => {
            let data = fixed_data(a)?;
            let session = Session::new(&base, &data)?;
            (0..a.seeds as u64)
                .map(|seed| run_seed(&session, &base, &strategies, &a.budgets, seed))
                .collect::<CliResult<_>>()?
        }
    };
    let cells = strategies.len() * a.budgets.len();
    let reports: Vec<PipelineReport> = (0..cells)
        .flat_map(|c| per_seed.iter().map(move |r| r[c].clone()))
        .collect();
    Ok(AlOutput {
        csv: reports_csv_string(&reports),
        markdown: al_markdown(&reports),
        reports,
    })
}

pub fn run(a: AlArgs, out: &mut dyn Write) -> CliResult<()> {
    let output = execute(&a)?;
    write_file(&a.out_dir.join("al.csv"), &output.csv)?;
    write_file(&a.out_dir.join("al.md"), &output.markdown)?;
    out.write_all(output.markdown.as_bytes())?;
    Ok(())
}

fn first_seen<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Seed-averaged shadow accuracy (percent) and perturbation L2 per strategy
/// and budget.
pub fn al_markdown(reports: &[PipelineReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return "no runs\n".into();
    };
    let strategies = first_seen(reports.iter().map(|r| r.strategy.clone()));
    let budgets = first_seen(reports.iter().map(|r| r.budget));
    let seeds = first_seen(reports.iter().map(|r| r.seed)).len();
    let victim: Vec<f64> = reports.iter().map(|r| r.victim_acc).collect();
    writeln!(out, "dataset: {}, seeds: {seeds}", first.dataset).unwrap();
    writeln!(
        out,
        "victim accuracy: {:.2}\n",
        100.0 * mean(&victim).unwrap_or(0.0)
    )
    .unwrap();
    out.push_str("| Strategy |");
    for b in &budgets {
        write!(out, " Acc. ({b}) | Perb. ({b}) |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|---:|".repeat(budgets.len()));
    out.push('\n');
    for s in &strategies {
        write!(out, "| {s} |").unwrap();
        for &b in &budgets {
            let cell: Vec<&PipelineReport> = reports
                .iter()
                .filter(|r| &r.strategy == s && r.budget == b)
                .collect();
            let acc: Vec<f64> = cell.iter().map(|r| r.shadow_acc).collect();
            let l2: Vec<f64> = cell.iter().filter_map(|r| r.mean_l2).collect();
            let acc = mean(&acc).map_or("-".into(), |v| format!("{:.2}", 100.0 * v));
            let l2 = mean(&l2).map_or("-".into(), |v| format!("{v:.4}"));
            write!(out, " {acc} | {l2} |").unwrap();
        }
        out.push('\n');
    }
    out
}
