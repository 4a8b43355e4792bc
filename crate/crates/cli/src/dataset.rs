use std::io::Write;
use std::path::PathBuf;

use boundarylab::data::{
    generate_halfmoon, load_abalone, load_mnist_idx, sample_labeled, BetaSamplerConfig,
    HalfmoonTruth,
};
use boundarylab::{Dataset, Role};

use crate::args::{GenArgs, GenKind, LoadArgs, LoadKind};
use crate::error::{CliError, CliResult};
use crate::{data_dir, missing, write_file};

fn emit(ds: &Dataset, out_path: Option<&PathBuf>, out: &mut dyn Write) -> CliResult<()> {
    let text = ds.to_csv_string();
    match out_path {
        Some(p) => {
            write_file(p, &text)?;
            writeln!(out, "wrote {} rows to {}", ds.len(), p.display())?;
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn gen(a: GenArgs, out: &mut dyn Write) -> CliResult<()> {
    let kind = a.kind.ok_or_else(|| missing(&["dataset", "gen"], "kind"))?;
    let role: Role = a.role.parse()?;
    let ds = match kind {
        GenKind::Halfmoon => generate_halfmoon(a.n, a.sigma, a.seed)?.0,
        GenKind::Beta => {
            let truth = HalfmoonTruth::new(a.sigma)?;
            let cfg = BetaSamplerConfig {
                beta: a.beta,
                density_floor: a.density_floor,
                seed: a.seed,
                ..Default::default()
            };
            sample_labeled(&truth, &cfg, a.n, "halfmoon_beta")?
        }
    };
    emit(&ds.with_role(role), a.out.as_ref(), out)
}

/// Default location of the bundled 10k MNIST subset.
pub(crate) fn mnist_paths(images: Option<PathBuf>, labels: Option<PathBuf>) -> (PathBuf, PathBuf) {
    let dir = data_dir().join("mnist");
    (
        images.unwrap_or_else(|| dir.join("mnist10k-images-idx3-ubyte.gz")),
        labels.unwrap_or_else(|| dir.join("mnist10k-labels-idx1-ubyte.gz")),
    )
}

pub fn load(a: LoadArgs, out: &mut dyn Write) -> CliResult<()> {
    let kind = a
        .kind
        .ok_or_else(|| missing(&["dataset", "load"], "kind"))?;
    let ds = match kind {
        LoadKind::Mnist => {
            let (img, lbl) = mnist_paths(a.images, a.labels);
            let digits = if a.digits.is_empty() {
                None
            } else {
                Some(a.digits.as_slice())
            };
            load_mnist_idx(img, lbl, digits)?
        }
        LoadKind::Abalone => {
            let path = a
                .path
                .unwrap_or_else(|| data_dir().join("abalone").join("abalone.data"));
            load_abalone(path)?
        }
        LoadKind::Csv => {
            let path = a
                .path
                .ok_or_else(|| missing(&["dataset", "load"], "path"))?;
            let name = path
                .file_stem()
                .map_or("csv".into(), |s| s.to_string_lossy().into_owned());
            Dataset::read_csv(&path, name, Role::Train, a.classes)?
        }
    };
    if a.split.is_empty() {
        return emit(&ds, a.out.as_ref(), out);
    }
    let roles: &[Role] = match a.split.len() {
        2 => &[Role::Train, Role::Test],
        3 => &[Role::Train, Role::Adversary, Role::Test],
        n => {
            return Err(CliError::usage(format!(
                "--split takes 2 or 3 sizes, got {n}"
            )))
        }
    };
    let dir = a
        .out_dir
        .ok_or_else(|| missing(&["dataset", "load"], "out-dir"))?;
    let parts = ds.stratified_split(&a.split, a.seed)?;
    for (part, role) in parts.into_iter().zip(roles) {
        let path = dir.join(format!("{}_{role}.csv", ds.name()));
        emit(&part.with_role(*role), Some(&path), out)?;
    }
    Ok(())
}
