use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;
use crate::rng::{rng_from_seed, split_seed};

/// Which part of an experiment a dataset plays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Adversary,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Adversary => "adversary",
            Role::Test => "test",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Role::Train),
            "adversary" => Ok(Role::Adversary),
            "test" => Ok(Role::Test),
            other => Err(Error::invalid(format!("unknown dataset role `{other}`"))),
        }
    }
}

/// Labeled points stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    role: Role,
    dim: usize,
    num_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        role: Role,
        dim: usize,
        num_classes: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dataset dimension must be at least 1"));
        }
        if num_classes < 2 {
            return Err(Error::invalid("a dataset needs at least two classes"));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::Consistency(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite feature in row {} column {}",
                pos / dim,
                pos % dim
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside the declared {num_classes} classes"
            )));
        }
        Ok(Self {
            name: name.into(),
            role,
            dim,
            num_classes,
            features,
            labels,
        })
    }

    pub fn from_rows(
        name: impl Into<String>,
        role: Role,
        num_classes: usize,
        rows: &[Vec<f64>],
        labels: Vec<usize>,
    ) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        if rows.len() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        Self::new(name, role, dim, num_classes, rows.concat(), labels)
    }

    /// A dataset with no rows.
    pub fn empty(name: impl Into<String>, role: Role, dim: usize, num_classes: usize) -> Self {
        Self {
            name: name.into(),
            role,
            dim,
            num_classes,
            features: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.dim)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn push(&mut self, x: &[f64], y: usize) -> Result<()> {
        crate::error::check_dim(self.dim, x.len())?;
        if y >= self.num_classes {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature".into()));
        }
        self.features.extend_from_slice(x);
        self.labels.push(y);
        Ok(())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            name: self.name.clone(),
            role: self.role,
            dim: self.dim,
            num_classes: self.num_classes,
            features,
            labels,
        }
    }

    /// Same points, different labels.
    pub fn relabeled(&self, labels: Vec<usize>) -> Result<Dataset> {
        Dataset::new(
            self.name.clone(),
            self.role,
            self.dim,
            self.num_classes,
            self.features.clone(),
            labels,
        )
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Most frequent class, lowest index on ties.
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let mut best = 0;
        for (c, &n) in counts.iter().enumerate() {
            if n > counts[best] {
                best = c;
            }
        }
        best
    }

    /// Deterministic stratified split: within each class the rows are shuffled
    /// by `seed` and the first ones go to the first part. Class shares follow
    /// the class frequencies (largest remainder), so every part keeps the
    /// class balance of the whole.
    pub fn stratified_split(&self, sizes: &[usize], seed: u64) -> Result<Vec<Dataset>> {
        let total: usize = sizes.iter().sum();
        if total > self.len() {
            return Err(Error::invalid(format!(
                "requested {total} rows from a dataset of {}",
                self.len()
            )));
        }
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &y) in self.labels.iter().enumerate() {
            by_class.entry(y).or_default().push(i);
        }
        for (c, idx) in by_class.iter_mut() {
            idx.shuffle(&mut rng_from_seed(split_seed(seed, *c as u64)));
        }
        let mut cursor: BTreeMap<usize, usize> = by_class.keys().map(|&c| (c, 0)).collect();
        let mut parts = Vec::with_capacity(sizes.len());
        for &size in sizes {
            let shares = apportion(size, &by_class, &cursor);
            let mut picked = Vec::with_capacity(size);
            for (c, k) in shares {
                let start = cursor[&c];
                picked.extend_from_slice(&by_class[&c][start..start + k]);
                *cursor.get_mut(&c).unwrap() += k;
            }
            picked.sort_unstable();
            parts.push(self.subset(&picked));
        }
        Ok(parts)
    }

    /// Keeps only the listed classes and renumbers them `0..classes.len()` in
    /// the given order.
    pub fn keep_classes(&self, classes: &[usize]) -> Result<Dataset> {
        if classes.len() < 2 {
            return Err(Error::invalid("need at least two classes to keep"));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (x, &y) in self.rows().zip(&self.labels) {
            if let Some(new) = classes.iter().position(|&c| c == y) {
                features.extend_from_slice(x);
                labels.push(new);
            }
        }
        Dataset::new(
            self.name.clone(),
            self.role,
            self.dim,
            classes.len(),
            features,
            labels,
        )
    }

    /// CSV text: `# schema=v1`, a header `x0,..,x{d-1},label`, one row per
    /// point. Floats use the shortest representation that parses back to the
    /// same bits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("# schema=v1\n");
        let header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",label\n");
        for (x, y) in self.rows().zip(&self.labels) {
            for v in x {
                out.push_str(&format!("{v:?},"));
            }
            out.push_str(&format!("{y}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        persist::write_atomic(path.as_ref(), self.to_csv_string().as_bytes())
    }

    pub fn read_csv(
        path: impl AsRef<Path>,
        name: impl Into<String>,
        role: Role,
        num_classes: usize,
    ) -> Result<Dataset> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, name, role, num_classes)
    }

    pub fn parse_csv(
        text: &str,
        name: impl Into<String>,
        role: Role,
        num_classes: usize,
    ) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let dim = header.len().saturating_sub(1);
        if dim == 0 || &header[dim] != "label" {
            return Err(Error::Format(
                "dataset CSV header must be x0,..,x{d-1},label".into(),
            ));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            for field in record.iter().take(dim) {
                features.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line,
                    message: format!("`{field}`: {e}"),
                })?);
            }
            let y = &record[dim];
            labels.push(y.trim().parse::<usize>().map_err(|e| Error::Parse {
                line,
                message: format!("label `{y}`: {e}"),
            })?);
        }
        Dataset::new(name, role, dim, num_classes, features, labels)
    }
}

fn apportion(
    size: usize,
    by_class: &BTreeMap<usize, Vec<usize>>,
    cursor: &BTreeMap<usize, usize>,
) -> Vec<(usize, usize)> {
    let total: usize = by_class.values().map(Vec::len).sum();
    let mut shares: Vec<(usize, usize, f64)> = by_class
        .iter()
        .map(|(&c, idx)| {
            let exact = size as f64 * idx.len() as f64 / total as f64;
            let avail = idx.len() - cursor[&c];
            let k = (exact.floor() as usize).min(avail);
            (c, k, exact - exact.floor())
        })
        .collect();
    let mut assigned: usize = shares.iter().map(|s| s.1).sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| shares[b].2.total_cmp(&shares[a].2).then(a.cmp(&b)));
    while assigned < size {
        let mut progressed = false;
        for &i in &order {
            if assigned == size {
                break;
            }
            let c = shares[i].0;
            if shares[i].1 < by_class[&c].len() - cursor[&c] {
                shares[i].1 += 1;
                assigned += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    shares.into_iter().map(|(c, k, _)| (c, k)).collect()
}

/// Axis-aligned box `[lower_j, upper_j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(
                "box bounds must be non-empty and of equal length",
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(Error::invalid(
                "box bounds must be finite with lower < upper",
            ));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Clamps `x` into the box in place.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }

    /// Tensor grid of `resolution` evenly spaced points per axis, endpoints
    /// included, first axis varying slowest.
    pub fn grid(&self, resolution: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let total = resolution.pow(d as u32);
        let step = |j: usize, k: usize| {
            if resolution == 1 {
                0.5 * (self.lower[j] + self.upper[j])
            } else {
                self.lower[j] + (self.upper[j] - self.lower[j]) * k as f64 / (resolution - 1) as f64
            }
        };
        (0..total)
            .map(|mut flat| {
                let mut p = vec![0.0; d];
                for j in (0..d).rev() {
                    p[j] = step(j, flat % resolution);
                    flat /= resolution;
                }
                p
            })
            .collect()
    }
}
