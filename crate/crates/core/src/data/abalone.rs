use std::path::Path;

use crate::data::{Dataset, Role};
use crate::error::{Error, Result};

/// Abalone with age above this many years is class 1.
pub const AGE_THRESHOLD: f64 = 11.0;

fn encode_sex(field: &str) -> Option<f64> {
    match field.trim() {
        "M" => Some(0.0),
        "F" => Some(0.5),
        "I" => Some(1.0),
        _ => None,
    }
}

/// Parses the UCI abalone CSV: sex, seven physical measurements, rings.
///
/// Sex is encoded M=0, F=0.5, I=1. Age is rings + 1.5 years, and the label
/// is `age > 11`.
pub fn parse_abalone(text: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != 9 {
            return Err(Error::Parse {
                line,
                message: format!("expected 9 columns, found {}", record.len()),
            });
        }
        let sex = encode_sex(&record[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown sex `{}`", &record[0]),
        })?;
        features.push(sex);
        for field in record.iter().skip(1).take(7) {
            features.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{field}`: {e}"),
            })?);
        }
        let rings: f64 = record[8].trim().parse().map_err(|e| Error::Parse {
            line,
            message: format!("rings `{}`: {e}", &record[8]),
        })?;
        labels.push(usize::from(rings + 1.5 > AGE_THRESHOLD));
    }
    Dataset::new("abalone", Role::Train, 8, 2, features, labels)
}

pub fn load_abalone(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_abalone(&text)
}
