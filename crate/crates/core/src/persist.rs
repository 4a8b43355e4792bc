//! File output and model (de)serialization.
//!
//! Models are stored as pretty-printed JSON objects carrying a `format`
//! version and a `kind` tag. Floats are written in their shortest
//! round-trip form and parsed with correct rounding, so a save/load cycle
//! reproduces every numeric field bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to a temporary sibling and renames it over `path`, so a
/// failed write never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => Path::new(".").to_path_buf(),
    };
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: u32,
    #[serde(flatten)]
    body: T,
}

pub fn to_model_string<T: Serialize>(model: &T) -> Result<String> {
    serde_json::to_string_pretty(&Envelope {
        format: MODEL_FORMAT_VERSION,
        body: model,
    })
    .map_err(|e| Error::Serialization(e.to_string()))
}

pub fn from_model_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let env: Envelope<T> =
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))?;
    if env.format != MODEL_FORMAT_VERSION {
        return Err(Error::Serialization(format!(
            "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
            env.format
        )));
    }
    Ok(env.body)
}

pub fn save_model<T: Serialize>(model: &T, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), to_model_string(model)?.as_bytes())
}

pub fn load_model<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_model_str(&text)
}
