//! IDX reader for MNIST-style files (optionally gzip-compressed).

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use crate::data::{Dataset, Role};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

/// Decodes an IDX3 image file into `(rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let payload = &bytes[16..];
    let expected = count * rows * cols;
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "image payload has {} bytes, header promises {expected}",
            payload.len()
        )));
    }
    Ok((count, rows * cols, payload.to_vec()))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let count = be_u32(bytes, 4, "labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(Error::Format(format!(
            "label payload has {} bytes, header promises {count}",
            payload.len()
        )));
    }
    Ok(payload.to_vec())
}

/// Builds a dataset from decoded IDX buffers. Pixels are scaled to `[0, 1]`.
/// With `keep_digits`, only those digits are kept and relabeled by their
/// position in the list, e.g. `[1, 7]` maps 1 to 0 and 7 to 1.
pub fn mnist_from_idx(
    image_bytes: &[u8],
    label_bytes: &[u8],
    keep_digits: Option<&[usize]>,
) -> Result<Dataset> {
    let (count, dim, pixels) = parse_idx_images(image_bytes)?;
    let labels = parse_idx_labels(label_bytes)?;
    if labels.len() != count {
        return Err(Error::Consistency(format!(
            "{count} images but {} labels",
            labels.len()
        )));
    }
    let features: Vec<f64> = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    let num_classes = labels.iter().max().map_or(10, |&m| (m + 1).max(10));
    let ds = Dataset::new("mnist", Role::Train, dim, num_classes, features, labels)?;
    match keep_digits {
        Some(digits) => {
            let name = format!(
                "mnist{}",
                digits
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join("v")
            );
            Ok(ds.keep_classes(digits)?.with_name(name))
        }
        None => Ok(ds),
    }
}

pub fn load_mnist_idx(
    image_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    keep_digits: Option<&[usize]>,
) -> Result<Dataset> {
    let images = read_maybe_gz(image_path.as_ref())?;
    let labels = read_maybe_gz(label_path.as_ref())?;
    mnist_from_idx(&images, &labels, keep_digits)
}

#[cfg(test)]
pub(crate) fn encode_idx(
    images: &[Vec<u8>],
    rows: u32,
    cols: u32,
    labels: &[u8],
) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&rows.to_be_bytes());
    img.extend_from_slice(&cols.to_be_bytes());
    for im in images {
        img.extend_from_slice(im);
    }
    let mut lab = Vec::new();
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    (img, lab)
}
