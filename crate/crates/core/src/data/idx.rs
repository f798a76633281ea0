//! IDX files as distributed for MNIST and Fashion-MNIST: a big-endian
//! header (magic, counts, image shape) followed by unsigned bytes.

use std::fs;
use std::path::Path;

use crate::data::{Dataset, SourceFormat};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Returns `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, usize, Vec<u8>)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let err = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let magic = be_u32(&bytes, 0).ok_or_else(|| err("truncated header".into()))?;
    if magic != IMAGES_MAGIC {
        return Err(err(format!("bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let (n, rows, cols) = match (be_u32(&bytes, 4), be_u32(&bytes, 8), be_u32(&bytes, 12)) {
        (Some(n), Some(r), Some(c)) => (n as usize, r as usize, c as usize),
        _ => return Err(err("truncated header".into())),
    };
    let expected = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() != expected {
        return Err(err(format!("payload is {} bytes, header implies {expected}", payload.len())));
    }
    Ok((n, rows, cols, payload.to_vec()))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let err = |msg: String| Error::Format { path: path.to_path_buf(), msg };
    let magic = be_u32(&bytes, 0).ok_or_else(|| err("truncated header".into()))?;
    if magic != LABELS_MAGIC {
        return Err(err(format!("bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(&bytes, 4).ok_or_else(|| err("truncated header".into()))? as usize;
    let payload = &bytes[8..];
    if payload.len() != n {
        return Err(err(format!("payload is {} bytes, header implies {n}", payload.len())));
    }
    Ok(payload.to_vec())
}

/// Loads an image/label IDX pair. Pixels are scaled to `[0, 1]`; the class
/// count is one more than the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let (n, rows, cols, pixels) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path.as_ref())?;
    if labels.len() != n {
        return Err(Error::Format {
            path: labels_path.as_ref().to_path_buf(),
            msg: format!("{} labels for {n} images", labels.len()),
        });
    }
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let features = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    let labels = labels.iter().map(|&y| y as usize).collect();
    let names = (0..classes).map(|c| c.to_string()).collect();
    Ok(Dataset::new(features, rows * cols, labels, names)?.with_provenance(images_path, SourceFormat::Idx))
}

pub fn write_idx_images(path: impl AsRef<Path>, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for v in [n, rows, cols] {
        out.extend_from_slice(&(v as u32).to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}
