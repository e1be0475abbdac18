//! IDX container (big-endian): `00 00 08 03 | N | rows | cols | pixels` for
//! images and `00 00 08 01 | N | labels` for labels.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], at: usize, field: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(field, format!("file ends before byte {}", at + 4)))
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    parse_idx(&images, &labels)
}

pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Dataset> {
    let magic = be_u32(images, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(
            "image magic",
            format!("expected 0x{IMAGE_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let n = be_u32(images, 4, "image count")? as usize;
    let rows = be_u32(images, 8, "image rows")? as usize;
    let cols = be_u32(images, 12, "image cols")? as usize;
    let payload = &images[16..];
    let expected = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| Error::format("image count", "dimensions overflow"))?;
    if payload.len() != expected {
        return Err(Error::format(
            "image payload",
            format!("{n}x{rows}x{cols} needs {expected} bytes, found {}", payload.len()),
        ));
    }

    let magic = be_u32(labels, 0, "label magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::format(
            "label magic",
            format!("expected 0x{LABEL_MAGIC:08x}, found 0x{magic:08x}"),
        ));
    }
    let n_labels = be_u32(labels, 4, "label count")? as usize;
    if n_labels != n {
        return Err(Error::format(
            "label count",
            format!("{n_labels} labels for {n} images"),
        ));
    }
    let label_bytes = &labels[8..];
    if label_bytes.len() != n {
        return Err(Error::format(
            "label payload",
            format!("expected {n} bytes, found {}", label_bytes.len()),
        ));
    }
    let labels = label_bytes.iter().map(|&b| b as usize).collect();
    Dataset::from_bytes(payload, rows, cols, labels, None)
}

/// Serializes a dataset back to `(images, labels)` IDX bytes.
pub fn write_idx(ds: &Dataset) -> Result<(Vec<u8>, Vec<u8>)> {
    if ds.class_count() > 256 {
        return Err(Error::invalid("IDX labels are single bytes; more than 256 classes"));
    }
    let (rows, cols) = ds.image_shape();
    let mut images = Vec::with_capacity(16 + ds.len() * rows * cols);
    for v in [IMAGE_MAGIC, ds.len() as u32, rows as u32, cols as u32] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.extend(ds.pixel_bytes());
    let mut labels = Vec::with_capacity(8 + ds.len());
    for v in [LABEL_MAGIC, ds.len() as u32] {
        labels.extend_from_slice(&v.to_be_bytes());
    }
    labels.extend(ds.labels().iter().map(|&y| y as u8));
    Ok((images, labels))
}
