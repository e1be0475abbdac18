//! `SODATA1` flat container, little-endian:
//! `"SODATA1" | N: u32 | rows: u32 | cols: u32 | C: u32 | N·rows·cols pixel
//! bytes | N labels as u32`.
//!
//! Meant as a conversion target for datasets that are not shipped as IDX.

use std::fs;
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

const MAGIC: &[u8; 7] = b"SODATA1";

pub fn load_sodata(path: &Path) -> Result<Dataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_sodata(&bytes)
}

fn le_u32(bytes: &[u8], at: usize, field: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(field, "truncated header"))
}

pub fn parse_sodata(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::format("magic", "expected SODATA1"));
    }
    let n = le_u32(bytes, 7, "count")? as usize;
    let rows = le_u32(bytes, 11, "rows")? as usize;
    let cols = le_u32(bytes, 15, "cols")? as usize;
    let classes = le_u32(bytes, 19, "class_count")? as usize;
    let pixels_len = n * rows * cols;
    let start = 23;
    let expected = start + pixels_len + 4 * n;
    if bytes.len() != expected {
        return Err(Error::format(
            "payload",
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let pixels = &bytes[start..start + pixels_len];
    let labels: Vec<usize> = bytes[start + pixels_len..]
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
        .collect();
    if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::format("labels", format!("label {bad} not below {classes}")));
    }
    Dataset::from_bytes(pixels, rows, cols, labels, Some(classes))
}

pub fn write_sodata(ds: &Dataset) -> Vec<u8> {
    let (rows, cols) = ds.image_shape();
    let mut out = MAGIC.to_vec();
    for v in [ds.len(), rows, cols, ds.class_count()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend(ds.pixel_bytes());
    for &y in ds.labels() {
        out.extend_from_slice(&(y as u32).to_le_bytes());
    }
    out
}
