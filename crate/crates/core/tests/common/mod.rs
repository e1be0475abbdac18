#![allow(dead_code)]

pub mod tables;

use std::path::PathBuf;

/// Dataset root: `$SPARSEOPT_DATA`, else `<workspace>/data` as populated by
/// `scripts/fetch_data.sh`.
pub fn data_root() -> PathBuf {
    std::env::var_os("SPARSEOPT_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn dataset_dir(name: &str) -> Option<PathBuf> {
    let dir = data_root().join(name);
    dir.join("train-images-idx3-ubyte").exists().then_some(dir)
}

/// `χ²` quantile by the Wilson–Hilferty approximation.
pub fn chi2_quantile(dof: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * dof);
    dof * (1.0 - a + z * a.sqrt()).powi(3)
}
