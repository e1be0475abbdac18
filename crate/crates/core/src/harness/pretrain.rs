use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method, Mode};
use super::run::{run_seed, ExperimentData};
use crate::error::{Error, Result};
use crate::model::Mlp;

/// Sidecar written next to a pretrained checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainMeta {
    pub optimizer: String,
    pub dataset: PathBuf,
    pub seed: u64,
    pub iterations: u64,
    pub final_train_loss: f64,
    pub test_accuracy: Option<f64>,
    pub config: String,
}

/// The pretraining recipe: dense Adam on the full training split with the
/// usual defaults.
pub fn pretrain_config(dataset: &Path, seed: u64, max_iters: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        name: "pretrain".into(),
        dataset: dataset.to_path_buf(),
        mode: Mode::Full,
        max_iters,
        seeds: vec![seed],
        eval_every: 0,
        ..ExperimentConfig::default()
    };
    cfg.optimizer.method = Method::Adam;
    cfg
}

pub fn pretrain(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<(Mlp, PretrainMeta)> {
    let seed = cfg.seeds[0];
    let run = run_seed(cfg, data, seed, None)?;
    if let Some(err) = run.error {
        return Err(Error::Numerical(format!("pretraining failed: {err}")));
    }
    let meta = PretrainMeta {
        optimizer: "adam".into(),
        dataset: cfg.dataset.clone(),
        seed,
        iterations: run.iterations,
        final_train_loss: run.rows.last().map_or(f64::NAN, |r| r.train_loss),
        test_accuracy: run.final_accuracy,
        config: cfg.fingerprint(),
    };
    Ok((run.model, meta))
}

pub fn sidecar_path(ckpt: &Path) -> PathBuf {
    let mut name = ckpt.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the checkpoint and `<ckpt>.json`.
pub fn save_pretrained(ckpt: &Path, model: &Mlp, meta: &PretrainMeta) -> Result<()> {
    if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    model.save_checkpoint(ckpt)?;
    let side = sidecar_path(ckpt);
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}
