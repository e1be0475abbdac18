use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{AdamHyper, GradMode, MomentMode, SoHyper, SupportMode};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    /// Minibatch training on the whole training split.
    #[default]
    Full,
    /// Training on `shots` samples per class.
    FewShot { shots: usize },
    /// Start from a checkpoint; optionally restrict to a few-shot support set.
    Adapt {
        checkpoint: PathBuf,
        #[serde(default)]
        shots: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    So,
    Adam,
    Lora,
    Relora,
    Galore,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Half-cosine decay from `lr` to 0 over `max_iters`.
    Cosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub method: Method,
    pub kappa: f64,
    /// SO support refresh, ReLoRA merge and GaLore projector interval.
    pub interval: u64,
    /// Rank for LoRA, ReLoRA and GaLore.
    pub rank: usize,
    pub grad_mode: GradMode,
    pub moment_mode: MomentMode,
    pub support_mode: SupportMode,
    pub persist_moments: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::So,
            kappa: 0.01,
            interval: 30,
            rank: 2,
            grad_mode: GradMode::Random,
            moment_mode: MomentMode::ImportanceTopM,
            support_mode: SupportMode::Dynamic,
            persist_moments: false,
        }
    }
}

/// One experiment: a dataset, a training mode, an optimizer and the seeds
/// to repeat it over. Serialized as JSON; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label used to group runs in summaries.
    pub name: String,
    /// Directory with IDX files (MNIST names) or `train.sodata`/`test.sodata`.
    pub dataset: PathBuf,
    pub mode: Mode,
    pub optimizer: OptimizerConfig,
    pub lr: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub schedule: Schedule,
    /// Defaults to 64 for full-data training and the whole support set for
    /// few-shot training.
    pub batch_size: Option<usize>,
    pub max_iters: u64,
    /// Stop as soon as a step's training loss falls below this.
    pub tau: f64,
    pub seeds: Vec<u64>,
    pub track_rank: bool,
    /// Iterations between rank measurements when `track_rank` is set.
    pub rank_every: u64,
    /// Iterations between test evaluations; 0 evaluates only at the end.
    pub eval_every: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: PathBuf::new(),
            mode: Mode::Full,
            optimizer: OptimizerConfig::default(),
            lr: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            schedule: Schedule::Constant,
            batch_size: None,
            max_iters: 3000,
            tau: 1e-4,
            seeds: (0..10).collect(),
            track_rank: false,
            rank_every: 10,
            eval_every: 10,
            output: None,
        }
    }
}

pub const FULL_DATA_BATCH: usize = 64;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative dataset, checkpoint and output paths
    /// are resolved against the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset);
        if let Mode::Adapt { checkpoint, .. } = &mut self.mode {
            fix(checkpoint);
        }
        if let Some(out) = &mut self.output {
            fix(out);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dataset.as_os_str().is_empty() {
            return fail("dataset path is required".into());
        }
        if self.max_iters == 0 {
            return fail("max_iters must be at least 1".into());
        }
        if !(self.tau > 0.0) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty".into());
        }
        if self.batch_size == Some(0) {
            return fail("batch_size must be at least 1".into());
        }
        if self.track_rank && self.rank_every == 0 {
            return fail("rank_every must be at least 1".into());
        }
        match self.mode {
            Mode::FewShot { shots: 0 } | Mode::Adapt { shots: Some(0), .. } => {
                return fail("shots must be at least 1".into())
            }
            _ => {}
        }
        let o = &self.optimizer;
        if matches!(o.method, Method::Lora | Method::Relora | Method::Galore) && o.rank == 0 {
            return fail("rank must be at least 1".into());
        }
        self.so_hyper()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn shots(&self) -> Option<usize> {
        match self.mode {
            Mode::Full => None,
            Mode::FewShot { shots } => Some(shots),
            Mode::Adapt { shots, .. } => shots,
        }
    }

    pub fn so_hyper(&self) -> SoHyper {
        let o = &self.optimizer;
        SoHyper {
            eta: self.lr,
            beta1: self.betas.0,
            beta2: self.betas.1,
            eps: self.eps,
            kappa: o.kappa,
            interval: o.interval,
            tau: self.tau,
            grad_mode: o.grad_mode,
            moment_mode: o.moment_mode,
            support_mode: o.support_mode,
            persist_moments: o.persist_moments,
        }
    }

    pub fn adam_hyper(&self) -> AdamHyper {
        AdamHyper {
            eta: self.lr,
            beta1: self.betas.0,
            beta2: self.betas.1,
            eps: self.eps,
        }
    }

    /// Learning rate for 1-based iteration `it`.
    pub fn lr_at(&self, it: u64) -> f64 {
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::Cosine => {
                let frac = (it - 1) as f64 / self.max_iters as f64;
                0.5 * self.lr * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }

    /// The config with run-local fields (seeds, output) cleared; two runs are
    /// comparable iff their fingerprints match.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        c.output = None;
        serde_json::to_string(&c).expect("config serializes")
    }
}
