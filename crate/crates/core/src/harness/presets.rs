//! Named starting configurations. Each still needs a dataset path.

use std::path::Path;

use super::config::{ExperimentConfig, Mode, Schedule};
use crate::optim::GradMode;

pub const PRESET_NAMES: [&str; 4] = ["mlp", "clip", "rank-random", "rank-importance"];

/// Two-layer MLP defaults: SO at κ=1%, T=30, constant lr 1e-3.
pub fn mlp_default(dataset: &Path) -> ExperimentConfig {
    ExperimentConfig {
        name: "so-k1".into(),
        dataset: dataset.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

/// Large-model fine-tuning settings, kept for sensitivity sweeps on the MLP.
pub fn clip_profile(dataset: &Path) -> ExperimentConfig {
    let mut cfg = mlp_default(dataset);
    cfg.name = "so-clip-profile".into();
    cfg.lr = 2e-4;
    cfg.schedule = Schedule::Cosine;
    cfg.batch_size = Some(32);
    cfg.optimizer.interval = 10;
    cfg.optimizer.kappa = 0.0005;
    cfg.tau = 0.01;
    cfg.max_iters = 2000;
    cfg
}

/// 16-shot run with per-layer rank tracking of the masked gradient.
pub fn rank_evolution(dataset: &Path, grad_mode: GradMode) -> ExperimentConfig {
    let mut cfg = mlp_default(dataset);
    cfg.name = match grad_mode {
        GradMode::Random => "rank-random",
        GradMode::Importance => "rank-importance",
        GradMode::Dense => "rank-dense",
    }
    .into();
    cfg.mode = Mode::FewShot { shots: 16 };
    cfg.optimizer.kappa = 0.05;
    cfg.optimizer.grad_mode = grad_mode;
    cfg.track_rank = true;
    cfg.rank_every = 10;
    cfg
}

pub fn preset(name: &str, dataset: &Path) -> Option<ExperimentConfig> {
    Some(match name {
        "mlp" => mlp_default(dataset),
        "clip" => clip_profile(dataset),
        "rank-random" => rank_evolution(dataset, GradMode::Random),
        "rank-importance" => rank_evolution(dataset, GradMode::Importance),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let cfg = preset(name, Path::new("d")).unwrap();
            cfg.validate().unwrap();
            assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        }
        assert!(preset("nope", Path::new("d")).is_none());
    }

    #[test]
    fn clip_profile_values() {
        let c = clip_profile(Path::new("d"));
        assert_eq!((c.lr, c.batch_size, c.optimizer.interval), (2e-4, Some(32), 10));
        assert_eq!((c.optimizer.kappa, c.tau, c.max_iters), (0.0005, 0.01, 2000));
        assert_eq!(c.schedule, Schedule::Cosine);
    }
}
