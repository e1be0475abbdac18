use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method, Mode, FULL_DATA_BATCH};
use super::metrics::{self, MetricsRow, RunMeta, RunStatus, SummaryRow};
use super::rank::track_rank;
use crate::data::{epoch_order, load_dir, sample_few_shot, Dataset};
use crate::error::{Error, Result};
use crate::lowrank::{GaloreMlp, LoraMlp};
use crate::math::{IndexSet, Rng};
use crate::model::{accuracy, init_model, BatchGrad, Mlp, TensorId};
use crate::optim::{adam_step, so_step, update_touch_count, AdamState, SoState, StepReport};

// Sub-stream ids; each run derives independent generators from its seed.
const STREAM_INIT: u64 = 1;
const STREAM_FEW_SHOT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_OPTIM: u64 = 4;

fn derive(seed: u64, stream: u64) -> u64 {
    Rng::stream(seed, stream).next_u64()
}

/// Datasets (and the pretrained model, in adapt mode) shared read-only by
/// all seeds of an experiment.
#[derive(Clone, Debug)]
pub struct ExperimentData {
    pub train: Dataset,
    pub test: Dataset,
    pub base: Option<Mlp>,
}

impl ExperimentData {
    /// Loads everything the config refers to, so that data and checkpoint
    /// problems surface before any training starts.
    pub fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let (train, test) = load_dir(&cfg.dataset)?;
        let base = match &cfg.mode {
            Mode::Adapt { checkpoint, .. } => Some(Mlp::load_checkpoint(checkpoint)?),
            _ => None,
        };
        let data = Self { train, test, base };
        data.check(cfg)?;
        Ok(data)
    }

    pub fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::Config("train and test splits must be nonempty".into()));
        }
        if self.train.feature_dim() != self.test.feature_dim() {
            return Err(Error::shape(
                "dataset",
                format!("train has {} features, test {}", self.train.feature_dim(), self.test.feature_dim()),
            ));
        }
        if let Some(base) = &self.base {
            if base.input_dim() != self.train.feature_dim() {
                return Err(Error::shape(
                    "checkpoint",
                    format!("model takes {} inputs, dataset has {}", base.input_dim(), self.train.feature_dim()),
                ));
            }
        }
        if let Some(k) = cfg.shots() {
            // fails early with the offending class
            sample_few_shot(&self.train, k, 0)?;
        }
        Ok(())
    }
}

/// What an observer sees after each optimizer step.
pub struct StepEvent<'a> {
    pub iteration: u64,
    pub grads: &'a BatchGrad,
    pub before: &'a Mlp,
    pub after: &'a Mlp,
    pub so: Option<(&'a SoState, &'a StepReport)>,
}

pub type Observer<'o> = &'o mut dyn FnMut(&StepEvent<'_>);

#[derive(Clone, Debug)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub final_accuracy: Option<f64>,
    pub iterations: u64,
    pub model: Mlp,
}

impl SeedRun {
    pub fn meta(&self, cfg: &ExperimentConfig) -> RunMeta {
        RunMeta {
            label: cfg.name.clone(),
            config: cfg.fingerprint(),
            seed: self.seed,
            status: self.status.clone(),
            error: self.error.clone(),
            final_accuracy: self.final_accuracy,
            iterations: self.iterations,
        }
    }

    pub fn csv(&self) -> String {
        metrics::rows_to_csv(&self.rows)
    }
}

enum Trainer {
    So(SoState),
    Adam(AdamState),
    Lora(LoraMlp),
    Relora(LoraMlp),
    Galore(GaloreMlp),
}

impl Trainer {
    fn new(cfg: &ExperimentConfig, model: &Mlp, seed: u64) -> Result<Self> {
        let o = &cfg.optimizer;
        let opt_seed = derive(seed, STREAM_OPTIM);
        Ok(match o.method {
            Method::So => Trainer::So(SoState::for_mlp(model, o.kappa, opt_seed)?),
            Method::Adam => Trainer::Adam(AdamState::for_mlp(model)),
            Method::Lora => Trainer::Lora(LoraMlp::new(model, o.rank, opt_seed)?),
            Method::Relora => Trainer::Relora(LoraMlp::new(model, o.rank, opt_seed)?),
            Method::Galore => Trainer::Galore(GaloreMlp::new(model, o.rank, o.interval)?),
        })
    }

    /// Applies one update and returns the number of parameter entries written.
    fn step(
        &mut self,
        cfg: &ExperimentConfig,
        eta: f64,
        iteration: u64,
        grads: &BatchGrad,
        model: &mut Mlp,
    ) -> Result<(usize, Option<StepReport>)> {
        let mut adam = cfg.adam_hyper();
        adam.eta = eta;
        match self {
            Trainer::So(state) => {
                let mut hyper = cfg.so_hyper();
                hyper.eta = eta;
                let report = so_step(state, &hyper, grads, model)?;
                Ok((update_touch_count(state), Some(report)))
            }
            Trainer::Adam(state) => {
                adam_step(state, &adam, grads, model)?;
                Ok((model.param_count(), None))
            }
            Trainer::Lora(l) => {
                l.step(&adam, grads, model)?;
                Ok((l.trainable_count(), None))
            }
            Trainer::Relora(l) => {
                l.step(&adam, grads, model)?;
                if iteration % cfg.optimizer.interval == 0 {
                    l.merge(model);
                }
                Ok((l.trainable_count(), None))
            }
            Trainer::Galore(g) => {
                g.step(&adam, grads, model)?;
                Ok((model.param_count(), None))
            }
        }
    }

    /// Gradient mask used by the latest step; `None` is dense.
    fn mask(&self, tensor: TensorId) -> Option<&IndexSet> {
        match self {
            Trainer::So(state) => Some(state.support(tensor.index())),
            _ => None,
        }
    }
}

/// Cycles through seeded epochs, yielding index batches.
struct BatchSource {
    pool: Vec<usize>,
    batch: usize,
    seed: u64,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSource {
    fn new(pool: Vec<usize>, batch: usize, seed: u64) -> Self {
        Self {
            pool,
            batch,
            seed,
            epoch: 0,
            order: Vec::new(),
            pos: 0,
        }
    }

    fn next(&mut self) -> &[usize] {
        if self.pos >= self.order.len() {
            self.order = epoch_order(&self.pool, self.seed, self.epoch);
            self.epoch += 1;
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let start = self.pos;
        self.pos = end;
        &self.order[start..end]
    }
}

/// Initial model for a seed: fresh, or the pretrained base with a new head
/// when the class count differs.
fn initial_model(data: &ExperimentData, seed: u64) -> Result<Mlp> {
    let mut rng = Rng::stream(seed, STREAM_INIT);
    let classes = data.train.class_count();
    match &data.base {
        None => {
            if data.train.feature_dim() == crate::model::INPUT_DIM {
                init_model(&mut rng, classes)
            } else {
                Ok(Mlp::init(&mut rng, data.train.feature_dim(), crate::model::HIDDEN_DIM, classes))
            }
        }
        Some(base) => {
            let mut model = base.clone();
            if base.class_count() != classes {
                let fresh = Mlp::init(&mut rng, base.input_dim(), base.hidden_dim(), classes);
                model.w2 = fresh.w2;
                model.b2 = fresh.b2;
            }
            Ok(model)
        }
    }
}

/// Trains one seed. Setup problems are returned as errors; numerical
/// trouble during training ends the run with a failed status instead.
pub fn run_seed(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    seed: u64,
    mut observer: Option<Observer<'_>>,
) -> Result<SeedRun> {
    cfg.validate()?;
    let mut model = initial_model(data, seed)?;
    let pool: Vec<usize> = match cfg.shots() {
        Some(k) => sample_few_shot(&data.train, k, derive(seed, STREAM_FEW_SHOT))?.support_indices,
        None => (0..data.train.len()).collect(),
    };
    let batch = cfg.batch_size.unwrap_or(match cfg.shots() {
        Some(_) => pool.len(),
        None => FULL_DATA_BATCH,
    });
    let mut batches = BatchSource::new(pool, batch, derive(seed, STREAM_SHUFFLE));
    let mut trainer = Trainer::new(cfg, &model, seed)?;
    let test_x = data.test.images();
    let test_y = data.test.labels();

    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut failure = None;
    let mut final_accuracy = None;
    for it in 1..=cfg.max_iters {
        let (x, y) = data.train.gather(batches.next());
        let grads = model.backward(&x, &y)?;
        let loss = grads.loss;
        if !loss.is_finite() {
            failure = Some(format!("training loss became {loss} at iteration {it}"));
            break;
        }
        let mut row = MetricsRow {
            iteration: it,
            train_loss: loss,
            test_accuracy: None,
            touched_params: 0,
            rank_w1: None,
            rank_w2: None,
        };
        if loss < cfg.tau {
            let acc = accuracy(&model, test_x, test_y)?;
            row.test_accuracy = Some(acc);
            final_accuracy = Some(acc);
            rows.push(row);
            break;
        }

        let before = observer.as_ref().map(|_| model.clone());
        let (touched, report) = match trainer.step(cfg, cfg.lr_at(it), it, &grads, &mut model) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(format!("iteration {it}: {e}"));
                break;
            }
        };
        row.touched_params = touched;
        if cfg.track_rank && it % cfg.rank_every == 0 {
            row.rank_w1 = Some(track_rank(&grads.w1, trainer.mask(TensorId::W1))?);
            row.rank_w2 = Some(track_rank(&grads.w2, trainer.mask(TensorId::W2))?);
        }
        if let (Some(obs), Some(before)) = (observer.as_mut(), before.as_ref()) {
            let so = match (&trainer, report.as_ref()) {
                (Trainer::So(state), Some(r)) => Some((state, r)),
                _ => None,
            };
            obs(&StepEvent {
                iteration: it,
                grads: &grads,
                before,
                after: &model,
                so,
            });
        }
        if !model.is_finite() {
            failure = Some(format!("parameters became non-finite at iteration {it}"));
            rows.push(row);
            break;
        }
        let last = it == cfg.max_iters;
        if last || (cfg.eval_every > 0 && it % cfg.eval_every == 0) {
            let acc = accuracy(&model, test_x, test_y)?;
            row.test_accuracy = Some(acc);
            if last {
                final_accuracy = Some(acc);
            }
        }
        rows.push(row);
    }

    let iterations = rows.last().map_or(0, |r| r.iteration);
    let (status, error) = match failure {
        Some(msg) => {
            final_accuracy = None;
            (RunStatus::Failed, Some(msg))
        }
        None => (RunStatus::Ok, None),
    };
    Ok(SeedRun {
        seed,
        rows,
        status,
        error,
        final_accuracy,
        iterations,
        model,
    })
}

/// Result of [`run_experiment`].
#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub out_dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<SummaryRow>,
}

/// Runs every seed (in parallel), writes `seed_<s>.csv` / `.meta.json` per
/// seed and `summary.csv` / `summary.md` over the output directory.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, seed_offset: u64) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let data = ExperimentData::load(cfg)?;
    run_experiment_with(cfg, &data, out_dir, seed_offset)
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    data: &ExperimentData,
    out_dir: &Path,
    seed_offset: u64,
) -> Result<ExperimentOutcome> {
    data.check(cfg)?;
    let seeds: Vec<u64> = cfg.seeds.iter().map(|s| s + seed_offset).collect();
    let runs: Vec<SeedRun> = seeds
        .par_iter()
        .map(|&s| run_seed(cfg, data, s, None))
        .collect::<Result<_>>()?;
    for run in &runs {
        metrics::write_run(out_dir, &run.rows, &run.meta(cfg))?;
    }
    let summary = metrics::aggregate(out_dir)?;
    write_summary(out_dir, &summary)?;
    Ok(ExperimentOutcome {
        out_dir: out_dir.to_path_buf(),
        runs,
        summary,
    })
}

pub fn write_summary(dir: &Path, summary: &[SummaryRow]) -> Result<()> {
    for (name, text) in [
        ("summary.csv", metrics::summary_csv(summary)),
        ("summary.md", metrics::summary_markdown(summary)),
    ] {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two separable classes on 4×4 images: class 0 bright on the left half,
    /// class 1 on the right, with seeded noise.
    pub(crate) fn toy_data(n: usize, seed: u64) -> ExperimentData {
        let mut rng = Rng::seed_from(seed);
        let mut split = |n: usize| {
            let mut pixels = Vec::with_capacity(n * 16);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let y = i % 2;
                for p in 0..16 {
                    let bright = (p % 4 < 2) == (y == 0);
                    let base = if bright { 180.0 } else { 30.0 };
                    pixels.push((base + 60.0 * rng.next_uniform()) as u8);
                }
                labels.push(y);
            }
            Dataset::from_bytes(&pixels, 4, 4, labels, Some(2)).unwrap()
        };
        let train = split(n);
        let test = split(n / 2);
        ExperimentData { train, test, base: None }
    }

    fn cfg(extra: &str) -> ExperimentConfig {
        let mut v = serde_json::json!({"name": "toy", "dataset": "unused", "max_iters": 40, "seeds": [1, 2]});
        let extra: serde_json::Value = serde_json::from_str(&format!("{{{}}}", extra.trim_start_matches(','))).unwrap();
        for (k, x) in extra.as_object().unwrap() {
            v[k] = x.clone();
        }
        ExperimentConfig::from_json(&v.to_string()).unwrap()
    }

    #[test]
    fn huge_tau_stops_before_the_first_step() {
        let data = toy_data(20, 1);
        let c = cfg(r#", "tau": 1e9"#);
        let run = run_seed(&c, &data, 3, None).unwrap();
        assert_eq!(run.rows.len(), 1);
        assert_eq!(run.iterations, 1);
        assert_eq!(run.rows[0].touched_params, 0);
        assert!(run.rows[0].test_accuracy.is_some());
        let untouched = initial_model(&data, 3).unwrap();
        assert_eq!(run.model.flatten(), untouched.flatten());
    }

    #[test]
    fn every_method_learns_the_toy_task() {
        let data = toy_data(40, 2);
        for method in ["so", "adam", "lora", "relora", "galore"] {
            let c = cfg(&format!(
                r#", "lr": 1e-2, "max_iters": 60, "optimizer": {{"method": "{method}", "kappa": 0.2, "interval": 10}}"#
            ));
            let run = run_seed(&c, &data, 4, None).unwrap();
            assert_eq!(run.status, RunStatus::Ok, "{method}");
            assert!(run.final_accuracy.unwrap() > 90.0, "{method}: {:?}", run.final_accuracy);
            let first = run.rows.first().unwrap().train_loss;
            let last = run.rows.last().unwrap().train_loss;
            assert!(last < first, "{method}: {first} -> {last}");
        }
    }

    #[test]
    fn rows_are_strictly_increasing_and_evaluated_on_cadence() {
        let data = toy_data(20, 3);
        let c = cfg(r#", "max_iters": 25, "eval_every": 10, "track_rank": true, "rank_every": 5"#);
        let run = run_seed(&c, &data, 0, None).unwrap();
        assert_eq!(run.rows.len(), 25);
        for (i, r) in run.rows.iter().enumerate() {
            assert_eq!(r.iteration, i as u64 + 1);
            assert_eq!(r.test_accuracy.is_some(), matches!(r.iteration, 10 | 20 | 25));
            assert_eq!(r.rank_w1.is_some(), r.iteration % 5 == 0);
            assert!(r.touched_params > 0);
        }
    }

    #[test]
    fn same_seed_same_csv_different_seed_different_csv() {
        let data = toy_data(30, 4);
        let c = cfg(r#", "batch_size": 8, "optimizer": {"grad_mode": "importance", "moment_mode": "random_m"}"#);
        let a = run_seed(&c, &data, 9, None).unwrap().csv();
        let b = run_seed(&c, &data, 9, None).unwrap().csv();
        let other = run_seed(&c, &data, 10, None).unwrap().csv();
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn divergence_is_recorded_as_failure() {
        let data = toy_data(20, 5);
        let c = cfg(r#", "lr": 1e300, "optimizer": {"method": "adam"}"#);
        let run = run_seed(&c, &data, 0, None).unwrap();
        assert_eq!(run.status, RunStatus::Failed);
        assert!(run.error.is_some());
        assert_eq!(run.final_accuracy, None);
    }

    #[test]
    fn observer_sees_so_state() {
        let data = toy_data(20, 6);
        let c = cfg(r#", "max_iters": 5, "optimizer": {"moment_mode": "importance_top_m", "grad_mode": "random"}"#);
        let mut seen = Vec::new();
        let mut obs = |ev: &StepEvent<'_>| {
            let (state, report) = ev.so.unwrap();
            seen.push((ev.iteration, report.t, state.mu(0).len() <= state.m_per_tensor()[0]));
        };
        run_seed(&c, &data, 0, Some(&mut obs)).unwrap();
        assert_eq!(seen, (1..=5).map(|i| (i, i, true)).collect::<Vec<_>>());
    }

    #[test]
    fn few_shot_uses_full_support_batch() {
        let data = toy_data(40, 7);
        let c = cfg(r#", "mode": {"type": "few_shot", "shots": 3}, "max_iters": 3"#);
        let run = run_seed(&c, &data, 0, None).unwrap();
        assert_eq!(run.rows.len(), 3);
        let too_many = cfg(r#", "mode": {"type": "few_shot", "shots": 50}"#);
        assert!(matches!(
            data.check(&too_many),
            Err(Error::InsufficientData { class: 0, .. })
        ));
    }

    #[test]
    fn experiment_writes_files_and_summary() {
        let data = toy_data(20, 8);
        let c = cfg(r#", "max_iters": 10"#);
        let dir = tempfile::tempdir().unwrap();
        let out = run_experiment_with(&c, &data, dir.path(), 100).unwrap();
        assert_eq!(out.runs.len(), 2);
        for s in [101, 102] {
            assert!(metrics::csv_path(dir.path(), s).exists());
        }
        assert_eq!(out.summary[0].n, 2);
        let md = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
        assert!(md.contains("| toy |"));
    }

    #[test]
    fn adapt_replaces_head_when_classes_differ() {
        let mut data = toy_data(20, 9);
        let mut rng = Rng::seed_from(0);
        let base = Mlp::init(&mut rng, 16, 8, 5);
        data.base = Some(base.clone());
        let m = initial_model(&data, 1).unwrap();
        assert_eq!(m.w1, base.w1);
        assert_eq!(m.class_count(), 2);
    }
}
