use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sparseopt::data::load_dir;
use sparseopt::harness::{
    self, presets, pretrain, pretrain_config, save_pretrained, write_summary, ExperimentConfig, ExperimentData,
};
use sparseopt::membudget::{
    budget, budget_model, clip_layers, mlp_layers, parse_layers_csv, to_csv, to_markdown, LayerShape, MemoryRow,
    MethodSpec,
};

#[derive(Parser)]
#[command(name = "sparseopt", version, about = "Sparse optimizer experiments on small MLPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write metrics.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Added to every seed in the config.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Output directory; defaults to the config's `output`, then `runs/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize the per-seed metadata files in a directory.
    Aggregate { dir: PathBuf },
    /// Closed-form memory accounting for a layer or model.
    Membudget(MembudgetArgs),
    /// Train a dense Adam model on a dataset and save it as a checkpoint.
    Pretrain {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3000)]
        max_iters: u64,
    },
    /// Print a named config as JSON.
    Preset {
        #[arg(value_parser = presets::PRESET_NAMES)]
        name: String,
        #[arg(long)]
        dataset: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayerPreset {
    Mlp,
    Clip,
}

#[derive(Args)]
struct MembudgetArgs {
    /// CSV file of `m,n` rows.
    #[arg(long, conflicts_with_all = ["layer", "preset"])]
    layers: Option<PathBuf>,
    /// A single `MxN` layer; repeat for several.
    #[arg(long)]
    layer: Vec<LayerShape>,
    #[arg(long, value_enum, conflicts_with = "layer")]
    preset: Option<LayerPreset>,
    /// Comma-separated methods: so, adam, lora, pissa, dora, relora, vera, galore.
    #[arg(long, value_delimiter = ',', required = true)]
    method: Vec<String>,
    /// Comma-separated densities for SO, as fractions (0.01) or percentages (1%).
    #[arg(long, value_delimiter = ',', value_parser = parse_kappa)]
    kappa: Vec<f64>,
    /// Comma-separated ranks for the low-rank methods.
    #[arg(long, value_delimiter = ',')]
    rank: Vec<u64>,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
}

fn parse_kappa(s: &str) -> Result<f64, String> {
    let (num, scale) = match s.strip_suffix('%') {
        Some(p) => (p, 0.01),
        None => (s, 1.0),
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * scale)
        .map_err(|e| format!("bad kappa {s:?}: {e}"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config, seed_offset, out } => train(&config, seed_offset, out),
        Command::Aggregate { dir } => {
            let rows = harness::aggregate(&dir)?;
            write_summary(&dir, &rows)?;
            print!("{}", harness::metrics::summary_markdown(&rows));
            Ok(())
        }
        Command::Membudget(args) => membudget(&args),
        Command::Pretrain { dataset, ckpt, seed, max_iters } => {
            let cfg = pretrain_config(&dataset, seed, max_iters);
            let (train, test) = load_dir(&dataset)?;
            let data = ExperimentData { train, test, base: None };
            let (model, meta) = pretrain(&cfg, &data)?;
            save_pretrained(&ckpt, &model, &meta)?;
            eprintln!(
                "saved {} after {} iterations (test accuracy {:.2})",
                ckpt.display(),
                meta.iterations,
                meta.test_accuracy.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Preset { name, dataset } => {
            let cfg = presets::preset(&name, &dataset).context("unknown preset")?;
            println!("{}", cfg.to_json());
            Ok(())
        }
    }
}

fn train(config: &Path, seed_offset: u64, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_file(config).with_context(|| format!("reading {}", config.display()))?;
    let out = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("runs").join(&cfg.name));
    let outcome = harness::run_experiment(&cfg, &out, seed_offset)?;
    for run in &outcome.runs {
        match &run.error {
            None => eprintln!(
                "seed {}: {:.2}% after {} iterations",
                run.seed,
                run.final_accuracy.unwrap_or(f64::NAN),
                run.iterations
            ),
            Some(e) => eprintln!("seed {}: failed: {e}", run.seed),
        }
    }
    print!("{}", harness::metrics::summary_markdown(&outcome.summary));
    Ok(())
}

fn membudget(args: &MembudgetArgs) -> Result<()> {
    let layers: Vec<LayerShape> = if let Some(path) = &args.layers {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_layers_csv(&text)?
    } else if let Some(p) = args.preset {
        match p {
            LayerPreset::Mlp => mlp_layers(),
            LayerPreset::Clip => clip_layers(),
        }
    } else {
        args.layer.clone()
    };
    if layers.is_empty() {
        bail!("give --layers FILE, --layer MxN or --preset");
    }

    let mut specs = Vec::new();
    for method in &args.method {
        let method = method.trim();
        match method.to_ascii_lowercase().as_str() {
            "so" => {
                if args.kappa.is_empty() {
                    bail!("so needs --kappa");
                }
                for &k in &args.kappa {
                    specs.push(MethodSpec::parse(method, Some(k), None)?);
                }
            }
            "adam" => specs.push(MethodSpec::Adam),
            _ => {
                if args.rank.is_empty() {
                    bail!("{method} needs --rank");
                }
                for &r in &args.rank {
                    specs.push(MethodSpec::parse(method, None, Some(r))?);
                }
            }
        }
    }

    let rows: Vec<(String, MemoryRow)> = specs
        .into_iter()
        .map(|spec| {
            let row = if layers.len() == 1 {
                budget(layers[0], spec)?
            } else {
                budget_model(&layers, spec)?
            };
            Ok((spec.label(), row))
        })
        .collect::<Result<_>>()?;
    match args.format {
        Format::Csv => print!("{}", to_csv(&rows)),
        Format::Md => print!("{}", to_markdown(&rows)),
    }
    Ok(())
}
