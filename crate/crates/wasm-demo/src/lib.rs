//! Browser bindings for a few cheap operations of the `sparseopt` crate.
//!
//! Each export has a plain Rust twin returning `Result<String, String>` so
//! the logic can be tested natively; the `#[wasm_bindgen]` wrappers only map
//! errors to `JsError`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sparseopt::math::{numerical_rank, random_m, top_m_indices, Matrix, Rng};
use sparseopt::membudget::{budget, budget_model, mlp_layers, to_csv, to_markdown, LayerShape, MethodSpec};
use sparseopt::optim::{AdamHyper, AdamState, SoHyper, SoState};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Memory table for one `MxN` layer, or for the two-layer MLP when `layer`
/// is `"mlp"`. `kappas` are percentages and `ranks` plain integers, both
/// comma-separated; `format` is `md`, `csv` or `json`.
pub fn memory_table_impl(layer: &str, kappas: &str, ranks: &str, format: &str) -> Result<String, String> {
    let layers = match layer.trim() {
        "mlp" => mlp_layers(),
        s => vec![s.parse::<LayerShape>().map_err(err)?],
    };
    let kappas: Vec<f64> = split(kappas)
        .map(|k| k.trim_end_matches('%').parse::<f64>().map(|v| v / 100.0))
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad kappa: {e}"))?;
    let ranks: Vec<u64> = split(ranks)
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad rank: {e}"))?;

    let mut specs: Vec<MethodSpec> = kappas.iter().map(|&kappa| MethodSpec::So { kappa }).collect();
    specs.push(MethodSpec::Adam);
    for &r in &ranks {
        for m in ["lora", "galore"] {
            specs.push(MethodSpec::parse(m, None, Some(r)).map_err(err)?);
        }
    }
    let rows = specs
        .into_iter()
        .map(|spec| {
            let row = if layers.len() == 1 {
                budget(layers[0], spec)
            } else {
                budget_model(&layers, spec)
            };
            row.map(|r| (spec.label(), r)).map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    match format {
        "md" => Ok(to_markdown(&rows)),
        "csv" => Ok(to_csv(&rows)),
        "json" => {
            #[derive(Serialize)]
            struct Labeled<'a> {
                label: &'a str,
                #[serde(flatten)]
                row: &'a sparseopt::membudget::MemoryRow,
            }
            let out: Vec<_> = rows.iter().map(|(label, row)| Labeled { label, row }).collect();
            serde_json::to_string(&out).map_err(err)
        }
        other => Err(format!("unknown format {other:?}")),
    }
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

#[derive(Debug, Serialize)]
pub struct MaskRank {
    pub rows: usize,
    pub cols: usize,
    pub kept: usize,
    pub dense: usize,
    pub random: usize,
    pub importance: usize,
}

/// Synthetic batch gradient `Σ_b δ_b x_bᵀ` with heavy-tailed activations,
/// so a few rows and columns dominate the magnitudes.
fn batch_gradient(rows: usize, cols: usize, batch: usize, rng: &mut Rng) -> Matrix {
    let mut g = Matrix::zeros(rows, cols);
    for _ in 0..batch {
        let delta: Vec<f64> = (0..rows).map(|_| rng.normal()).collect();
        let x: Vec<f64> = (0..cols).map(|_| rng.normal().powi(3)).collect();
        for (i, d) in delta.iter().enumerate() {
            for (v, xj) in g.row_mut(i).iter_mut().zip(&x) {
                *v += d * xj;
            }
        }
    }
    g
}

fn masked(g: &Matrix, keep: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(g.rows(), g.cols());
    for &i in keep {
        out.as_mut_slice()[i] = g.as_slice()[i];
    }
    out
}

/// Numerical rank of a batch gradient before and after keeping a `kappa`
/// fraction of its entries, chosen at random or by magnitude.
pub fn mask_rank_impl(rows: usize, cols: usize, batch: usize, kappa: f64, seed: u64) -> Result<MaskRank, String> {
    if rows == 0 || cols == 0 || rows * cols > 256 * 256 {
        return Err(format!("matrix {rows}x{cols} must be nonempty and at most 256x256"));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(format!("kappa must be in (0, 1], got {kappa}"));
    }
    let mut rng = Rng::seed_from(seed);
    let g = batch_gradient(rows, cols, batch.max(1), &mut rng);
    let d = rows * cols;
    let kept = ((kappa * d as f64).floor() as usize).clamp(1, d);
    let rand_idx = random_m(&mut rng, d, kept).map_err(err)?;
    let top_idx = top_m_indices(g.as_slice(), kept).map_err(err)?;
    let rank = |m: &Matrix| numerical_rank(m, None).map_err(err);
    Ok(MaskRank {
        rows,
        cols,
        kept,
        dense: rank(&g)?,
        random: rank(&masked(&g, rand_idx.as_slice()))?,
        importance: rank(&masked(&g, top_idx.as_slice()))?,
    })
}

#[derive(Debug, Serialize)]
pub struct Trajectory {
    pub so: Vec<f64>,
    pub adam: Vec<f64>,
}

/// Loss curves of the sparse optimizer and dense Adam on the ill-conditioned
/// quadratic `½ Σ aᵢ (xᵢ − cᵢ)²`, with curvatures `aᵢ` spread over two
/// decades. Both start from zero; the loss is recorded before every step.
pub fn toy_trajectory_impl(
    dim: usize,
    kappa: f64,
    interval: u64,
    lr: f64,
    steps: usize,
    seed: u64,
) -> Result<Trajectory, String> {
    if dim == 0 || dim > 100_000 || steps > 100_000 {
        return Err("dim must be in 1..=100000 and steps at most 100000".into());
    }
    let mut rng = Rng::seed_from(seed);
    let span = (dim - 1).max(1) as f64;
    let a: Vec<f64> = (0..dim).map(|i| 10f64.powf(2.0 * i as f64 / span - 1.0)).collect();
    let c: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let loss = |x: &[f64]| 0.5 * x.iter().zip(&a).zip(&c).map(|((x, a), c)| a * (x - c).powi(2)).sum::<f64>();
    let grad = |x: &[f64]| -> Vec<f64> { x.iter().zip(&a).zip(&c).map(|((x, a), c)| a * (x - c)).collect() };

    let so_hyper = SoHyper {
        eta: lr,
        kappa,
        interval,
        ..SoHyper::default()
    };
    let adam_hyper = AdamHyper::from(&so_hyper);
    let mut so = SoState::new(&[dim], kappa, seed).map_err(err)?;
    let mut adam = AdamState::new(&[dim]);
    let mut xs = vec![0.0; dim];
    let mut xa = vec![0.0; dim];
    let mut out = Trajectory {
        so: Vec::with_capacity(steps + 1),
        adam: Vec::with_capacity(steps + 1),
    };
    for _ in 0..steps {
        out.so.push(loss(&xs));
        out.adam.push(loss(&xa));
        let g = grad(&xs);
        so.step(&so_hyper, &[&g], &mut [&mut xs]).map_err(err)?;
        let g = grad(&xa);
        adam.step(&adam_hyper, &[&g], &mut [&mut xa]).map_err(err)?;
    }
    out.so.push(loss(&xs));
    out.adam.push(loss(&xa));
    Ok(out)
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(err))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn memory_table(layer: &str, kappas: &str, ranks: &str, format: &str) -> Result<String, JsError> {
    memory_table_impl(layer, kappas, ranks, format).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn mask_rank(rows: usize, cols: usize, batch: usize, kappa: f64, seed: u32) -> Result<String, JsError> {
    js(mask_rank_impl(rows, cols, batch, kappa, seed.into()))
}

#[wasm_bindgen]
pub fn toy_trajectory(
    dim: usize,
    kappa: f64,
    interval: u32,
    lr: f64,
    steps: usize,
    seed: u32,
) -> Result<String, JsError> {
    js(toy_trajectory_impl(dim, kappa, interval.into(), lr, steps, seed.into()))
}
