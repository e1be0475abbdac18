//! Closed-form memory accounting for one fully connected layer and for lists
//! of layers. Counts are variables; megabytes assume 4-byte storage and
//! 2²⁰ bytes per MB, rounded to two decimals.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::floor_count;

/// `W ∈ R^{m×n}`: `m` outputs, `n` inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LayerShape {
    pub m: u64,
    pub n: u64,
}

impl LayerShape {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("layer {m}x{n} has a zero dimension")));
        }
        Ok(Self { m, n })
    }

    fn mn(&self) -> u64 {
        self.m * self.n
    }
}

impl FromStr for LayerShape {
    type Err = Error;

    /// Accepts `MxN` or `M,N`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(['x', 'X', ','])
            .ok_or_else(|| Error::invalid(format!("layer {s:?} is not of the form MxN")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| Error::invalid(format!("bad layer dimension {v:?} in {s:?}")))
        };
        LayerShape::new(parse(a)?, parse(b)?)
    }
}

/// Parses a CSV of `m,n` rows. Blank lines, `#` comments and a leading
/// `m,n` header are skipped.
pub fn parse_layers_csv(text: &str) -> Result<Vec<LayerShape>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if out.is_empty() && line.replace(' ', "").eq_ignore_ascii_case("m,n") {
            continue;
        }
        out.push(
            line.parse()
                .map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?,
        );
    }
    if out.is_empty() {
        return Err(Error::invalid("layer list is empty"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum MethodSpec {
    So { kappa: f64 },
    Adam,
    Lora { rank: u64 },
    Pissa { rank: u64 },
    Dora { rank: u64 },
    Relora { rank: u64 },
    Vera { rank: u64 },
    Galore { rank: u64 },
}

impl MethodSpec {
    /// Builds a spec from a method name and whichever parameter it needs.
    pub fn parse(method: &str, kappa: Option<f64>, rank: Option<u64>) -> Result<Self> {
        let need_rank = || rank.ok_or_else(|| Error::invalid(format!("{method} needs a rank")));
        let spec = match method.to_ascii_lowercase().as_str() {
            "so" => MethodSpec::So {
                kappa: kappa.ok_or_else(|| Error::invalid("so needs kappa"))?,
            },
            "adam" => MethodSpec::Adam,
            "lora" => MethodSpec::Lora { rank: need_rank()? },
            "pissa" => MethodSpec::Pissa { rank: need_rank()? },
            "dora" => MethodSpec::Dora { rank: need_rank()? },
            "relora" => MethodSpec::Relora { rank: need_rank()? },
            "vera" => MethodSpec::Vera { rank: need_rank()? },
            "galore" => MethodSpec::Galore { rank: need_rank()? },
            other => return Err(Error::invalid(format!("unknown method {other:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            MethodSpec::So { kappa } if !(kappa > 0.0 && kappa <= 1.0) => {
                Err(Error::invalid(format!("kappa must be in (0, 1], got {kappa}")))
            }
            _ if self.rank() == Some(0) => Err(Error::invalid("rank must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn rank(&self) -> Option<u64> {
        match *self {
            MethodSpec::Lora { rank }
            | MethodSpec::Pissa { rank }
            | MethodSpec::Dora { rank }
            | MethodSpec::Relora { rank }
            | MethodSpec::Vera { rank }
            | MethodSpec::Galore { rank } => Some(rank),
            _ => None,
        }
    }

    /// Row label in the style `SO (κ=1%)`, `LoRA (r=2)`.
    pub fn label(&self) -> String {
        let name = match self {
            MethodSpec::So { .. } => "SO",
            MethodSpec::Adam => "Adam",
            MethodSpec::Lora { .. } => "LoRA",
            MethodSpec::Pissa { .. } => "PiSSA",
            MethodSpec::Dora { .. } => "DoRA",
            MethodSpec::Relora { .. } => "ReLoRA",
            MethodSpec::Vera { .. } => "VeRA",
            MethodSpec::Galore { .. } => "GaLore",
        };
        match (self, self.rank()) {
            (MethodSpec::So { kappa }, _) => format!("{name} (κ={}%)", trim_float(kappa * 100.0)),
            (_, Some(r)) => format!("{name} (r={r})"),
            _ => name.to_string(),
        }
    }
}

fn trim_float(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MemoryRow {
    pub weight_vars: u64,
    pub grad_vars: u64,
    pub state_vars: u64,
    pub trainable_vars: u64,
    pub weight_mb: f64,
    pub grad_mb: f64,
    pub state_mb: f64,
    pub total_mb: f64,
}

/// `vars · 4 / 2²⁰` rounded to two decimals, ties to even on the exact
/// binary value (so 32768 vars, exactly 0.125 MB, prints as 0.12).
pub fn megabytes(vars: u64) -> f64 {
    let mb = vars as f64 * 4.0 / (1u64 << 20) as f64;
    format!("{mb:.2}").parse().expect("formatted float parses")
}

impl MemoryRow {
    pub fn from_counts(weight: u64, grad: u64, state: u64, trainable: u64) -> Self {
        Self {
            weight_vars: weight,
            grad_vars: grad,
            state_vars: state,
            trainable_vars: trainable,
            weight_mb: megabytes(weight),
            grad_mb: megabytes(grad),
            state_mb: megabytes(state),
            total_mb: megabytes(weight + grad + state),
        }
    }

    pub fn total_vars(&self) -> u64 {
        self.weight_vars + self.grad_vars + self.state_vars
    }
}

/// Counts for SO over `mn` weight entries. Each count is floored after the
/// multiplication, so e.g. the gradient is `⌊2·mn·κ⌋`, not `2·⌊mn·κ⌋`.
fn so_counts(mn: u64, kappa: f64) -> (u64, u64, u64, u64) {
    let scaled = |c: f64| floor_count(c * mn as f64 * kappa) as u64;
    (mn, scaled(2.0), scaled(3.0), scaled(1.0))
}

pub fn budget(layer: LayerShape, spec: MethodSpec) -> Result<MemoryRow> {
    spec.validate()?;
    let LayerShape { m, n } = LayerShape::new(layer.m, layer.n)?;
    let mn = m * n;
    if let Some(r) = spec.rank() {
        if r >= m.min(n) {
            return Err(Error::invalid(format!(
                "rank {r} must be below min(m, n) = {} for a {m}x{n} layer",
                m.min(n)
            )));
        }
    }
    let (w, g, s, t) = match spec {
        MethodSpec::So { kappa } => so_counts(mn, kappa),
        MethodSpec::Adam => (mn, mn, 2 * mn, mn),
        MethodSpec::Lora { rank: r } | MethodSpec::Pissa { rank: r } | MethodSpec::Relora { rank: r } => {
            let a = m * r + n * r;
            (mn + a, a, 2 * a, a)
        }
        MethodSpec::Dora { rank: r } => {
            let a = m * r + n * r;
            (mn + a + m, a + m, 2 * a + 2 * m, a + m)
        }
        MethodSpec::Vera { rank: r } => (mn + m * r + n * r + m + r, m + r, 2 * m + 2 * r, m + r),
        MethodSpec::Galore { rank: r } => (mn, mn, m * r + 2 * n * r, mn),
    };
    Ok(MemoryRow::from_counts(w, g, s, t))
}

/// Aggregate over a list of layers.
///
/// Every formula except SO's is linear in the layer counts, so those rows are
/// plain sums. SO is floored once on the summed weight count; flooring per
/// layer and summing would drift from the closed form by up to one variable
/// per layer.
pub fn budget_model(layers: &[LayerShape], spec: MethodSpec) -> Result<MemoryRow> {
    if layers.is_empty() {
        return Err(Error::invalid("layer list is empty"));
    }
    if let MethodSpec::So { kappa } = spec {
        spec.validate()?;
        for l in layers {
            LayerShape::new(l.m, l.n)?;
        }
        let mn: u64 = layers.iter().map(LayerShape::mn).sum();
        let (w, g, s, t) = so_counts(mn, kappa);
        return Ok(MemoryRow::from_counts(w, g, s, t));
    }
    let mut acc = (0, 0, 0, 0);
    for &l in layers {
        let r = budget(l, spec)?;
        acc.0 += r.weight_vars;
        acc.1 += r.grad_vars;
        acc.2 += r.state_vars;
        acc.3 += r.trainable_vars;
    }
    Ok(MemoryRow::from_counts(acc.0, acc.1, acc.2, acc.3))
}

/// The two weight matrices of the 784-128-10 MLP.
pub fn mlp_layers() -> Vec<LayerShape> {
    vec![LayerShape { m: 128, n: 784 }, LayerShape { m: 128, n: 128 }]
}

/// Every linear layer in the transformer blocks of a CLIP ViT-B/16: 12
/// vision blocks at width 768 and 12 text blocks at width 512, each with
/// four square attention projections and a 4× MLP.
pub fn clip_layers() -> Vec<LayerShape> {
    let mut out = Vec::new();
    for (blocks, d) in [(12u64, 768u64), (12, 512)] {
        for _ in 0..blocks {
            for _ in 0..4 {
                out.push(LayerShape { m: d, n: d });
            }
            out.push(LayerShape { m: d, n: 4 * d });
            out.push(LayerShape { m: 4 * d, n: d });
        }
    }
    out
}

pub fn to_csv(rows: &[(String, MemoryRow)]) -> String {
    let mut out = String::from(
        "method,weight_vars,weight_mb,grad_vars,grad_mb,state_vars,state_mb,trainable_vars,total_mb\n",
    );
    for (label, r) in rows {
        let label = if label.contains([',', '"']) {
            format!("\"{}\"", label.replace('"', "\"\""))
        } else {
            label.clone()
        };
        writeln!(
            out,
            "{label},{},{:.2},{},{:.2},{},{:.2},{},{:.2}",
            r.weight_vars, r.weight_mb, r.grad_vars, r.grad_mb, r.state_vars, r.state_mb, r.trainable_vars, r.total_mb
        )
        .unwrap();
    }
    out
}

/// Markdown table with the columns of the published memory tables.
pub fn to_markdown(rows: &[(String, MemoryRow)]) -> String {
    let header = [
        "Method",
        "Weight (#Vars, MB)",
        "Gradient (#Vars, MB)",
        "Opt. States (#Vars, MB)",
        "#Trainable",
        "Total Mem. (MB)",
    ];
    let body: Vec<[String; 6]> = rows
        .iter()
        .map(|(label, r)| {
            [
                label.clone(),
                format!("{} ({:.2}MB)", r.weight_vars, r.weight_mb),
                format!("{} ({:.2}MB)", r.grad_vars, r.grad_mb),
                format!("{} ({:.2}MB)", r.state_vars, r.state_mb),
                r.trainable_vars.to_string(),
                format!("{:.2}MB", r.total_mb),
            ]
        })
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&format!(
        "|{}|\n",
        widths.iter().map(|&w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
    ));
    for row in &body {
        out.push_str(&line(row));
    }
    out
}
