use serde::{Deserialize, Serialize};

use super::{adam_delta, bias_correction, check_finite, SparseBuffer};
use crate::error::{Error, Result};
use crate::math::{random_m, top_m_indices, IndexSet, Rng};
use crate::model::{BatchGrad, Mlp, TensorId};

/// How the gradient support is chosen on refresh steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    #[default]
    Random,
    Importance,
    Dense,
}

/// How the moment buffers are pruned on refresh steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMode {
    #[default]
    ImportanceTopM,
    RandomM,
    /// Keep the whole union of old and new indices; never pruned.
    DensePassthrough,
    /// Plain sparse SGD on the support, no moment buffers.
    NoMoments,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    #[default]
    Dynamic,
    /// Draw the support once on the first step and keep it.
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoHyper {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub kappa: f64,
    /// Steps between support refreshes.
    pub interval: u64,
    /// Early-stopping loss threshold; read by the training loop, not the step.
    pub tau: f64,
    pub grad_mode: GradMode,
    pub moment_mode: MomentMode,
    pub support_mode: SupportMode,
    /// Between refreshes, keep the magnitude-pruned moments instead of
    /// restricting them to the current support.
    pub persist_moments: bool,
}

impl Default for SoHyper {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            kappa: 0.01,
            interval: 30,
            tau: 1e-4,
            grad_mode: GradMode::Random,
            moment_mode: MomentMode::ImportanceTopM,
            support_mode: SupportMode::Dynamic,
            persist_moments: false,
        }
    }
}

impl SoHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::invalid(format!("kappa must be in (0, 1], got {}", self.kappa)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::invalid(format!("eps must be positive, got {}", self.eps)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::invalid(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.interval == 0 {
            return Err(Error::invalid("refresh interval must be at least 1"));
        }
        Ok(())
    }

    /// Retained entries for a tensor of `d` entries: `max(1, ⌊κ·d⌋)`.
    pub fn m_for(&self, d: usize) -> usize {
        m_for(self.kappa, d)
    }
}

fn m_for(kappa: f64, d: usize) -> usize {
    crate::floor_count(kappa * d as f64).clamp(1, d.max(1))
}

#[derive(Clone, Debug)]
pub(crate) struct TensorState {
    pub(crate) name: String,
    pub(crate) len: usize,
    pub(crate) m: usize,
    pub(crate) support: IndexSet,
    pub(crate) mu: SparseBuffer,
    pub(crate) nu: SparseBuffer,
    touched: Vec<usize>,
    last_union: usize,
}

impl TensorState {
    pub(crate) fn new(name: String, len: usize, m: usize) -> Self {
        Self {
            name,
            len,
            m,
            support: IndexSet::empty(len),
            mu: SparseBuffer::with_capacity(m),
            nu: SparseBuffer::with_capacity(m),
            touched: Vec::new(),
            last_union: 0,
        }
    }
}

/// What happened during one step, for instrumentation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepReport {
    pub t: u64,
    pub refreshed: bool,
    /// Size of the union of old moment indices and the current support,
    /// before pruning, per tensor.
    pub union_len: Vec<usize>,
    /// Entries written per tensor.
    pub touched: Vec<usize>,
}

/// Per-tensor state of the sparse optimizer.
#[derive(Clone, Debug)]
pub struct SoState {
    pub(crate) tensors: Vec<TensorState>,
    pub(crate) t: u64,
    rng: Rng,
}

impl SoState {
    /// State for tensors of the given flat lengths, named by position.
    pub fn new(lens: &[usize], kappa: f64, seed: u64) -> Result<Self> {
        let named: Vec<(String, usize)> = lens
            .iter()
            .enumerate()
            .map(|(i, &d)| (i.to_string(), d))
            .collect();
        Self::with_names(&named, kappa, seed)
    }

    pub fn for_mlp(model: &Mlp, kappa: f64, seed: u64) -> Result<Self> {
        let named: Vec<(String, usize)> = TensorId::ALL
            .iter()
            .map(|&id| (format!("{id:?}"), model.tensor(id).len()))
            .collect();
        Self::with_names(&named, kappa, seed)
    }

    pub fn with_names(tensors: &[(String, usize)], kappa: f64, seed: u64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::invalid(format!("kappa must be in (0, 1], got {kappa}")));
        }
        if let Some((name, _)) = tensors.iter().find(|(_, d)| *d == 0) {
            return Err(Error::invalid(format!("tensor {name} is empty")));
        }
        Ok(Self {
            tensors: tensors
                .iter()
                .map(|(name, d)| TensorState::new(name.clone(), *d, m_for(kappa, *d)))
                .collect(),
            t: 0,
            rng: Rng::seed_from(seed),
        })
    }

    pub(crate) fn from_parts(tensors: Vec<TensorState>, t: u64, seed: u64) -> Self {
        Self {
            tensors,
            t,
            rng: Rng::seed_from(seed),
        }
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn tensor_count(&self) -> usize {
        self.tensors.len()
    }

    pub fn m_per_tensor(&self) -> Vec<usize> {
        self.tensors.iter().map(|s| s.m).collect()
    }

    pub fn support(&self, tensor: usize) -> &IndexSet {
        &self.tensors[tensor].support
    }

    pub fn mu(&self, tensor: usize) -> &SparseBuffer {
        &self.tensors[tensor].mu
    }

    pub fn nu(&self, tensor: usize) -> &SparseBuffer {
        &self.tensors[tensor].nu
    }

    /// Flat indices written by the most recent step.
    pub fn touched(&self, tensor: usize) -> &[usize] {
        &self.tensors[tensor].touched
    }

    /// One optimizer step over raw tensors.
    ///
    /// All gradients are checked before anything is mutated, so an error
    /// leaves both state and parameters untouched.
    pub fn step(
        &mut self,
        hyper: &SoHyper,
        grads: &[&[f64]],
        params: &mut [&mut [f64]],
    ) -> Result<StepReport> {
        hyper.validate()?;
        if grads.len() != self.tensors.len() || params.len() != self.tensors.len() {
            return Err(Error::shape(
                "so_step",
                format!(
                    "state has {} tensors, got {} gradients and {} parameters",
                    self.tensors.len(),
                    grads.len(),
                    params.len()
                ),
            ));
        }
        for ((ts, g), p) in self.tensors.iter().zip(grads).zip(params.iter()) {
            if g.len() != ts.len || p.len() != ts.len {
                return Err(Error::shape(
                    "so_step",
                    format!(
                        "tensor {} has {} entries, gradient {} and parameter {}",
                        ts.name,
                        ts.len,
                        g.len(),
                        p.len()
                    ),
                ));
            }
            check_finite(&ts.name, g)?;
        }

        self.t += 1;
        let t = self.t;
        let refresh = (t - 1) % hyper.interval == 0;
        let mut report = StepReport {
            t,
            refreshed: refresh,
            union_len: Vec::with_capacity(self.tensors.len()),
            touched: Vec::with_capacity(self.tensors.len()),
        };
        for ((ts, g), p) in self.tensors.iter_mut().zip(grads).zip(params.iter_mut()) {
            step_tensor(ts, &mut self.rng, hyper, t, refresh, g, p)?;
            report.union_len.push(ts.last_union);
            report.touched.push(ts.touched.len());
        }
        Ok(report)
    }
}

fn select_support(ts: &TensorState, rng: &mut Rng, mode: GradMode, grad: &[f64]) -> Result<IndexSet> {
    match mode {
        GradMode::Random => random_m(rng, ts.len, ts.m),
        GradMode::Importance => top_m_indices(grad, ts.m),
        GradMode::Dense => Ok(IndexSet::full(ts.len)),
    }
}

fn step_tensor(
    ts: &mut TensorState,
    rng: &mut Rng,
    hyper: &SoHyper,
    t: u64,
    refresh: bool,
    grad: &[f64],
    param: &mut [f64],
) -> Result<()> {
    let first = ts.support.is_empty();
    let reselect = first || (refresh && hyper.support_mode == SupportMode::Dynamic);
    if reselect {
        ts.support = select_support(ts, rng, hyper.grad_mode, grad)?;
    }
    let support = ts.support.as_slice();

    if hyper.moment_mode == MomentMode::NoMoments {
        for &j in support {
            param[j] -= hyper.eta * grad[j];
        }
        ts.last_union = support.len();
        ts.touched = support.to_vec();
        return Ok(());
    }

    // Moment update over the union of the previous buffer and the support.
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let prev_idx = ts.mu.indices();
    let (prev_mu, prev_nu) = (ts.mu.values(), ts.nu.values());
    let cap = prev_idx.len() + support.len();
    let mut idx = Vec::with_capacity(cap);
    let mut mu = Vec::with_capacity(cap);
    let mut nu = Vec::with_capacity(cap);
    let mut in_support = Vec::with_capacity(cap);
    let (mut a, mut s) = (0, 0);
    while a < prev_idx.len() || s < support.len() {
        let pa = prev_idx.get(a).copied().unwrap_or(usize::MAX);
        let ps = support.get(s).copied().unwrap_or(usize::MAX);
        let j = pa.min(ps);
        let (m0, v0) = if pa == j {
            a += 1;
            (prev_mu[a - 1], prev_nu[a - 1])
        } else {
            (0.0, 0.0)
        };
        let g = if ps == j {
            s += 1;
            grad[j]
        } else {
            0.0
        };
        idx.push(j);
        mu.push(b1 * m0 + (1.0 - b1) * g);
        nu.push(b2 * v0 + (1.0 - b2) * (g * g));
        in_support.push(ps == j);
    }
    ts.last_union = idx.len();

    let keep: Vec<usize> = if refresh || hyper.persist_moments {
        let k = ts.m.min(idx.len());
        match hyper.moment_mode {
            MomentMode::ImportanceTopM => top_m_indices(&mu, k)?.into_vec(),
            MomentMode::RandomM => random_m(rng, idx.len(), k)?.into_vec(),
            MomentMode::DensePassthrough => (0..idx.len()).collect(),
            MomentMode::NoMoments => unreachable!(),
        }
    } else if hyper.moment_mode == MomentMode::DensePassthrough {
        (0..idx.len()).collect()
    } else {
        (0..idx.len()).filter(|&p| in_support[p]).collect()
    };

    let bc1 = bias_correction(b1, t);
    let bc2 = bias_correction(b2, t);
    let mut new_idx = Vec::with_capacity(keep.len());
    let mut new_mu = Vec::with_capacity(keep.len());
    let mut new_nu = Vec::with_capacity(keep.len());
    for p in keep {
        let j = idx[p];
        param[j] -= adam_delta(mu[p], nu[p], bc1, bc2, hyper.eta, hyper.eps);
        new_idx.push(j);
        new_mu.push(mu[p]);
        new_nu.push(nu[p]);
    }
    ts.touched = new_idx.clone();
    ts.mu = SparseBuffer::from_parts_unchecked(new_idx.clone(), new_mu, ts.m);
    ts.nu = SparseBuffer::from_parts_unchecked(new_idx, new_nu, ts.m);
    Ok(())
}

/// SO step on the four MLP tensors.
pub fn so_step(
    state: &mut SoState,
    hyper: &SoHyper,
    grads: &BatchGrad,
    model: &mut Mlp,
) -> Result<StepReport> {
    let g = grads.tensors();
    let mut p = model.tensors_mut();
    state.step(hyper, &g, &mut p)
}

/// Parameter entries written by the most recent step, over all tensors.
pub fn update_touch_count(state: &SoState) -> usize {
    state.tensors.iter().map(|t| t.touched.len()).sum()
}
