use crate::error::{Error, Result};
use crate::math::{Matrix, Svd};
use crate::model::{BatchGrad, Mlp};
use crate::optim::{adam_delta, bias_correction, AdamHyper, AdamState};

/// Which side of `G` the projector acts on. The smaller dimension is
/// projected so the Adam state is `r × max(m, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    /// `P` is m×r, `R = Pᵀ·G`.
    Left,
    /// `P` is n×r, `R = G·P`.
    Right,
}

/// GaLore state for one weight matrix: an orthonormal projector refreshed
/// every `interval` steps from the current gradient, and Adam moments on the
/// projected gradient.
#[derive(Clone, Debug)]
pub struct GaloreState {
    rank: usize,
    interval: u64,
    side: Side,
    projector: Option<Matrix>,
    mu: Vec<f64>,
    nu: Vec<f64>,
    t: u64,
}

impl GaloreState {
    /// `rank` is clamped to `min(m, n)`.
    pub fn new(m: usize, n: usize, rank: usize, interval: u64) -> Result<Self> {
        if rank == 0 || interval == 0 || m == 0 || n == 0 {
            return Err(Error::invalid("GaLore needs rank, interval and shape >= 1"));
        }
        let rank = rank.min(m.min(n));
        let side = if m <= n { Side::Left } else { Side::Right };
        let proj_len = rank * if side == Side::Left { n } else { m };
        Ok(Self {
            rank,
            interval,
            side,
            projector: None,
            mu: vec![0.0; proj_len],
            nu: vec![0.0; proj_len],
            t: 0,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn projector(&self) -> Option<&Matrix> {
        self.projector.as_ref()
    }

    /// The projected gradient under the current projector.
    pub fn project(&self, g: &Matrix) -> Result<Matrix> {
        let p = self
            .projector
            .as_ref()
            .ok_or_else(|| Error::invalid("projector not computed yet"))?;
        match self.side {
            Side::Left => p.transpose().matmul(g),
            Side::Right => g.matmul(p),
        }
    }

    fn refresh(&mut self, g: &Matrix) -> Result<()> {
        let svd = Svd::compute(g)?;
        let basis = match self.side {
            Side::Left => &svd.u,
            Side::Right => &svd.v,
        };
        let dim = basis.rows();
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(self.rank);
        for j in 0..self.rank {
            if svd.s[j] > 0.0 {
                cols.push((0..dim).map(|i| basis.get(i, j)).collect());
            }
        }
        complete_basis(&mut cols, dim, self.rank);
        self.projector = Some(Matrix::from_fn(dim, self.rank, |i, j| cols[j][i]));
        Ok(())
    }
}

/// Extends orthonormal `cols` to `want` columns with Gram–Schmidt over the
/// standard basis. Needed when the gradient has fewer than `r` nonzero
/// singular values (e.g. an all-zero gradient).
fn complete_basis(cols: &mut Vec<Vec<f64>>, dim: usize, want: usize) {
    let mut k = 0;
    while cols.len() < want && k < dim {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        for _ in 0..2 {
            for c in cols.iter() {
                let d: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= d * ci;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            cols.push(v);
        }
        k += 1;
    }
}

/// One GaLore step: refresh `P` on schedule, Adam on the projected
/// gradient, then `W ← W − η·P·N` (or `N·Pᵀ` for a right projector), which
/// may change every entry of `W`.
pub fn galore_step(state: &mut GaloreState, hyper: &AdamHyper, g: &Matrix, w: &mut Matrix) -> Result<()> {
    if g.shape() != w.shape() {
        return Err(Error::shape("galore", format!("{:?} vs {:?}", g.shape(), w.shape())));
    }
    if !g.is_finite() {
        return Err(Error::NonFinite {
            tensor: format!("{}x{} weight", g.rows(), g.cols()),
            detail: "non-finite gradient".into(),
        });
    }
    if state.t % state.interval == 0 {
        state.refresh(g)?;
    }
    state.t += 1;
    let r = state.project(g)?;
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    let bc1 = bias_correction(b1, state.t);
    let bc2 = bias_correction(b2, state.t);
    let mut n = Matrix::zeros(r.rows(), r.cols());
    for (j, (&rj, nj)) in r.as_slice().iter().zip(n.as_mut_slice()).enumerate() {
        state.mu[j] = b1 * state.mu[j] + (1.0 - b1) * rj;
        state.nu[j] = b2 * state.nu[j] + (1.0 - b2) * (rj * rj);
        *nj = adam_delta(state.mu[j], state.nu[j], bc1, bc2, 1.0, hyper.eps);
    }
    let p = state.projector.as_ref().expect("refreshed above");
    let full = match state.side {
        Side::Left => p.matmul(&n)?,
        Side::Right => n.matmul_transb(p)?,
    };
    for (wi, di) in w.as_mut_slice().iter_mut().zip(full.as_slice()) {
        *wi -= hyper.eta * di;
    }
    Ok(())
}

/// GaLore on both MLP weight matrices, dense Adam on the biases.
#[derive(Clone, Debug)]
pub struct GaloreMlp {
    layers: [GaloreState; 2],
    bias_adam: AdamState,
}

impl GaloreMlp {
    pub fn new(model: &Mlp, rank: usize, interval: u64) -> Result<Self> {
        let (m1, n1) = model.w1.shape();
        let (m2, n2) = model.w2.shape();
        Ok(Self {
            layers: [
                GaloreState::new(m1, n1, rank, interval)?,
                GaloreState::new(m2, n2, rank, interval)?,
            ],
            bias_adam: AdamState::new(&[model.b1.len(), model.b2.len()]),
        })
    }

    pub fn layers(&self) -> &[GaloreState; 2] {
        &self.layers
    }

    pub fn step(&mut self, hyper: &AdamHyper, grads: &BatchGrad, model: &mut Mlp) -> Result<()> {
        galore_step(&mut self.layers[0], hyper, &grads.w1, &mut model.w1)?;
        galore_step(&mut self.layers[1], hyper, &grads.w2, &mut model.w2)?;
        self.bias_adam
            .step(hyper, &[&grads.b1, &grads.b2], &mut [&mut model.b1, &mut model.b2])
    }
}
