use crate::error::{Error, Result};
use crate::math::{Matrix, Rng};
use crate::model::{BatchGrad, Mlp};
use crate::optim::{AdamHyper, AdamState};

/// `W + A·B` over a frozen base `W` (m×n), with `A` m×r and `B` r×n.
///
/// `A` starts Gaussian with variance `1/r` and `B` at zero, so the adapted
/// weight equals the base at initialization. Scale is fixed at 1.
#[derive(Clone, Debug)]
pub struct LoraAdapter {
    base: Matrix,
    a: Matrix,
    b: Matrix,
    adam: AdamState,
}

impl LoraAdapter {
    pub fn new(base: Matrix, rank: usize, rng: &mut Rng) -> Result<Self> {
        let (m, n) = base.shape();
        if rank == 0 || rank >= m.min(n) {
            return Err(Error::invalid(format!(
                "LoRA rank {rank} must be in 1..{} for a {m}x{n} weight",
                m.min(n)
            )));
        }
        let mut adapter = Self {
            base,
            a: Matrix::zeros(m, rank),
            b: Matrix::zeros(rank, n),
            adam: AdamState::new(&[m * rank, rank * n]),
        };
        adapter.reinit(rng);
        Ok(adapter)
    }

    fn reinit(&mut self, rng: &mut Rng) {
        let std = 1.0 / (self.rank() as f64).sqrt();
        for v in self.a.as_mut_slice() {
            *v = std * rng.normal();
        }
        self.b.as_mut_slice().fill(0.0);
        self.adam.reset();
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn effective(&self) -> Matrix {
        let ab = self.a.matmul(&self.b).expect("adapter shapes agree");
        self.base.add(&ab).expect("adapter shapes agree")
    }

    /// `(∂L/∂A, ∂L/∂B) = (G·Bᵀ, Aᵀ·G)` for `G = ∂L/∂(W + A·B)`.
    pub fn factor_grads(&self, g: &Matrix) -> Result<(Matrix, Matrix)> {
        if g.shape() != self.base.shape() {
            return Err(Error::shape(
                "lora",
                format!("gradient {:?} for weight {:?}", g.shape(), self.base.shape()),
            ));
        }
        let ga = g.matmul_transb(&self.b)?;
        let gb = self.a.transpose().matmul(g)?;
        Ok((ga, gb))
    }
}

/// One Adam step on `A` and `B` given the gradient with respect to the
/// adapted weight. The base weight is never touched.
pub fn lora_step(adapter: &mut LoraAdapter, hyper: &AdamHyper, g: &Matrix) -> Result<()> {
    let (ga, gb) = adapter.factor_grads(g)?;
    let LoraAdapter { a, b, adam, .. } = adapter;
    adam.step(
        hyper,
        &[ga.as_slice(), gb.as_slice()],
        &mut [a.as_mut_slice(), b.as_mut_slice()],
    )
}

/// Folds `A·B` into the base, draws a fresh `A`, zeroes `B` and clears the
/// adapter's optimizer state.
pub fn relora_merge(adapter: &mut LoraAdapter, rng: &mut Rng) {
    adapter.base = adapter.effective();
    adapter.reinit(rng);
}

/// LoRA on both weight matrices of an [`Mlp`]; biases train densely with
/// Adam. The model always holds the adapted weights, so forward/backward
/// run unchanged.
#[derive(Clone, Debug)]
pub struct LoraMlp {
    adapters: [LoraAdapter; 2],
    bias_adam: AdamState,
    rng: Rng,
}

impl LoraMlp {
    /// The rank is clamped to `min(m, n) − 1` per layer, so a rank that fits
    /// W1 still works for a narrow output layer.
    pub fn new(model: &Mlp, rank: usize, seed: u64) -> Result<Self> {
        let mut rng = Rng::seed_from(seed);
        let clamp = |w: &Matrix| rank.min(w.rows().min(w.cols()) - 1).max(1);
        let a1 = LoraAdapter::new(model.w1.clone(), clamp(&model.w1), &mut rng)?;
        let a2 = LoraAdapter::new(model.w2.clone(), clamp(&model.w2), &mut rng)?;
        Ok(Self {
            adapters: [a1, a2],
            bias_adam: AdamState::new(&[model.b1.len(), model.b2.len()]),
            rng,
        })
    }

    pub fn adapters(&self) -> &[LoraAdapter; 2] {
        &self.adapters
    }

    pub fn step(&mut self, hyper: &AdamHyper, grads: &BatchGrad, model: &mut Mlp) -> Result<()> {
        lora_step(&mut self.adapters[0], hyper, &grads.w1)?;
        lora_step(&mut self.adapters[1], hyper, &grads.w2)?;
        self.bias_adam.step(
            hyper,
            &[&grads.b1, &grads.b2],
            &mut [&mut model.b1, &mut model.b2],
        )?;
        self.write_weights(model);
        Ok(())
    }

    pub fn merge(&mut self, model: &mut Mlp) {
        for a in &mut self.adapters {
            relora_merge(a, &mut self.rng);
        }
        self.write_weights(model);
    }

    fn write_weights(&self, model: &mut Mlp) {
        model.w1 = self.adapters[0].effective();
        model.w2 = self.adapters[1].effective();
    }

    /// Touched entries per step: all adapter factors plus biases.
    pub fn trainable_count(&self) -> usize {
        self.adapters.iter().map(|a| a.a.len() + a.b.len()).sum::<usize>()
            + self.adapters[0].base.rows()
            + self.adapters[1].base.rows()
    }
}
