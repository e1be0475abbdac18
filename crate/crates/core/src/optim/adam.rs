use serde::{Deserialize, Serialize};

use super::{adam_delta, bias_correction, check_finite, SoHyper};
use crate::error::{Error, Result};
use crate::model::{BatchGrad, Mlp, TensorId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl From<&SoHyper> for AdamHyper {
    fn from(h: &SoHyper) -> Self {
        Self {
            eta: h.eta,
            beta1: h.beta1,
            beta2: h.beta2,
            eps: h.eps,
        }
    }
}

/// Dense Adam moments for a list of tensors.
#[derive(Clone, Debug)]
pub struct AdamState {
    mu: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(lens: &[usize]) -> Self {
        Self {
            mu: lens.iter().map(|&d| vec![0.0; d]).collect(),
            nu: lens.iter().map(|&d| vec![0.0; d]).collect(),
            t: 0,
        }
    }

    pub fn for_mlp(model: &Mlp) -> Self {
        let lens: Vec<usize> = TensorId::ALL.iter().map(|&id| model.tensor(id).len()).collect();
        Self::new(&lens)
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn reset(&mut self) {
        for v in self.mu.iter_mut().chain(self.nu.iter_mut()) {
            v.fill(0.0);
        }
        self.t = 0;
    }

    pub fn step(&mut self, hyper: &AdamHyper, grads: &[&[f64]], params: &mut [&mut [f64]]) -> Result<()> {
        if grads.len() != self.mu.len() || params.len() != self.mu.len() {
            return Err(Error::shape(
                "adam_step",
                format!(
                    "state has {} tensors, got {} gradients and {} parameters",
                    self.mu.len(),
                    grads.len(),
                    params.len()
                ),
            ));
        }
        for (i, ((m, g), p)) in self.mu.iter().zip(grads).zip(params.iter()).enumerate() {
            if g.len() != m.len() || p.len() != m.len() {
                return Err(Error::shape(
                    "adam_step",
                    format!("tensor {i}: state {}, gradient {}, parameter {}", m.len(), g.len(), p.len()),
                ));
            }
            check_finite(&i.to_string(), g)?;
        }
        self.t += 1;
        let (b1, b2) = (hyper.beta1, hyper.beta2);
        let bc1 = bias_correction(b1, self.t);
        let bc2 = bias_correction(b2, self.t);
        for ((mu, nu), (g, p)) in self
            .mu
            .iter_mut()
            .zip(self.nu.iter_mut())
            .zip(grads.iter().zip(params.iter_mut()))
        {
            for j in 0..mu.len() {
                let gj = g[j];
                mu[j] = b1 * mu[j] + (1.0 - b1) * gj;
                nu[j] = b2 * nu[j] + (1.0 - b2) * (gj * gj);
                p[j] -= adam_delta(mu[j], nu[j], bc1, bc2, hyper.eta, hyper.eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut AdamState, hyper: &AdamHyper, grads: &BatchGrad, model: &mut Mlp) -> Result<()> {
    let g = grads.tensors();
    let mut p = model.tensors_mut();
    state.step(hyper, &g, &mut p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_single_parameter() {
        let mut st = AdamState::new(&[1]);
        let mut theta = vec![0.0];
        st.step(&AdamHyper::default(), &[&[1.0]], &mut [&mut theta]).unwrap();
        assert!((theta[0] + 9.99999990e-4).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut st = AdamState::new(&[3]);
        let mut theta = vec![1.0, -2.0, 3.0];
        for _ in 0..50 {
            st.step(&AdamHyper::default(), &[&[0.0; 3]], &mut [&mut theta]).unwrap();
        }
        assert_eq!(theta, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut st = AdamState::new(&[2]);
        let mut theta = vec![0.0; 2];
        let err = st.step(&AdamHyper::default(), &[&[f64::INFINITY, 0.0]], &mut [&mut theta]);
        assert!(matches!(err, Err(Error::NonFinite { .. })));
        assert_eq!(st.t(), 0);
    }
}
