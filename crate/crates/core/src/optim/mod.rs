//! Sparse (SO) and dense (Adam) optimizers.

mod adam;
mod buffer;
mod snapshot;
mod so;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use buffer::SparseBuffer;
pub use so::{
    so_step, update_touch_count, GradMode, MomentMode, SoHyper, SoState, StepReport, SupportMode,
};

/// Bias-corrected Adam displacement, shared by the dense and sparse paths so
/// that the two agree bit for bit when every index is retained.
#[inline]
pub(crate) fn adam_delta(mu: f64, nu: f64, bc1: f64, bc2: f64, eta: f64, eps: f64) -> f64 {
    let mu_hat = mu / bc1;
    let nu_hat = nu / bc2;
    eta * mu_hat / (nu_hat.sqrt() + eps)
}

/// `1 − β^t`.
#[inline]
pub(crate) fn bias_correction(beta: f64, t: u64) -> f64 {
    1.0 - beta.powi(t.min(i32::MAX as u64) as i32)
}

pub(crate) fn check_finite(name: &str, grad: &[f64]) -> crate::Result<()> {
    if let Some(pos) = grad.iter().position(|g| !g.is_finite()) {
        return Err(crate::Error::NonFinite {
            tensor: name.to_string(),
            detail: format!("gradient entry {pos} is {}", grad[pos]),
        });
    }
    Ok(())
}
