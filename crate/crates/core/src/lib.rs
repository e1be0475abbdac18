//! Sparse optimization toolkit.
//!
//! The centrepiece is [`optim::SoState`], an Adam-style optimizer that
//! updates a small, periodically re-drawn random subset of parameters and
//! keeps its first/second moments in fixed-capacity sparse buffers pruned by
//! magnitude. Around it sit dense Adam, low-rank baselines (LoRA, ReLoRA,
//! GaLore), a two-layer MLP with manual backprop, IDX/few-shot data loading,
//! closed-form memory accounting and an experiment harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod lowrank;
pub mod math;
pub mod membudget;
pub mod model;
pub mod optim;

pub use error::{Error, Result};

/// `⌊x⌋` for products like `κ·m·n` that are mathematically integers or have
/// a fractional part well above rounding noise.
pub(crate) fn floor_count(x: f64) -> usize {
    (x * (1.0 + 1e-12)).floor().max(0.0) as usize
}
