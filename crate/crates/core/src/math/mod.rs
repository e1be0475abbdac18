//! Dense linear algebra, seeded randomness, partial selection and numerical
//! rank. Everything above this layer (model, optimizers, harness) is built on
//! these primitives.

mod matrix;
mod rng;
mod select;
mod svd;

pub use matrix::Matrix;
pub use rng::Rng;
pub use select::{random_m, top_m_indices, IndexSet};
pub use svd::{numerical_rank, singular_values, Svd};
pub(crate) use matrix::axpy;
