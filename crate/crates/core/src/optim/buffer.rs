use serde::Serialize;

use crate::error::{Error, Result};

/// Index/value pairs over a flat tensor, sorted by index, with a nominal
/// capacity `M`.
///
/// The capacity is the post-prune bound; between the moment update and the
/// prune a buffer may legitimately hold up to `2M` entries.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SparseBuffer {
    indices: Vec<usize>,
    values: Vec<f64>,
    capacity: usize,
}

impl SparseBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            indices: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            capacity,
        }
    }

    /// Validates ordering and the `2M` intermediate bound.
    pub fn from_parts(indices: Vec<usize>, values: Vec<f64>, capacity: usize) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("buffer indices must be strictly increasing"));
        }
        if indices.len() > 2 * capacity {
            return Err(Error::invalid(format!(
                "{} entries exceed twice the capacity {capacity}",
                indices.len()
            )));
        }
        Ok(Self {
            indices,
            values,
            capacity,
        })
    }

    pub(crate) fn from_parts_unchecked(indices: Vec<usize>, values: Vec<f64>, capacity: usize) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self {
            indices,
            values,
            capacity,
        }
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.indices
            .binary_search(&index)
            .ok()
            .map(|pos| self.values[pos])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn clear(&mut self) {
        self.indices.clear();
        self.values.clear();
    }
}
