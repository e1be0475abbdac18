use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};

/// Sorted set of flat indices into a domain of size `domain_size`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    indices: Vec<usize>,
    domain_size: usize,
}

impl IndexSet {
    /// Validates that `indices` is strictly increasing and within the domain.
    pub fn new(indices: Vec<usize>, domain_size: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("index set must be strictly increasing"));
        }
        if indices.last().is_some_and(|&i| i >= domain_size) {
            return Err(Error::invalid(format!(
                "index {} outside domain of size {domain_size}",
                indices.last().unwrap()
            )));
        }
        Ok(Self {
            indices,
            domain_size,
        })
    }

    pub fn full(domain_size: usize) -> Self {
        Self {
            indices: (0..domain_size).collect(),
            domain_size,
        }
    }

    pub fn empty(domain_size: usize) -> Self {
        Self {
            indices: Vec::new(),
            domain_size,
        }
    }

    fn from_unsorted(mut indices: Vec<usize>, domain_size: usize) -> Self {
        indices.sort_unstable();
        Self {
            indices,
            domain_size,
        }
    }

    #[inline]
    pub fn as_slice(&self) -> &[usize] {
        &self.indices
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
    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.indices
    }
}

fn check_count(m: usize, d: usize, op: &str) -> Result<()> {
    if m == 0 || m > d {
        return Err(Error::invalid(format!(
            "{op}: need 1 <= m <= d, got m={m}, d={d}"
        )));
    }
    Ok(())
}

/// Draws `m` distinct indices uniformly from `0..d` by a partial
/// Fisher–Yates shuffle of the index array.
///
/// Memory is O(d). For very large domains Floyd's algorithm gives the same
/// distribution in O(m) memory, but desk-scale tensors do not need it.
pub fn random_m(rng: &mut Rng, d: usize, m: usize) -> Result<IndexSet> {
    check_count(m, d, "random_m")?;
    if m == d {
        return Ok(IndexSet::full(d));
    }
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..m {
        let j = i + rng.below(d - i);
        pool.swap(i, j);
    }
    pool.truncate(m);
    Ok(IndexSet::from_unsorted(pool, d))
}

/// Indices of the `m` entries with largest magnitude. Ties go to the lower
/// index.
pub fn top_m_indices(values: &[f64], m: usize) -> Result<IndexSet> {
    let d = values.len();
    check_count(m, d, "top_m_indices")?;
    if m == d {
        return Ok(IndexSet::full(d));
    }
    let order = |&a: &usize, &b: &usize| -> Ordering {
        values[b]
            .abs()
            .total_cmp(&values[a].abs())
            .then(a.cmp(&b))
    };
    let mut idx: Vec<usize> = (0..d).collect();
    idx.select_nth_unstable_by(m - 1, order);
    idx.truncate(m);
    Ok(IndexSet::from_unsorted(idx, d))
}
