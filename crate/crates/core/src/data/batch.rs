use super::Dataset;
use crate::math::{Matrix, Rng};

/// The sample order for one epoch: `indices` shuffled by a generator keyed
/// on `(seed, epoch)`.
pub fn epoch_order(indices: &[usize], seed: u64, epoch: u64) -> Vec<usize> {
    let mut order = indices.to_vec();
    Rng::stream(seed, epoch).shuffle(&mut order);
    order
}

/// Minibatches of one epoch over `subset` (all samples when `None`). The
/// last batch may be short.
pub fn batch_iter<'a>(
    ds: &'a Dataset,
    subset: Option<&[usize]>,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Batches<'a> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let all: Vec<usize>;
    let indices = match subset {
        Some(s) => s,
        None => {
            all = (0..ds.len()).collect();
            &all
        }
    };
    Batches {
        ds,
        order: epoch_order(indices, seed, epoch),
        batch_size,
        pos: 0,
    }
}

pub struct Batches<'a> {
    ds: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Batches<'_> {
    pub fn order(&self) -> &[usize] {
        &self.order
    }
}

impl Iterator for Batches<'_> {
    type Item = (Matrix, Vec<usize>);

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.ds.gather(&self.order[self.pos..end]);
        self.pos = end;
        Some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let pixels: Vec<u8> = (0..n).map(|i| i as u8).collect();
        Dataset::from_bytes(&pixels, 1, 1, vec![0; n], Some(2)).unwrap()
    }

    fn ids(x: &Matrix) -> Vec<usize> {
        x.as_slice().iter().map(|v| (v * 255.0).round() as usize).collect()
    }

    #[test]
    fn oversized_batch_is_single() {
        let ds = toy(7);
        let batches: Vec<_> = batch_iter(&ds, None, 100, 1, 0).collect();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].1.len(), 7);
    }

    #[test]
    fn epoch_is_a_permutation() {
        let ds = toy(23);
        let mut seen: Vec<usize> = batch_iter(&ds, None, 5, 9, 2).flat_map(|(x, _)| ids(&x)).collect();
        assert_eq!(batch_iter(&ds, None, 5, 9, 2).count(), 5);
        seen.sort();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn epochs_are_reproducible_and_distinct() {
        let ds = toy(50);
        let a: Vec<_> = batch_iter(&ds, None, 8, 4, 0).map(|(x, _)| ids(&x)).collect();
        let b: Vec<_> = batch_iter(&ds, None, 8, 4, 0).map(|(x, _)| ids(&x)).collect();
        let c: Vec<_> = batch_iter(&ds, None, 8, 4, 1).map(|(x, _)| ids(&x)).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn subset_only() {
        let ds = toy(30);
        let subset = [3, 17, 29];
        let mut seen: Vec<usize> = batch_iter(&ds, Some(&subset), 2, 0, 0).flat_map(|(x, _)| ids(&x)).collect();
        seen.sort();
        assert_eq!(seen, subset);
    }
}
