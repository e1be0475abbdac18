use crate::error::{Error, Result};
use crate::math::{numerical_rank, IndexSet, Matrix};

/// Numerical rank of `grad` with every entry outside `mask` zeroed. `None`
/// means a dense mask.
pub fn track_rank(grad: &Matrix, mask: Option<&IndexSet>) -> Result<usize> {
    match mask {
        None => numerical_rank(grad, None),
        Some(mask) => {
            if mask.domain_size() != grad.len() {
                return Err(Error::shape(
                    "track_rank",
                    format!("mask over {} entries for {:?} gradient", mask.domain_size(), grad.shape()),
                ));
            }
            let mut masked = Matrix::zeros(grad.rows(), grad.cols());
            let src = grad.as_slice();
            let dst = masked.as_mut_slice();
            for &i in mask.as_slice() {
                dst[i] = src[i];
            }
            numerical_rank(&masked, None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Rng;

    fn random(rng: &mut Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.normal())
    }

    #[test]
    fn dense_mask_is_raw_rank() {
        let mut rng = Rng::seed_from(5);
        let g = random(&mut rng, 6, 9);
        let full = IndexSet::full(g.len());
        assert_eq!(track_rank(&g, None).unwrap(), 6);
        assert_eq!(track_rank(&g, Some(&full)).unwrap(), 6);
    }

    #[test]
    fn single_row_mask_has_rank_at_most_one() {
        let mut rng = Rng::seed_from(6);
        let g = random(&mut rng, 8, 8);
        let row3 = IndexSet::new((24..32).collect(), 64).unwrap();
        assert_eq!(track_rank(&g, Some(&row3)).unwrap(), 1);
        let part = IndexSet::new(vec![25, 27], 64).unwrap();
        assert!(track_rank(&g, Some(&part)).unwrap() <= 1);
        assert_eq!(track_rank(&g, Some(&IndexSet::empty(64))).unwrap(), 0);
    }

    #[test]
    fn diagonal_mask_is_full_rank() {
        let mut rng = Rng::seed_from(7);
        let g = random(&mut rng, 5, 5);
        let diag = IndexSet::new((0..5).map(|i| i * 6).collect(), 25).unwrap();
        assert_eq!(track_rank(&g, Some(&diag)).unwrap(), 5);
    }

    #[test]
    fn mask_domain_must_match() {
        let g = Matrix::zeros(2, 2);
        assert!(track_rank(&g, Some(&IndexSet::full(5))).is_err());
    }
}
