use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::math::{random_m, Rng};

/// A K-shot support set: `shots` indices per class, classes ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotTask {
    pub shots: usize,
    pub class_count: usize,
    pub seed: u64,
    pub support_indices: Vec<usize>,
}

/// Draws `k` samples per class without replacement. Classes are visited in
/// ascending order from one generator, so class `c`'s draw never depends on
/// classes above it.
pub fn sample_few_shot(ds: &Dataset, k: usize, seed: u64) -> Result<FewShotTask> {
    if k == 0 {
        return Err(Error::invalid("shots must be at least 1"));
    }
    let mut rng = Rng::seed_from(seed);
    let mut support = Vec::with_capacity(k * ds.class_count());
    for (class, members) in ds.class_indices().iter().enumerate() {
        if members.len() < k {
            return Err(Error::InsufficientData {
                class,
                available: members.len(),
                required: k,
            });
        }
        let picked = random_m(&mut rng, members.len(), k)?;
        support.extend(picked.as_slice().iter().map(|&p| members[p]));
    }
    Ok(FewShotTask {
        shots: k,
        class_count: ds.class_count(),
        seed,
        support_indices: support,
    })
}
