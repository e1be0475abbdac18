mod common;

use proptest::prelude::*;
use sparseopt::data::{load_dir, parse_idx, sample_few_shot, write_idx, Dataset};

#[test]
fn mnist_train_split_shape() {
    let Some(dir) = common::dataset_dir("mnist") else {
        eprintln!("MNIST not found under {:?}; run scripts/fetch_data.sh", common::data_root());
        return;
    };
    let (train, test) = load_dir(&dir).unwrap();
    assert_eq!(train.len(), 60_000);
    assert_eq!(test.len(), 10_000);
    assert_eq!(train.class_count(), 10);
    assert_eq!(train.image_shape(), (28, 28));
    let px = train.images().as_slice();
    assert!(px.iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(px.iter().cloned().fold(f64::MIN, f64::max), 1.0);

    // 16-shot support sets over 10⁴ seeds: each class's members should be
    // hit uniformly. 16·10⁴ draws over ~6000 cells per class.
    let members = train.class_indices();
    let seeds = 10_000u64;
    let mut counts: Vec<Vec<u32>> = members.iter().map(|m| vec![0; m.len()]).collect();
    let pos: std::collections::HashMap<usize, (usize, usize)> = members
        .iter()
        .enumerate()
        .flat_map(|(c, m)| m.iter().enumerate().map(move |(p, &i)| (i, (c, p))))
        .collect();
    for seed in 0..seeds {
        let task = sample_few_shot(&train, 16, seed).unwrap();
        for &i in &task.support_indices {
            let (c, p) = pos[&i];
            counts[c][p] += 1;
        }
    }
    for (c, cnt) in counts.iter().enumerate() {
        let expected = 16.0 * seeds as f64 / cnt.len() as f64;
        let chi2: f64 = cnt.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        let limit = common::chi2_quantile((cnt.len() - 1) as f64, 3.0902);
        assert!(chi2 < limit, "class {c}: chi2 {chi2:.1} >= {limit:.1}");
    }
}

fn idx_bytes(n: usize, rows: usize, cols: usize, pixels: &[u8], labels: &[u8]) -> (Vec<u8>, Vec<u8>) {
    let mut img = Vec::new();
    for v in [0x803u32, n as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    img.extend_from_slice(pixels);
    let mut lab = Vec::new();
    for v in [0x801u32, n as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    (img, lab)
}

proptest! {
    #[test]
    fn idx_round_trip_is_byte_exact(
        n in 1usize..6,
        rows in 1usize..5,
        cols in 1usize..5,
        seed in any::<u64>(),
    ) {
        let mut rng = sparseopt::math::Rng::seed_from(seed);
        let pixels: Vec<u8> = (0..n * rows * cols).map(|_| rng.below(256) as u8).collect();
        let labels: Vec<u8> = (0..n).map(|_| rng.below(10) as u8).collect();
        let (img, lab) = idx_bytes(n, rows, cols, &pixels, &labels);
        let ds: Dataset = parse_idx(&img, &lab).unwrap();
        prop_assert_eq!(write_idx(&ds).unwrap(), (img, lab));
    }

    #[test]
    fn few_shot_depends_only_on_inputs(seed in any::<u64>(), k in 1usize..4) {
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let ds = Dataset::from_bytes(&[0u8; 40], 1, 1, labels, None).unwrap();
        let a = sample_few_shot(&ds, k, seed).unwrap();
        let b = sample_few_shot(&ds, k, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let mut sorted = a.support_indices.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), 4 * k);
    }
}
