//! Memory accounting checked against the published tables.

mod common;

use common::tables::{mismatches, spec, CLIP, W1, W2};
use sparseopt::membudget::{budget, budget_model, clip_layers, LayerShape, MemoryRow, MethodSpec};

fn check(row: &common::tables::Row, got: &MemoryRow, table: &str) {
    let bad = mismatches(row, got, table);
    assert!(bad.is_empty(), "{bad:#?}");
}

#[test]
fn first_layer_table() {
    for row in W1 {
        check(row, &budget(LayerShape { m: 128, n: 784 }, spec(row)).unwrap(), "W1");
    }
}

#[test]
fn second_layer_table() {
    for row in W2 {
        check(row, &budget(LayerShape { m: 128, n: 128 }, spec(row)).unwrap(), "W2");
    }
}

#[test]
fn clip_aggregate_so_and_adam() {
    let layers = clip_layers();
    assert_eq!(layers.iter().map(|l| l.m * l.n).sum::<u64>(), 122_683_392);
    for row in CLIP {
        check(row, &budget_model(&layers, spec(row)).unwrap(), "CLIP");
    }
}

#[test]
fn single_layer_model_equals_budget() {
    let l = LayerShape { m: 128, n: 784 };
    for row in W1 {
        assert_eq!(budget_model(&[l], spec(row)).unwrap(), budget(l, spec(row)).unwrap());
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn so_counts_are_ordered(m in 1u64..4000, n in 1u64..4000, kappa in 1e-4f64..1.0) {
            let r = budget(LayerShape { m, n }, MethodSpec::So { kappa }).unwrap();
            prop_assert!(r.trainable_vars <= r.grad_vars && r.grad_vars <= r.state_vars);
            let mn = (m * n) as f64;
            prop_assert!((r.grad_vars as f64 - 2.0 * mn * kappa).abs() <= 1.0);
            prop_assert!((r.state_vars as f64 - 3.0 * mn * kappa).abs() <= 1.0);
        }

        #[test]
        fn so_counts_grow_with_kappa(m in 1u64..2000, n in 1u64..2000, a in 1e-4f64..1.0, b in 1e-4f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let l = LayerShape { m, n };
            let x = budget(l, MethodSpec::So { kappa: lo }).unwrap();
            let y = budget(l, MethodSpec::So { kappa: hi }).unwrap();
            prop_assert!(x.grad_vars <= y.grad_vars);
            prop_assert!(x.state_vars <= y.state_vars);
            prop_assert!(x.trainable_vars <= y.trainable_vars);
        }

        #[test]
        fn low_rank_counts_grow_with_rank(m in 3u64..500, n in 3u64..500, r in 1u64..200) {
            let r = r.min(m.min(n) - 2);
            for method in ["lora", "pissa", "dora", "relora", "vera", "galore"] {
                let l = LayerShape { m, n };
                let x = budget(l, MethodSpec::parse(method, None, Some(r)).unwrap()).unwrap();
                let y = budget(l, MethodSpec::parse(method, None, Some(r + 1)).unwrap()).unwrap();
                prop_assert!(x.weight_vars <= y.weight_vars && x.grad_vars <= y.grad_vars);
                prop_assert!(x.state_vars <= y.state_vars && x.trainable_vars <= y.trainable_vars);
            }
        }

        #[test]
        fn aggregate_ignores_order(dims in proptest::collection::vec((1u64..300, 1u64..300), 1..8), kappa in 1e-3f64..1.0, seed in any::<u64>()) {
            let layers: Vec<LayerShape> = dims.iter().map(|&(m, n)| LayerShape { m, n }).collect();
            let mut shuffled = layers.clone();
            sparseopt::math::Rng::seed_from(seed).shuffle(&mut shuffled);
            for spec in [MethodSpec::So { kappa }, MethodSpec::Adam] {
                prop_assert_eq!(budget_model(&layers, spec).unwrap(), budget_model(&shuffled, spec).unwrap());
            }
        }
    }
}
