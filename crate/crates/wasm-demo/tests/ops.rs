use sparseopt_wasm::{mask_rank_impl, memory_table_impl, toy_trajectory_impl};

#[test]
fn memory_table_formats() {
    let md = memory_table_impl("1000x784", "1%", "2", "md").unwrap();
    assert!(md.lines().count() >= 6, "{md}");
    assert!(md.contains("| Adam"));
    let csv = memory_table_impl("1000x784", "1,10%", "", "csv").unwrap();
    // header + SO 1% + SO 10% + Adam
    assert_eq!(csv.lines().count(), 4);
    let so = csv.lines().nth(1).unwrap();
    // gradient ⌊2·784000·0.01⌋ and state ⌊3·784000·0.01⌋
    assert!(so.contains(",15680,") && so.contains(",23520,"), "{so}");
    let json: serde_json::Value = serde_json::from_str(&memory_table_impl("mlp", "1", "", "json").unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);
    assert_eq!(json[1]["label"], "Adam");
}

#[test]
fn memory_table_rejects_bad_input() {
    assert!(memory_table_impl("0x5", "1", "", "md").is_err());
    assert!(memory_table_impl("10x5", "one", "", "md").is_err());
    assert!(memory_table_impl("10x5", "1", "", "xml").is_err());
    assert!(memory_table_impl("10x5", "250", "", "md").is_err());
}

#[test]
fn random_mask_keeps_more_rank_than_importance() {
    let r = mask_rank_impl(64, 64, 4, 0.05, 3).unwrap();
    assert_eq!(r.kept, 204);
    assert_eq!(r.dense, 4);
    assert!(r.random > r.importance, "{r:?}");
    let full = mask_rank_impl(16, 8, 2, 1.0, 0).unwrap();
    assert_eq!((full.dense, full.random, full.importance), (2, 2, 2));
    assert!(mask_rank_impl(0, 4, 1, 0.1, 0).is_err());
    assert!(mask_rank_impl(4, 4, 1, 0.0, 0).is_err());
}

#[test]
fn full_density_trajectory_matches_adam() {
    let t = toy_trajectory_impl(50, 1.0, 1, 0.05, 30, 9).unwrap();
    assert_eq!(t.so.len(), 31);
    assert_eq!(t.so, t.adam);
    assert!(t.so[30] < t.so[0]);
}

#[test]
fn sparse_trajectory_descends_slower() {
    let t = toy_trajectory_impl(200, 0.05, 10, 0.05, 200, 1).unwrap();
    assert!(t.so[200] < t.so[0]);
    assert!(t.so[200] > t.adam[200]);
    assert!(toy_trajectory_impl(0, 0.1, 1, 0.1, 5, 0).is_err());
}
