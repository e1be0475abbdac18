//! Rows of the published memory tables for the MLP layers, and the SO and
//! Adam rows of the CLIP aggregate.

use sparseopt::membudget::{budget, budget_model, clip_layers, LayerShape, MemoryRow, MethodSpec};

/// method, κ or r, then (vars, MB) for weight / gradient / states,
/// trainable count and total MB, as printed.
pub struct Row(pub &'static str, pub f64, pub u64, pub &'static str, pub u64, pub &'static str, pub u64, pub &'static str, pub u64, pub &'static str);

pub const W1: &[Row] = &[
    Row("so", 0.01, 100352, "0.38", 2007, "0.01", 3010, "0.01", 1003, "0.40"),
    Row("so", 0.02, 100352, "0.38", 4014, "0.02", 6021, "0.02", 2007, "0.42"),
    Row("so", 0.05, 100352, "0.38", 10035, "0.04", 15052, "0.06", 5017, "0.48"),
    Row("so", 0.08, 100352, "0.38", 16056, "0.06", 24084, "0.09", 8028, "0.54"),
    Row("so", 0.1, 100352, "0.38", 20070, "0.08", 30105, "0.11", 10035, "0.57"),
    Row("galore", 2.0, 100352, "0.38", 100352, "0.38", 3392, "0.01", 100352, "0.78"),
    Row("galore", 4.0, 100352, "0.38", 100352, "0.38", 6784, "0.03", 100352, "0.79"),
    Row("galore", 8.0, 100352, "0.38", 100352, "0.38", 13568, "0.05", 100352, "0.82"),
    Row("galore", 16.0, 100352, "0.38", 100352, "0.38", 27136, "0.10", 100352, "0.87"),
    Row("lora", 2.0, 102176, "0.39", 1824, "0.01", 3648, "0.01", 1824, "0.41"),
    Row("lora", 4.0, 104000, "0.40", 3648, "0.01", 7296, "0.03", 3648, "0.44"),
    Row("lora", 8.0, 107648, "0.41", 7296, "0.03", 14592, "0.06", 7296, "0.49"),
    Row("lora", 16.0, 114944, "0.44", 14592, "0.06", 29184, "0.11", 14592, "0.61"),
    Row("pissa", 2.0, 102176, "0.39", 1824, "0.01", 3648, "0.01", 1824, "0.41"),
    Row("pissa", 4.0, 104000, "0.40", 3648, "0.01", 7296, "0.03", 3648, "0.44"),
    Row("pissa", 8.0, 107648, "0.41", 7296, "0.03", 14592, "0.06", 7296, "0.49"),
    Row("pissa", 16.0, 114944, "0.44", 14592, "0.06", 29184, "0.11", 14592, "0.61"),
    Row("dora", 2.0, 102304, "0.39", 1952, "0.01", 3904, "0.01", 1952, "0.41"),
    Row("dora", 4.0, 104128, "0.40", 3776, "0.01", 7552, "0.03", 3776, "0.44"),
    Row("dora", 8.0, 107776, "0.41", 7424, "0.03", 14848, "0.06", 7424, "0.50"),
    Row("dora", 16.0, 115072, "0.44", 14720, "0.06", 29440, "0.11", 14720, "0.61"),
    Row("relora", 2.0, 102176, "0.39", 1824, "0.01", 3648, "0.01", 1824, "0.41"),
    Row("relora", 4.0, 104000, "0.40", 3648, "0.01", 7296, "0.03", 3648, "0.44"),
    Row("relora", 8.0, 107648, "0.41", 7296, "0.03", 14592, "0.06", 7296, "0.49"),
    Row("relora", 16.0, 114944, "0.44", 14592, "0.06", 29184, "0.11", 14592, "0.61"),
    Row("vera", 2.0, 102306, "0.39", 130, "0.00", 260, "0.00", 130, "0.39"),
    Row("vera", 4.0, 104132, "0.40", 132, "0.00", 264, "0.00", 132, "0.40"),
    Row("vera", 8.0, 107784, "0.41", 136, "0.00", 272, "0.00", 136, "0.41"),
    Row("vera", 16.0, 115088, "0.44", 144, "0.00", 288, "0.00", 144, "0.44"),
    Row("adam", 0.0, 100352, "0.38", 100352, "0.38", 200704, "0.77", 100352, "1.53"),
];

pub const W2: &[Row] = &[
    Row("so", 0.01, 16384, "0.06", 327, "0.00", 491, "0.00", 163, "0.07"),
    Row("so", 0.02, 16384, "0.06", 655, "0.00", 983, "0.00", 327, "0.07"),
    Row("so", 0.05, 16384, "0.06", 1638, "0.01", 2457, "0.01", 819, "0.08"),
    Row("so", 0.08, 16384, "0.06", 2621, "0.01", 3932, "0.01", 1310, "0.09"),
    Row("so", 0.1, 16384, "0.06", 3276, "0.01", 4915, "0.02", 1638, "0.09"),
    Row("galore", 2.0, 16384, "0.06", 16384, "0.06", 768, "0.00", 16384, "0.13"),
    Row("galore", 4.0, 16384, "0.06", 16384, "0.06", 1536, "0.01", 16384, "0.13"),
    Row("galore", 8.0, 16384, "0.06", 16384, "0.06", 3072, "0.01", 16384, "0.14"),
    Row("galore", 16.0, 16384, "0.06", 16384, "0.06", 6144, "0.02", 16384, "0.15"),
    Row("lora", 2.0, 16896, "0.06", 512, "0.00", 1024, "0.00", 512, "0.07"),
    Row("lora", 4.0, 17408, "0.07", 1024, "0.00", 2048, "0.01", 1024, "0.08"),
    Row("lora", 8.0, 18432, "0.07", 2048, "0.01", 4096, "0.02", 2048, "0.09"),
    Row("lora", 16.0, 20480, "0.08", 4096, "0.02", 8192, "0.03", 4096, "0.12"),
    Row("pissa", 2.0, 16896, "0.06", 512, "0.00", 1024, "0.00", 512, "0.07"),
    Row("pissa", 4.0, 17408, "0.07", 1024, "0.00", 2048, "0.01", 1024, "0.08"),
    Row("pissa", 8.0, 18432, "0.07", 2048, "0.01", 4096, "0.02", 2048, "0.09"),
    Row("pissa", 16.0, 20480, "0.08", 4096, "0.02", 8192, "0.03", 4096, "0.12"),
    Row("dora", 2.0, 17024, "0.06", 640, "0.00", 1280, "0.00", 640, "0.07"),
    Row("dora", 4.0, 17536, "0.07", 1152, "0.00", 2304, "0.01", 1152, "0.08"),
    Row("dora", 8.0, 18560, "0.07", 2176, "0.01", 4352, "0.02", 2176, "0.10"),
    Row("dora", 16.0, 20608, "0.08", 4224, "0.02", 8448, "0.03", 4224, "0.13"),
    Row("relora", 2.0, 16896, "0.06", 512, "0.00", 1024, "0.00", 512, "0.07"),
    Row("relora", 4.0, 17408, "0.07", 1024, "0.00", 2048, "0.01", 1024, "0.08"),
    Row("relora", 8.0, 18432, "0.07", 2048, "0.01", 4096, "0.02", 2048, "0.09"),
    Row("relora", 16.0, 20480, "0.08", 4096, "0.02", 8192, "0.03", 4096, "0.12"),
    Row("vera", 2.0, 17026, "0.06", 130, "0.00", 260, "0.00", 130, "0.07"),
    Row("vera", 4.0, 17540, "0.07", 132, "0.00", 264, "0.00", 132, "0.07"),
    Row("vera", 8.0, 18568, "0.07", 136, "0.00", 272, "0.00", 136, "0.07"),
    Row("vera", 16.0, 20624, "0.08", 144, "0.00", 288, "0.00", 144, "0.08"),
    Row("adam", 0.0, 16384, "0.06", 16384, "0.06", 32768, "0.12", 16384, "0.25"),
];

pub const CLIP: &[Row] = &[
    Row("so", 0.0005, 122683392, "468", 122683, "0.47", 184025, "0.70", 61341, "469.17"),
    Row("so", 0.01, 122683392, "468", 2453667, "9.36", 3680501, "14.04", 1226833, "491.40"),
    Row("so", 0.02, 122683392, "468", 4907335, "18.72", 7361003, "28.08", 2453667, "514.80"),
    Row("so", 0.05, 122683392, "468", 12268339, "46.80", 18402508, "70.20", 6134169, "585.00"),
    Row("so", 0.08, 122683392, "468", 19629342, "74.88", 29444014, "112.32", 9814671, "655.20"),
    Row("so", 0.1, 122683392, "468", 24536678, "93.60", 36805017, "140.40", 12268339, "702.00"),
    Row("adam", 0.0, 122683392, "468.00", 122683392, "468.00", 245366784, "936.00", 122683392, "1872.00"),
];

pub fn spec(row: &Row) -> MethodSpec {
    let (kappa, rank) = match row.0 {
        "so" => (Some(row.1), None),
        "adam" => (None, None),
        _ => (None, Some(row.1 as u64)),
    };
    MethodSpec::parse(row.0, kappa, rank).unwrap()
}

/// Printed MB values drop trailing decimals in places ("468MB").
fn mb(printed: &str) -> String {
    format!("{:.2}", printed.parse::<f64>().unwrap())
}

/// Cells of `got` that differ from the printed row.
pub fn mismatches(row: &Row, got: &MemoryRow, table: &str) -> Vec<String> {
    let ctx = format!("{table} {}", spec(row).label());
    let cells = [
        ("weight", got.weight_vars.to_string(), row.2.to_string()),
        ("weight MB", format!("{:.2}", got.weight_mb), mb(row.3)),
        ("grad", got.grad_vars.to_string(), row.4.to_string()),
        ("grad MB", format!("{:.2}", got.grad_mb), mb(row.5)),
        ("states", got.state_vars.to_string(), row.6.to_string()),
        ("states MB", format!("{:.2}", got.state_mb), mb(row.7)),
        ("trainable", got.trainable_vars.to_string(), row.8.to_string()),
        ("total MB", format!("{:.2}", got.total_mb), mb(row.9)),
    ];
    cells
        .into_iter()
        .filter(|(_, g, w)| g != w)
        .map(|(name, g, w)| format!("{ctx} {name}: got {g}, table {w}"))
        .collect()
}

/// Every mismatch across both layer tables and the CLIP rows.
pub fn all_mismatches() -> Vec<String> {
    let mut out = Vec::new();
    for row in W1 {
        out.extend(mismatches(row, &budget(LayerShape { m: 128, n: 784 }, spec(row)).unwrap(), "W1"));
    }
    for row in W2 {
        out.extend(mismatches(row, &budget(LayerShape { m: 128, n: 128 }, spec(row)).unwrap(), "W2"));
    }
    let layers = clip_layers();
    for row in CLIP {
        out.extend(mismatches(row, &budget_model(&layers, spec(row)).unwrap(), "CLIP"));
    }
    out
}
