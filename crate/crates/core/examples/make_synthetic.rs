//! Writes the bundled demo dataset: Friedman #1 on ten uniform features (five
//! informative) with a continuous target `y` and a binary `y_high` marking
//! rows above the median of `y`.
//!
//! cargo run -p metamodel-core --example make_synthetic -- data/friedman_small.csv

use std::path::PathBuf;

use metamodel_core::synth::friedman;
use metamodel_core::tabular::{write_dataset, TargetColumn};
use metamodel_core::Task;

fn main() -> metamodel_core::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/friedman_small.csv"));
    let (table, y) = friedman(300, 10, 1.0, 2024)?;
    let mut sorted: Vec<f64> = y.values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let median = 0.5 * (sorted[149] + sorted[150]);
    let labels: Vec<f64> = y.values.iter().map(|v| (v.unwrap() > median) as u8 as f64).collect();
    let high = TargetColumn::from_dense("y_high", Task::Classification, &labels)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| metamodel_core::Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    write_dataset(&path, &table, &[y, high])?;
    println!("wrote {} rows to {}", table.n_rows(), path.display());
    Ok(())
}
