use std::path::Path;

use anyhow::{Context, Result};
use bigan_core::dataset::air_quality::load_air_quality_csv;
use bigan_core::dataset::file::save_dataset;
use bigan_core::dataset::long_csv::load_long_csv;
use bigan_core::dataset::{Dataset, Split};
use bigan_core::Real;

pub fn run_air_quality(input: &Path, out: &Path) -> Result<()> {
    let (dataset, summary) = load_air_quality_csv::<Real>(input)
        .with_context(|| format!("ingesting {}", input.display()))?;
    if summary.dropped_rows > 0 {
        eprintln!(
            "note: {} rows at month boundaries were too few for a full window and were dropped",
            summary.dropped_rows
        );
    }
    let (tr, va, te) = summary.window_counts;
    println!("splits: train {tr}, validation {va}, test {te}");
    finish(dataset, out)
}

pub fn run_long_csv(input: &Path, out: &Path, target: Option<&str>) -> Result<()> {
    let dataset = load_long_csv::<Real>(input, target)
        .with_context(|| format!("ingesting {}", input.display()))?;
    finish(dataset, out)
}

fn finish(dataset: Dataset<Real>, out: &Path) -> Result<()> {
    if !dataset.dropped_features.is_empty() {
        eprintln!(
            "warning: dropped features with no train-split variance: {}",
            dataset.dropped_features.join(", ")
        );
    }
    let cells = (dataset.len() * dataset.n() * dataset.d()) as f64;
    let observed: f64 = dataset
        .samples
        .iter()
        .map(|s| s.mask.iter().filter(|&&m| m == 1.0).count() as f64)
        .sum();
    let target_cells = (dataset.len() * dataset.n()) as f64;
    let target_observed: f64 =
        dataset.samples.iter().map(|s| s.observed_target_count() as f64).sum();
    println!(
        "{} samples of {} x {} ({} train / {} validation / {} test)",
        dataset.len(),
        dataset.n(),
        dataset.d(),
        dataset.indices_of(Split::Train).len(),
        dataset.indices_of(Split::Validation).len(),
        dataset.indices_of(Split::Test).len(),
    );
    println!(
        "missing: {:.3} pooled, {:.3} on target {}",
        1.0 - observed / cells,
        1.0 - target_observed / target_cells,
        dataset.feature_names[dataset.target_index],
    );
    save_dataset(&dataset, out).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}
