use std::path::Path;

use anyhow::{Context, Result};
use bigan_core::dataset::file::load_dataset;
use bigan_core::dataset::Split;
use bigan_core::trainer::{ensure_validation_split, train};
use bigan_core::Real;

use crate::commands::{with_suffix, write_text};
use crate::config::Config;

pub fn run(data: &Path, config_path: &Path, out: &Path) -> Result<()> {
    let config = Config::load(Some(config_path), &[])?;
    config.require_explicit_seed()?;
    let train_config = config.train_config()?;
    let dataset = load_dataset::<Real>(data)
        .with_context(|| format!("loading dataset {}", data.display()))?;
    if dataset.indices_of(Split::Validation).is_empty() {
        eprintln!("note: no validation split; holding out a tenth of the train samples");
    }
    let dataset = ensure_validation_split(&dataset, train_config.seed);

    let outcome = train(&dataset, &train_config)?;
    outcome.checkpoint.save(out).with_context(|| format!("writing {}", out.display()))?;
    write_text(&with_suffix(out, ".log"), &outcome.log.to_csv())?;
    write_text(&with_suffix(out, ".config"), &config.canonical_text())?;

    let rows = outcome.log.rows.len();
    println!(
        "trained {rows} epochs; best validation MAE {} at epoch {} (config hash {:016x})",
        outcome.checkpoint.val_mae, outcome.checkpoint.epoch, outcome.checkpoint.config_hash
    );
    println!("wrote {}", out.display());
    Ok(())
}
