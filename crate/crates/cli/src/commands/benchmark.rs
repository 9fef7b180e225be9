use std::path::Path;

use anyhow::{bail, Context, Result};
use bigan_core::baselines::{InterpolationImputer, KnnImputer, MeanImputer, MiceImputer};
use bigan_core::dataset::file::load_dataset;
use bigan_core::dataset::{Dataset, Split};
use bigan_core::evaluation::{
    sweep_missing_rate, sweep_windows, Driver, Imputer, SweepTable, MISSING_RATES,
    OBSERVATION_WINDOWS,
};
use bigan_core::trainer::BiGanImputer;
use bigan_core::Real;

use crate::commands::write_text;
use crate::config::Config;
use crate::SweepKind;

pub fn build_imputer(name: &str, config: &Config) -> Result<Box<dyn Imputer<Real>>> {
    Ok(match name {
        "bigan" => Box::new(BiGanImputer::new("bigan", config.train_config()?)),
        "mean" => Box::new(MeanImputer::new()),
        "knn" => Box::new(KnnImputer::new(config.knn_k()?)),
        "mice" => Box::new(MiceImputer::new(config.mice_iters()?)),
        "interp" => Box::new(InterpolationImputer::new()),
        other => bail!(bigan_core::Error::Config(format!(
            "unknown imputer {other:?}; expected bigan, mean, knn, mice, or interp"
        ))),
    })
}

/// Fixed split when the data carries one, otherwise seeded k-fold.
pub fn pick_driver(dataset: &Dataset<Real>, k: usize) -> Driver {
    if dataset.indices_of(Split::Test).is_empty() {
        Driver::KFold { k }
    } else {
        Driver::FixedSplit
    }
}

pub fn run(
    data: &Path,
    config_path: &Path,
    imputer_names: &[String],
    sweep: SweepKind,
    out_dir: &Path,
) -> Result<()> {
    let config = Config::load(Some(config_path), &[])?;
    if imputer_names.iter().any(|n| n == "bigan") {
        config.require_explicit_seed()?;
    }
    let dataset =
        load_dataset::<Real>(data).with_context(|| format!("loading dataset {}", data.display()))?;
    let seed = config.seed()?;
    let hash = config.hash();
    let driver = pick_driver(&dataset, config.eval_k()?);

    let mut imputers: Vec<Box<dyn Imputer<Real>>> = imputer_names
        .iter()
        .map(|name| build_imputer(name, &config))
        .collect::<Result<_>>()?;

    let table: SweepTable = match sweep {
        SweepKind::Missing => {
            sweep_missing_rate(&dataset, &mut imputers, &MISSING_RATES, driver, seed, hash)?
        }
        SweepKind::Windows => {
            sweep_windows(&dataset, &mut imputers, &OBSERVATION_WINDOWS, driver, seed, hash)?
        }
    };

    for imputer in &imputers {
        for warning in imputer.warnings() {
            eprintln!("warning [{}]: {warning}", imputer.name());
        }
    }

    std::fs::create_dir_all(out_dir)?;
    for row in &table.rows {
        let stem = row.report.file_stem();
        write_text(&out_dir.join(format!("{stem}.csv")), &row.report.to_csv())?;
        write_text(&out_dir.join(format!("{stem}.txt")), &row.report.to_text())?;
    }
    // One row per imputer for eyeballing, plus the tidy long form.
    write_text(&out_dir.join("aggregate.csv"), &table.to_wide_csv())?;
    let long = table.to_csv();
    write_text(&out_dir.join("sweep_long.csv"), &long)?;
    write_text(&out_dir.join("effective.config"), &config.canonical_text())?;
    print!("{long}");
    println!("wrote {} report files under {}", table.rows.len(), out_dir.display());
    Ok(())
}
