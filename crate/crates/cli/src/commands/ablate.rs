use std::path::Path;

use anyhow::{Context, Result};
use bigan_core::corruption::Setting;
use bigan_core::dataset::file::load_dataset;
use bigan_core::evaluation::evaluate_multi;
use bigan_core::trainer::BiGanImputer;
use bigan_core::Real;

use crate::commands::{benchmark::pick_driver, write_text};
use crate::config::Config;

/// The five model variants of the component study, as config overrides.
pub const VARIANTS: &[(&str, &[(&str, &str)])] = &[
    ("full", &[]),
    ("wasserstein", &[("model.loss_mode", "wasserstein")]),
    ("no_lambda", &[("model.no_lambda", "true")]),
    ("no_gan", &[("model.no_gan", "true")]),
    ("no_gan_no_lambda", &[("model.no_gan", "true"), ("model.no_lambda", "true")]),
];

pub fn run(data: &Path, config_path: &Path, out_dir: &Path) -> Result<()> {
    let base = Config::load(Some(config_path), &[])?;
    base.require_explicit_seed()?;
    let dataset =
        load_dataset::<Real>(data).with_context(|| format!("loading dataset {}", data.display()))?;
    let seed = base.seed()?;
    let driver = pick_driver(&dataset, base.eval_k()?);
    let settings = [
        Setting::Imputation { rate: base.eval_rate()? },
        Setting::Prediction { observation_len: base.eval_obs_len()? },
    ];

    std::fs::create_dir_all(out_dir)?;
    let mut table = String::from(
        "variant,imputation_mae,imputation_ci95,prediction_mae,prediction_ci95\n",
    );
    for (name, overrides) in VARIANTS {
        let config = base.with_overrides(overrides)?;
        let mut imputer = BiGanImputer::new(*name, config.train_config()?);
        // Every variant shares the seed-derived folds and plans: paired.
        let reports =
            evaluate_multi(&dataset, &mut imputer, &settings, driver, seed, config.hash())?;
        for report in &reports {
            let stem = report.file_stem();
            write_text(&out_dir.join(format!("{stem}.csv")), &report.to_csv())?;
            write_text(&out_dir.join(format!("{stem}.txt")), &report.to_text())?;
        }
        if let Some(checkpoint) = &imputer.last_checkpoint {
            checkpoint.save(&out_dir.join(format!("{name}.ckpt")))?;
        }
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            name,
            reports[0].mean_mae,
            reports[0].ci_half_width,
            reports[1].mean_mae,
            reports[1].ci_half_width
        ));
        println!(
            "{name}: imputation {} ({}), prediction {} ({})",
            reports[0].mean_mae, reports[0].ci_half_width, reports[1].mean_mae,
            reports[1].ci_half_width
        );
    }
    write_text(&out_dir.join("ablation.csv"), &table)?;
    write_text(&out_dir.join("effective.config"), &base.canonical_text())?;
    println!("wrote {}", out_dir.join("ablation.csv").display());
    Ok(())
}
