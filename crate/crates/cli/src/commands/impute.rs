use std::path::Path;

use anyhow::{bail, Context, Result};
use bigan_core::corruption::{
    corrupt_imputation, corrupt_prediction, passthrough_plan, CorruptionPlan, Setting,
};
use bigan_core::dataset::file::load_dataset;
use bigan_core::dataset::{Dataset, Split};
use bigan_core::evaluation::EvalReport;
use bigan_core::seed::derive;
use bigan_core::trainer::Checkpoint;
use bigan_core::Real;

use crate::commands::{with_suffix, write_text};
use crate::SplitChoice;

pub fn run_imputation(
    checkpoint: &Path,
    data: &Path,
    rate: f64,
    seed: u64,
    out: &Path,
    split: Option<SplitChoice>,
) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        bail!(bigan_core::Error::Config(format!("--rate {rate} outside [0, 1)")));
    }
    run(checkpoint, data, Setting::Imputation { rate }, seed, out, split)
}

pub fn run_prediction(
    checkpoint: &Path,
    data: &Path,
    obs_len: usize,
    seed: u64,
    out: &Path,
    split: Option<SplitChoice>,
) -> Result<()> {
    run(checkpoint, data, Setting::Prediction { observation_len: obs_len }, seed, out, split)
}

fn chosen_indices(dataset: &Dataset<Real>, split: Option<SplitChoice>) -> Vec<usize> {
    let choice = split.unwrap_or({
        if dataset.indices_of(Split::Test).is_empty() {
            SplitChoice::All
        } else {
            SplitChoice::Test
        }
    });
    match choice {
        SplitChoice::All => (0..dataset.len()).collect(),
        SplitChoice::Train => dataset.indices_of(Split::Train),
        SplitChoice::Validation => dataset.indices_of(Split::Validation),
        SplitChoice::Test => dataset.indices_of(Split::Test),
    }
}

fn run(
    checkpoint_path: &Path,
    data: &Path,
    setting: Setting,
    seed: u64,
    out: &Path,
    split: Option<SplitChoice>,
) -> Result<()> {
    let checkpoint = Checkpoint::<Real>::load(checkpoint_path)
        .with_context(|| format!("loading checkpoint {}", checkpoint_path.display()))?;
    let dataset =
        load_dataset::<Real>(data).with_context(|| format!("loading dataset {}", data.display()))?;
    if dataset.d() != checkpoint.generator.input_dim {
        bail!(
            "dataset has {} features but the checkpoint was trained on {}",
            dataset.d(),
            checkpoint.generator.input_dim
        );
    }
    if let Some(norm) = &dataset.norm {
        let same = norm.mean.len() == checkpoint.norm.mean.len()
            && norm
                .mean
                .iter()
                .zip(&checkpoint.norm.mean)
                .chain(norm.std.iter().zip(&checkpoint.norm.std))
                .all(|(a, b)| (a - b).abs() < 1e-9);
        if !same {
            bail!("dataset normalization differs from the checkpoint's; re-ingest the data");
        }
    }
    let generator = checkpoint.generator();
    let indices = chosen_indices(&dataset, split);
    if indices.is_empty() {
        bail!(bigan_core::Error::Data("no samples in the chosen split".into()));
    }

    let mut csv = String::from("sample_id,time,truth,imputed,flag\n");
    let mut per_unit = Vec::new();
    let mut unit_cells = Vec::new();
    for &idx in &indices {
        let sample = &dataset.samples[idx];
        let plan: CorruptionPlan<Real> = match setting {
            Setting::Imputation { rate } if rate > 0.0 && sample.observed_target_count() > 0 => {
                corrupt_imputation(sample, rate, derive(seed, "plan", idx as u64))?
            }
            Setting::Prediction { observation_len } if sample.observed_target_count() > 0 => {
                corrupt_prediction(sample, observation_len)?
            }
            _ => passthrough_plan(sample, setting, seed),
        };
        let output = generator.run(&plan.corrupted)?;
        let t = sample.target_index;
        for i in 0..sample.n() {
            let flag = if plan.eval_mask[i] == 1.0 {
                "deleted-eval"
            } else if sample.mask.at(i, t) == 1.0 {
                "observed"
            } else {
                "originally-missing"
            };
            let truth = if flag == "originally-missing" {
                String::new()
            } else {
                dataset.denormalize_target(plan.truth[i]).to_string()
            };
            let imputed = dataset.denormalize_target(output.replaced[i]);
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                sample.id,
                sample.grid.at(i),
                truth,
                imputed,
                flag
            ));
        }
        let (total, cells) = bigan_core::evaluation::score_plan(&plan, &output.replaced, &dataset);
        if cells > 0 {
            per_unit.push(total / cells as f64);
            unit_cells.push(cells);
        }
    }
    write_text(out, &csv)?;
    println!("wrote {} ({} samples)", out.display(), indices.len());

    let settings_echo = format!(
        "command.checkpoint = {}\ncommand.data = {}\ncommand.seed = {seed}\n\
         command.setting = {}\ncommand.config_hash = {:016x}\n",
        checkpoint_path.display(),
        data.display(),
        setting.describe(),
        checkpoint.config_hash,
    );
    write_text(&with_suffix(out, ".config"), &settings_echo)?;

    if per_unit.len() >= 2 {
        let skipped = indices.len() - per_unit.len();
        let report = EvalReport::from_folds(
            "bigan".into(),
            setting.describe(),
            per_unit,
            unit_cells,
            skipped,
            seed,
            checkpoint.config_hash,
            "sample",
        )?;
        write_text(&with_suffix(out, ".report.csv"), &report.to_csv())?;
        write_text(&with_suffix(out, ".report.txt"), &report.to_text())?;
        println!(
            "MAE {} (95% CI {}) over {} cells",
            report.mean_mae,
            report.ci_half_width,
            report.total_cells()
        );
    } else if per_unit.len() == 1 {
        println!("MAE {} over {} cells (single sample; no interval)", per_unit[0], unit_cells[0]);
    } else {
        println!("no held-out cells to score");
    }
    Ok(())
}
