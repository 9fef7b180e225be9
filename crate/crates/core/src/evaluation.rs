//! Scoring and experiment drivers: masked MAE, k-fold cross-validation,
//! a fixed-split driver, and the missing-rate / window sweeps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corruption::{corrupt_imputation, corrupt_prediction, CorruptionPlan, Setting};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::derive;

/// Anything that can fill the target series of a corrupted sample.
/// `fit` is called once per fold/split with the training portion.
pub trait Imputer<F: Scalar> {
    fn name(&self) -> String;
    fn fit(&mut self, train: &Dataset<F>) -> Result<()>;
    /// Filled target series, length n, in normalized units. Observed
    /// (non-deleted) entries must pass through unchanged.
    fn impute(&self, plan: &CorruptionPlan<F>) -> Result<Vec<F>>;
    /// Messages accumulated during fitting (degenerate pools and the like).
    fn warnings(&self) -> Vec<String> {
        Vec::new()
    }
}

/// Mean absolute error over `eval_mask = 1` cells. The inputs must share
/// units; the experiment drivers denormalize before calling.
pub fn mae<F: Scalar>(truth: &[F], predicted: &[F], eval_mask: &[F]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for ((&t, &p), &m) in truth.iter().zip(predicted).zip(eval_mask) {
        if m == F::one() {
            total += (t - p).f64().abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Data("empty evaluation mask".into()));
    }
    Ok(total / count as f64)
}

/// Absolute-error sum and cell count of one plan, in original units.
pub fn score_plan<F: Scalar>(
    plan: &CorruptionPlan<F>,
    filled: &[F],
    dataset: &Dataset<F>,
) -> (f64, usize) {
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, &m) in plan.eval_mask.iter().enumerate() {
        if m == F::one() {
            let t = dataset.denormalize_target(plan.truth[i]).f64();
            let p = dataset.denormalize_target(filled[i]).f64();
            total += (t - p).abs();
            count += 1;
        }
    }
    (total, count)
}

/// Two-sided 95% t critical values by degrees of freedom (1-based); the
/// normal limit applies beyond the table.
const T_95: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042,
];

pub fn t_critical_95(df: usize) -> f64 {
    if df == 0 {
        return f64::NAN;
    }
    if df <= T_95.len() {
        T_95[df - 1]
    } else {
        1.960
    }
}

/// Per-fold errors with a 95% confidence interval over folds.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub imputer: String,
    pub setting: String,
    pub per_fold: Vec<f64>,
    pub fold_cells: Vec<usize>,
    pub skipped_folds: usize,
    pub mean_mae: f64,
    pub ci_half_width: f64,
    pub seed: u64,
    pub config_hash: u64,
    /// What one "fold" is: a cross-validation fold or a test sample.
    pub unit: &'static str,
}

impl EvalReport {
    pub fn from_folds(
        imputer: String,
        setting: String,
        per_fold: Vec<f64>,
        fold_cells: Vec<usize>,
        skipped_folds: usize,
        seed: u64,
        config_hash: u64,
        unit: &'static str,
    ) -> Result<Self> {
        if per_fold.len() < 2 {
            return Err(Error::Data(format!(
                "only {} surviving {unit}s; need at least 2 for a confidence interval",
                per_fold.len()
            )));
        }
        let k = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / k;
        let var = per_fold.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        let ci = t_critical_95(per_fold.len() - 1) * var.sqrt() / k.sqrt();
        Ok(EvalReport {
            imputer,
            setting,
            per_fold,
            fold_cells,
            skipped_folds,
            mean_mae: mean,
            ci_half_width: ci,
            seed,
            config_hash,
            unit,
        })
    }

    pub fn total_cells(&self) -> usize {
        self.fold_cells.iter().sum()
    }

    /// One row per fold plus an aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,imputer,setting,mae,cells,seed,config_hash\n");
        for (i, (mae, cells)) in self.per_fold.iter().zip(&self.fold_cells).enumerate() {
            out.push_str(&format!(
                "{}{},{},{},{},{},{},{:016x}\n",
                self.unit, i, self.imputer, self.setting, mae, cells, self.seed, self.config_hash
            ));
        }
        out.push_str(&format!(
            "aggregate,{},{},{},{},{},{:016x}\n",
            self.imputer,
            self.setting,
            self.mean_mae,
            self.total_cells(),
            self.seed,
            self.config_hash
        ));
        out
    }

    /// Structured text mirroring the CSV fields.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("imputer: {}\n", self.imputer));
        out.push_str(&format!("setting: {}\n", self.setting));
        out.push_str(&format!("unit: {}\n", self.unit));
        out.push_str(&format!("mean_mae: {}\n", self.mean_mae));
        out.push_str(&format!("ci95_half_width: {}\n", self.ci_half_width));
        out.push_str(&format!("evaluated_cells: {}\n", self.total_cells()));
        out.push_str(&format!("skipped: {}\n", self.skipped_folds));
        out.push_str(&format!("seed: {}\n", self.seed));
        out.push_str(&format!("config_hash: {:016x}\n", self.config_hash));
        for (i, (mae, cells)) in self.per_fold.iter().zip(&self.fold_cells).enumerate() {
            out.push_str(&format!("{}[{i}]: mae={mae} cells={cells}\n", self.unit));
        }
        out
    }

    /// File stem embedding setting, imputer, and seed.
    pub fn file_stem(&self) -> String {
        let clean = |s: &str| {
            s.chars()
                .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
                .collect::<String>()
        };
        format!("{}__{}__seed{}", clean(&self.setting), clean(&self.imputer), self.seed)
    }
}

fn make_plan<F: Scalar>(
    dataset: &Dataset<F>,
    sample_idx: usize,
    setting: Setting,
    seed: u64,
) -> Result<Option<CorruptionPlan<F>>> {
    let sample = &dataset.samples[sample_idx];
    if sample.observed_target_count() == 0 {
        return Ok(None);
    }
    let plan = match setting {
        Setting::Imputation { rate } => corrupt_imputation(sample, rate, seed)?,
        Setting::Prediction { observation_len } => corrupt_prediction(sample, observation_len)?,
    };
    Ok(if plan.eval_count() == 0 { None } else { Some(plan) })
}

/// Seeded k-fold cross-validation over several settings sharing the same
/// folds and fits. Folds and per-sample corruption seeds depend only on
/// `(seed, k, sample count)`, so different imputers and settings
/// evaluated with the same arguments see identical plans: runs are
/// paired. One report per requested setting.
pub fn run_kfold_multi<F: Scalar>(
    dataset: &Dataset<F>,
    imputer: &mut dyn Imputer<F>,
    settings: &[Setting],
    k: usize,
    seed: u64,
    config_hash: u64,
) -> Result<Vec<EvalReport>> {
    if k < 2 {
        return Err(Error::Data(format!("k-fold needs k >= 2, got {k}")));
    }
    if dataset.len() < k {
        return Err(Error::Data(format!("{} samples cannot fill {k} folds", dataset.len())));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "fold-shuffle", 0));
    order.shuffle(&mut rng);

    struct Acc {
        per_fold: Vec<f64>,
        fold_cells: Vec<usize>,
        skipped: usize,
    }
    let mut accs: Vec<Acc> = settings
        .iter()
        .map(|_| Acc { per_fold: Vec::new(), fold_cells: Vec::new(), skipped: 0 })
        .collect();

    for f in 0..k {
        let lo = f * dataset.len() / k;
        let hi = (f + 1) * dataset.len() / k;
        let test: Vec<usize> = order[lo..hi].to_vec();
        let train: Vec<usize> = order[..lo].iter().chain(&order[hi..]).copied().collect();
        let train_ds = dataset.subset(&train, vec![Split::Train; train.len()])?;
        imputer.fit(&train_ds)?;

        for (si, &setting) in settings.iter().enumerate() {
            let mut total = 0.0;
            let mut cells = 0usize;
            for &i in &test {
                let plan_seed = derive(seed, "plan", ((f as u64) << 32) | i as u64);
                let Some(plan) = make_plan(dataset, i, setting, plan_seed)? else {
                    continue;
                };
                let filled = imputer.impute(&plan)?;
                let (t, c) = score_plan(&plan, &filled, dataset);
                total += t;
                cells += c;
            }
            if cells == 0 {
                accs[si].skipped += 1;
            } else {
                accs[si].per_fold.push(total / cells as f64);
                accs[si].fold_cells.push(cells);
            }
        }
    }
    settings
        .iter()
        .zip(accs)
        .map(|(setting, acc)| {
            EvalReport::from_folds(
                imputer.name(),
                setting.describe(),
                acc.per_fold,
                acc.fold_cells,
                acc.skipped,
                seed,
                config_hash,
                "fold",
            )
        })
        .collect()
}

pub fn run_kfold<F: Scalar>(
    dataset: &Dataset<F>,
    imputer: &mut dyn Imputer<F>,
    setting: Setting,
    k: usize,
    seed: u64,
    config_hash: u64,
) -> Result<EvalReport> {
    Ok(run_kfold_multi(dataset, imputer, &[setting], k, seed, config_hash)?.remove(0))
}

/// Fixed-split driver: fit once on the train and validation splits, then
/// corrupt and score every test sample per setting; each test sample is
/// one report unit.
pub fn evaluate_split_multi<F: Scalar>(
    dataset: &Dataset<F>,
    imputer: &mut dyn Imputer<F>,
    settings: &[Setting],
    seed: u64,
    config_hash: u64,
) -> Result<Vec<EvalReport>> {
    let test = dataset.indices_of(Split::Test);
    if test.is_empty() {
        return Err(Error::Data("dataset has no test split".into()));
    }
    let fit_idx: Vec<usize> = (0..dataset.len()).filter(|i| !test.contains(i)).collect();
    let labels: Vec<Split> = fit_idx.iter().map(|&i| dataset.splits[i]).collect();
    let fit_ds = dataset.subset(&fit_idx, labels)?;
    imputer.fit(&fit_ds)?;

    settings
        .iter()
        .map(|&setting| {
            let mut per_unit = Vec::new();
            let mut unit_cells = Vec::new();
            let mut skipped = 0usize;
            for &i in &test {
                let plan_seed = derive(seed, "plan", i as u64);
                let Some(plan) = make_plan(dataset, i, setting, plan_seed)? else {
                    skipped += 1;
                    continue;
                };
                let filled = imputer.impute(&plan)?;
                let (total, cells) = score_plan(&plan, &filled, dataset);
                per_unit.push(total / cells as f64);
                unit_cells.push(cells);
            }
            EvalReport::from_folds(
                imputer.name(),
                setting.describe(),
                per_unit,
                unit_cells,
                skipped,
                seed,
                config_hash,
                "sample",
            )
        })
        .collect()
}

pub fn evaluate_split<F: Scalar>(
    dataset: &Dataset<F>,
    imputer: &mut dyn Imputer<F>,
    setting: Setting,
    seed: u64,
    config_hash: u64,
) -> Result<EvalReport> {
    Ok(evaluate_split_multi(dataset, imputer, &[setting], seed, config_hash)?.remove(0))
}

/// One cell of a sweep table.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub imputer: String,
    pub parameter: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub axis: &'static str,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Tidy table: one row per (imputer, parameter).
    pub fn to_csv(&self) -> String {
        let mut out = format!("imputer,{},mean_mae,ci95_half_width,cells,seed,config_hash\n", self.axis);
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{:016x}\n",
                row.imputer,
                row.parameter,
                row.report.mean_mae,
                row.report.ci_half_width,
                row.report.total_cells(),
                row.report.seed,
                row.report.config_hash
            ));
        }
        out
    }

    /// Wide comparison table: one row per imputer, one MAE/CI column
    /// pair per sweep point.
    pub fn to_wide_csv(&self) -> String {
        let mut params: Vec<f64> = Vec::new();
        for row in &self.rows {
            if !params.contains(&row.parameter) {
                params.push(row.parameter);
            }
        }
        let mut imputers: Vec<String> = Vec::new();
        for row in &self.rows {
            if !imputers.contains(&row.imputer) {
                imputers.push(row.imputer.clone());
            }
        }
        let mut out = String::from("imputer");
        for p in &params {
            out.push_str(&format!(",mae@{}={p},ci95@{}={p}", self.axis, self.axis));
        }
        out.push('\n');
        for name in &imputers {
            out.push_str(name);
            for p in &params {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| &r.imputer == name && r.parameter == *p)
                    .expect("complete sweep grid");
                out.push_str(&format!(",{},{}", cell.report.mean_mae, cell.report.ci_half_width));
            }
            out.push('\n');
        }
        out
    }
}

/// Whether experiments respect the dataset's own split labels or run
/// seeded k-fold over all samples.
#[derive(Debug, Clone, Copy)]
pub enum Driver {
    KFold { k: usize },
    FixedSplit,
}

pub fn evaluate<F: Scalar>(
    dataset: &Dataset<F>,
    imputer: &mut dyn Imputer<F>,
    setting: Setting,
    driver: Driver,
    seed: u64,
    config_hash: u64,
) -> Result<EvalReport> {
    Ok(evaluate_multi(dataset, imputer, &[setting], driver, seed, config_hash)?.remove(0))
}

/// Evaluate several settings with one fit per fold/split.
pub fn evaluate_multi<F: Scalar>(
    dataset: &Dataset<F>,
    imputer: &mut dyn Imputer<F>,
    settings: &[Setting],
    driver: Driver,
    seed: u64,
    config_hash: u64,
) -> Result<Vec<EvalReport>> {
    match driver {
        Driver::KFold { k } => run_kfold_multi(dataset, imputer, settings, k, seed, config_hash),
        Driver::FixedSplit => evaluate_split_multi(dataset, imputer, settings, seed, config_hash),
    }
}

/// Standard missing-rate grid.
pub const MISSING_RATES: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
/// Standard observation-window grid for length-20 series.
pub const OBSERVATION_WINDOWS: [usize; 4] = [4, 6, 8, 10];

/// Imputation-setting sweep over deletion rates.
pub fn sweep_missing_rate<F: Scalar>(
    dataset: &Dataset<F>,
    imputers: &mut [Box<dyn Imputer<F>>],
    rates: &[f64],
    driver: Driver,
    seed: u64,
    config_hash: u64,
) -> Result<SweepTable> {
    let mut table = SweepTable { axis: "missing_rate", rows: Vec::new() };
    let settings: Vec<Setting> = rates.iter().map(|&rate| Setting::Imputation { rate }).collect();
    for imputer in imputers.iter_mut() {
        let reports =
            evaluate_multi(dataset, imputer.as_mut(), &settings, driver, seed, config_hash)?;
        for (&rate, report) in rates.iter().zip(reports) {
            table.rows.push(SweepRow { imputer: imputer.name(), parameter: rate, report });
        }
    }
    Ok(table)
}

/// Prediction-setting sweep over observation windows.
pub fn sweep_windows<F: Scalar>(
    dataset: &Dataset<F>,
    imputers: &mut [Box<dyn Imputer<F>>],
    observation_lens: &[usize],
    driver: Driver,
    seed: u64,
    config_hash: u64,
) -> Result<SweepTable> {
    let mut table = SweepTable { axis: "observation_len", rows: Vec::new() };
    let settings: Vec<Setting> = observation_lens
        .iter()
        .map(|&obs| Setting::Prediction { observation_len: obs })
        .collect();
    for imputer in imputers.iter_mut() {
        let reports =
            evaluate_multi(dataset, imputer.as_mut(), &settings, driver, seed, config_hash)?;
        for (&obs, report) in observation_lens.iter().zip(reports) {
            table.rows.push(SweepRow { imputer: imputer.name(), parameter: obs as f64, report });
        }
    }
    Ok(table)
}
