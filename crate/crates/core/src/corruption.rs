//! Test-time corruption: randomly delete observed target entries
//! (imputation setting) or delete everything past an observation window
//! (prediction setting), keeping an evaluation mask and the ground truth.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::SeriesSample;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which deletion protocol produced a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    /// Delete a fraction of the observed target entries at random.
    Imputation { rate: f64 },
    /// Delete every observed target entry at steps >= the window length.
    Prediction { observation_len: usize },
}

impl Setting {
    pub fn describe(&self) -> String {
        match self {
            Setting::Imputation { rate } => format!("imputation(rate={rate})"),
            Setting::Prediction { observation_len } => {
                format!("prediction(obs_len={observation_len})")
            }
        }
    }
}

/// A corrupted sample plus the bookkeeping needed to score it.
#[derive(Debug, Clone)]
pub struct CorruptionPlan<F> {
    pub setting: Setting,
    pub seed: u64,
    /// The sample with deleted entries masked out and deltas recomputed.
    pub corrupted: SeriesSample<F>,
    /// Target-column evaluation mask, length n; 1 marks a deleted entry.
    pub eval_mask: Vec<F>,
    /// Pre-corruption target values (ground truth for eval entries).
    pub truth: Vec<F>,
    /// Set when a prediction window contained nothing to delete.
    pub empty_eval: bool,
}

impl<F: Scalar> CorruptionPlan<F> {
    pub fn eval_count(&self) -> usize {
        self.eval_mask.iter().filter(|&&m| m == F::one()).count()
    }

    /// Deleted timesteps in increasing order.
    pub fn deleted_steps(&self) -> Vec<usize> {
        (0..self.eval_mask.len()).filter(|&i| self.eval_mask[i] == F::one()).collect()
    }
}

/// Delete `round(rate * observed)` observed target entries uniformly at
/// random; deterministic for a given seed.
pub fn corrupt_imputation<F: Scalar>(
    sample: &SeriesSample<F>,
    rate: f64,
    seed: u64,
) -> Result<CorruptionPlan<F>> {
    if !(0.0..1.0).contains(&rate) || rate.is_nan() {
        return Err(Error::Data(format!("imputation rate {rate} outside [0, 1)")));
    }
    let observed = observed_target_steps(sample);
    if observed.is_empty() {
        return Err(Error::Data(format!("sample {} has no observed target entry", sample.id)));
    }
    // Round half up.
    let count = (rate * observed.len() as f64 + 0.5).floor() as usize;
    if count >= observed.len() && count > 0 {
        return Err(Error::Data(format!(
            "rate {rate} would delete all {} observed target entries of sample {}",
            observed.len(),
            sample.id
        )));
    }
    let mut pool = observed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let mut chosen: Vec<usize> = pool.into_iter().take(count).collect();
    chosen.sort_unstable();
    Ok(apply_deletion(sample, &chosen, Setting::Imputation { rate }, seed, false))
}

/// Delete every observed target entry at timestep >= `observation_len`.
pub fn corrupt_prediction<F: Scalar>(
    sample: &SeriesSample<F>,
    observation_len: usize,
) -> Result<CorruptionPlan<F>> {
    let n = sample.n();
    if observation_len == 0 || observation_len >= n {
        return Err(Error::Data(format!(
            "observation window {observation_len} outside (0, {n})"
        )));
    }
    let chosen: Vec<usize> =
        observed_target_steps(sample).into_iter().filter(|&i| i >= observation_len).collect();
    let empty = chosen.is_empty();
    Ok(apply_deletion(
        sample,
        &chosen,
        Setting::Prediction { observation_len },
        0,
        empty,
    ))
}

/// A plan that deletes nothing: the sample passes through untouched and
/// the evaluation mask is empty. Used when a command runs the model over
/// data without holding anything out.
pub fn passthrough_plan<F: Scalar>(
    sample: &SeriesSample<F>,
    setting: Setting,
    seed: u64,
) -> CorruptionPlan<F> {
    apply_deletion(sample, &[], setting, seed, true)
}

fn observed_target_steps<F: Scalar>(sample: &SeriesSample<F>) -> Vec<usize> {
    let t = sample.target_index;
    (0..sample.n()).filter(|&i| sample.mask.at(i, t) == F::one()).collect()
}

fn apply_deletion<F: Scalar>(
    sample: &SeriesSample<F>,
    steps: &[usize],
    setting: Setting,
    seed: u64,
    empty_eval: bool,
) -> CorruptionPlan<F> {
    let truth = sample.target_values();
    let mut corrupted = sample.clone();
    let t = corrupted.target_index;
    let mut eval_mask = vec![F::zero(); sample.n()];
    for &i in steps {
        eval_mask[i] = F::one();
        corrupted.mask.set(i, t, F::zero());
        corrupted.values.set(i, t, F::zero());
    }
    corrupted.recompute_deltas();
    CorruptionPlan { setting, seed, corrupted, eval_mask, truth, empty_eval }
}

/// Plain-text form of a plan: sample id, setting, seed, and the deleted
/// (time, feature) pairs, one plan per block.
pub fn plan_to_text<F: Scalar>(plan: &CorruptionPlan<F>) -> String {
    let mut out = String::new();
    out.push_str(&format!("sample = {}\n", plan.corrupted.id));
    out.push_str(&format!("setting = {}\n", plan.setting.describe()));
    out.push_str(&format!("seed = {}\n", plan.seed));
    let pairs: Vec<String> = plan
        .deleted_steps()
        .iter()
        .map(|&i| format!("({},{})", i, plan.corrupted.target_index))
        .collect();
    out.push_str(&format!("deleted = {}\n", pairs.join(" ")));
    out
}

/// Rebuild a plan from its text form plus the original sample it names.
pub fn plan_from_text<F: Scalar>(
    text: &str,
    sample: &SeriesSample<F>,
) -> Result<CorruptionPlan<F>> {
    let mut id = None;
    let mut setting = None;
    let mut seed = 0u64;
    let mut steps: Vec<usize> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno + 1,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "sample" => id = Some(value.to_string()),
            "seed" => {
                seed = value.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad seed {value:?}"),
                })?
            }
            "setting" => setting = Some(parse_setting(value, lineno + 1)?),
            "deleted" => {
                for pair in value.split_whitespace() {
                    let inner = pair.trim_start_matches('(').trim_end_matches(')');
                    let (i, _feature) = inner.split_once(',').ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad pair {pair:?}"),
                    })?;
                    steps.push(i.parse().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("bad timestep in {pair:?}"),
                    })?);
                }
            }
            other => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("unknown plan key {other:?}"),
                })
            }
        }
    }
    let id = id.ok_or_else(|| Error::Data("plan has no sample id".into()))?;
    if id != sample.id {
        return Err(Error::Data(format!("plan names sample {id:?}, given {:?}", sample.id)));
    }
    let setting = setting.ok_or_else(|| Error::Data("plan has no setting".into()))?;
    let empty = steps.is_empty() && matches!(setting, Setting::Prediction { .. });
    Ok(apply_deletion(sample, &steps, setting, seed, empty))
}

fn parse_setting(value: &str, line: usize) -> Result<Setting> {
    let bad = || Error::Parse { line, message: format!("bad setting {value:?}") };
    if let Some(rest) = value.strip_prefix("imputation(rate=") {
        let rate = rest.strip_suffix(')').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Ok(Setting::Imputation { rate })
    } else if let Some(rest) = value.strip_prefix("prediction(obs_len=") {
        let len = rest.strip_suffix(')').ok_or_else(bad)?.parse().map_err(|_| bad())?;
        Ok(Setting::Prediction { observation_len: len })
    } else {
        Err(bad())
    }
}
