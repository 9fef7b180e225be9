//! Series ingestion: alignment, padding, masks, time gaps, normalization.

pub mod air_quality;
pub mod file;
pub mod long_csv;

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered observation timestamps of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<F> {
    timestamps: Vec<F>,
}

impl<F: Scalar> TimeGrid<F> {
    /// Timestamps must be strictly increasing with at least two points.
    pub fn new(timestamps: Vec<F>) -> Result<Self> {
        if timestamps.len() < 2 {
            return Err(Error::Data(format!(
                "time grid needs at least 2 points, got {}",
                timestamps.len()
            )));
        }
        for w in timestamps.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { timestamps })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn at(&self, i: usize) -> F {
        self.timestamps[i]
    }

    pub fn timestamps(&self) -> &[F] {
        &self.timestamps
    }

    /// Time-reversed grid: gaps mirrored so the reversed grid is again
    /// strictly increasing and starts at zero.
    pub fn reversed(&self) -> Self {
        let last = *self.timestamps.last().expect("non-empty grid");
        let timestamps = self.timestamps.iter().rev().map(|&t| last - t).collect();
        Self { timestamps }
    }

    /// Mean spacing between consecutive timestamps.
    pub fn native_step(&self) -> F {
        let n = self.timestamps.len();
        (self.timestamps[n - 1] - self.timestamps[0]) / F::c((n - 1) as f64)
    }
}

/// One aligned multivariate series with missingness bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample<F> {
    pub id: String,
    /// `[n, d]`; entries with mask 0 are stored as 0.
    pub values: Array<F>,
    /// `[n, d]` of {0, 1}; 1 = observed.
    pub mask: Array<F>,
    /// `[n, d]` time since the previous observation, scanning forward.
    pub delta_fwd: Array<F>,
    /// `[n, d]` time until the next observation, scanning backward.
    pub delta_bwd: Array<F>,
    pub grid: TimeGrid<F>,
    pub target_index: usize,
    pub feature_names: Vec<String>,
}

impl<F: Scalar> SeriesSample<F> {
    /// Build a sample from values/mask/grid; deltas are derived here and
    /// masked-out values are forced to zero.
    pub fn new(
        id: String,
        mut values: Array<F>,
        mask: Array<F>,
        grid: TimeGrid<F>,
        target_index: usize,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = grid.len();
        if values.shape() != mask.shape() || values.shape()[0] != n {
            return Err(Error::Data(format!(
                "sample {id}: values {:?}, mask {:?}, grid length {n} disagree",
                values.shape(),
                mask.shape()
            )));
        }
        let d = values.shape()[1];
        if target_index >= d {
            return Err(Error::Data(format!(
                "sample {id}: target index {target_index} out of {d} features"
            )));
        }
        for (v, &m) in values.data_mut().iter_mut().zip(mask.data()) {
            if m != F::one() && m != F::zero() {
                return Err(Error::Data(format!("sample {id}: non-binary mask entry {m}")));
            }
            if m == F::zero() {
                *v = F::zero();
            }
        }
        let (delta_fwd, delta_bwd) = compute_deltas(&mask, &grid);
        Ok(Self { id, values, mask, delta_fwd, delta_bwd, grid, target_index, feature_names })
    }

    pub fn n(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn d(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn target_values(&self) -> Vec<F> {
        (0..self.n()).map(|i| self.values.at(i, self.target_index)).collect()
    }

    pub fn target_mask(&self) -> Vec<F> {
        (0..self.n()).map(|i| self.mask.at(i, self.target_index)).collect()
    }

    pub fn observed_target_count(&self) -> usize {
        self.target_mask().iter().filter(|&&m| m == F::one()).count()
    }

    /// Recompute both delta matrices from the current mask and grid.
    pub fn recompute_deltas(&mut self) {
        let (f, b) = compute_deltas(&self.mask, &self.grid);
        self.delta_fwd = f;
        self.delta_bwd = b;
    }
}

/// Split label of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub fn code(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Validation => 1,
            Split::Test => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Split::Train),
            1 => Ok(Split::Validation),
            2 => Ok(Split::Test),
            other => Err(Error::Format(format!("unknown split code {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

/// Per-feature z-scoring statistics fitted on observed train entries.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<F> {
    pub mean: Vec<F>,
    pub std: Vec<F>,
}

/// A collection of aligned samples plus split labels and normalization.
#[derive(Debug, Clone)]
pub struct Dataset<F> {
    pub samples: Vec<SeriesSample<F>>,
    pub splits: Vec<Split>,
    pub norm: Option<NormStats<F>>,
    pub feature_names: Vec<String>,
    pub target_index: usize,
    /// Features removed by `normalize` for zero train variance.
    pub dropped_features: Vec<String>,
}

impl<F: Scalar> Dataset<F> {
    /// Assemble a dataset, checking that all samples share `n` and `d`.
    pub fn from_samples(samples: Vec<SeriesSample<F>>, splits: Vec<Split>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Data("no samples".into()));
        }
        if samples.len() != splits.len() {
            return Err(Error::Data("split labels do not cover the samples".into()));
        }
        let n = samples[0].n();
        let d = samples[0].d();
        let target_index = samples[0].target_index;
        let feature_names = samples[0].feature_names.clone();
        for s in &samples {
            if s.n() != n || s.d() != d {
                return Err(Error::Data(format!(
                    "sample {} has shape {}x{}, expected {n}x{d}",
                    s.id,
                    s.n(),
                    s.d()
                )));
            }
            if s.target_index != target_index {
                return Err(Error::Data("samples disagree on the target feature".into()));
            }
        }
        Ok(Self { samples, splits, norm: None, feature_names, target_index, dropped_features: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.samples[0].n()
    }

    pub fn d(&self) -> usize {
        self.samples[0].d()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn indices_of(&self, split: Split) -> Vec<usize> {
        (0..self.samples.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn samples_of(&self, split: Split) -> Vec<&SeriesSample<F>> {
        self.samples
            .iter()
            .zip(&self.splits)
            .filter(|(_, &sp)| sp == split)
            .map(|(s, _)| s)
            .collect()
    }

    /// New dataset containing the chosen samples with the given labels,
    /// sharing this dataset's normalization.
    pub fn subset(&self, indices: &[usize], labels: Vec<Split>) -> Result<Self> {
        let samples: Vec<_> = indices.iter().map(|&i| self.samples[i].clone()).collect();
        let mut out = Self::from_samples(samples, labels)?;
        out.norm = self.norm.clone();
        out.dropped_features = self.dropped_features.clone();
        Ok(out)
    }

    /// Map a normalized target value back to original units.
    pub fn denormalize_target(&self, v: F) -> F {
        match &self.norm {
            Some(norm) => v * norm.std[self.target_index] + norm.mean[self.target_index],
            None => v,
        }
    }

    pub fn normalize_target(&self, v: F) -> F {
        match &self.norm {
            Some(norm) => (v - norm.mean[self.target_index]) / norm.std[self.target_index],
            None => v,
        }
    }
}

/// Forward/backward time-gap matrices from a mask and grid.
///
/// Forward: 0 at step 0; `t_i - t_{i-1}` when step `i-1` was observed for
/// that feature; the accumulated gap otherwise. Backward: the same
/// recurrence on the time-reversed sample, re-reversed.
pub fn compute_deltas<F: Scalar>(mask: &Array<F>, grid: &TimeGrid<F>) -> (Array<F>, Array<F>) {
    let fwd = forward_deltas(mask, grid);
    let rev_mask = reverse_rows(mask);
    let rev = forward_deltas(&rev_mask, &grid.reversed());
    let bwd = reverse_rows(&rev);
    (fwd, bwd)
}

fn forward_deltas<F: Scalar>(mask: &Array<F>, grid: &TimeGrid<F>) -> Array<F> {
    let (n, d) = (mask.shape()[0], mask.shape()[1]);
    let mut delta = Array::zeros(vec![n, d]);
    for j in 0..d {
        for i in 1..n {
            let gap = grid.at(i) - grid.at(i - 1);
            let v = if mask.at(i - 1, j) == F::one() {
                gap
            } else {
                delta.at(i - 1, j) + gap
            };
            delta.set(i, j, v);
        }
    }
    delta
}

fn reverse_rows<F: Scalar>(m: &Array<F>) -> Array<F> {
    let (n, d) = (m.shape()[0], m.shape()[1]);
    let mut out = Array::zeros(vec![n, d]);
    for i in 0..n {
        for j in 0..d {
            out.set(i, j, m.at(n - 1 - i, j));
        }
    }
    out
}

/// Extend shorter samples to length `n` with zero-valued, mask-0 tail
/// rows; the grid grows by each sample's native step and deltas are
/// recomputed across the pad.
pub fn pad_and_align<F: Scalar>(samples: Vec<SeriesSample<F>>, n: usize) -> Result<Vec<SeriesSample<F>>> {
    samples
        .into_iter()
        .map(|s| {
            if s.n() > n {
                return Err(Error::Data(format!(
                    "sample {} has length {} > target {n}",
                    s.id,
                    s.n()
                )));
            }
            if s.n() == n {
                return Ok(s);
            }
            let d = s.d();
            let old_n = s.n();
            let step = s.grid.native_step();
            let mut values = Vec::with_capacity(n * d);
            let mut mask = Vec::with_capacity(n * d);
            values.extend_from_slice(s.values.data());
            mask.extend_from_slice(s.mask.data());
            values.resize(n * d, F::zero());
            mask.resize(n * d, F::zero());
            let mut times = s.grid.timestamps().to_vec();
            let last = times[old_n - 1];
            for k in 1..=(n - old_n) {
                times.push(last + step * F::c(k as f64));
            }
            SeriesSample::new(
                s.id,
                Array::from_vec(vec![n, d], values),
                Array::from_vec(vec![n, d], mask),
                TimeGrid::new(times)?,
                s.target_index,
                s.feature_names,
            )
        })
        .collect()
}

/// Fit z-scoring stats on the train split and scale observed entries in
/// place. Features with zero train variance are dropped (recorded in
/// `dropped_features`); missing entries stay zero, which equals the train
/// mean after scaling.
pub fn normalize<F: Scalar>(mut dataset: Dataset<F>) -> Result<Dataset<F>> {
    if dataset.norm.is_some() {
        return Err(Error::Data("dataset is already normalized".into()));
    }
    let d = dataset.d();
    let mut count = vec![0u64; d];
    let mut sum = vec![F::zero(); d];
    for (s, &sp) in dataset.samples.iter().zip(&dataset.splits) {
        if sp != Split::Train {
            continue;
        }
        for i in 0..s.n() {
            for j in 0..d {
                if s.mask.at(i, j) == F::one() {
                    count[j] += 1;
                    sum[j] += s.values.at(i, j);
                }
            }
        }
    }
    let mean: Vec<F> =
        (0..d).map(|j| if count[j] > 0 { sum[j] / F::c(count[j] as f64) } else { F::zero() }).collect();
    let mut sq = vec![F::zero(); d];
    for (s, &sp) in dataset.samples.iter().zip(&dataset.splits) {
        if sp != Split::Train {
            continue;
        }
        for i in 0..s.n() {
            for j in 0..d {
                if s.mask.at(i, j) == F::one() {
                    let dv = s.values.at(i, j) - mean[j];
                    sq[j] += dv * dv;
                }
            }
        }
    }
    let std: Vec<F> = (0..d)
        .map(|j| if count[j] > 0 { (sq[j] / F::c(count[j] as f64)).sqrt() } else { F::zero() })
        .collect();

    let keep: Vec<usize> = (0..d).filter(|&j| count[j] > 0 && std[j] > F::zero()).collect();
    let dropped: Vec<String> = (0..d)
        .filter(|j| !keep.contains(j))
        .map(|j| dataset.feature_names[j].clone())
        .collect();
    if !keep.contains(&dataset.target_index) {
        return Err(Error::Data(format!(
            "target feature {} has no train-split variance",
            dataset.feature_names[dataset.target_index]
        )));
    }

    let new_target = keep.iter().position(|&j| j == dataset.target_index).expect("target kept");
    let new_names: Vec<String> = keep.iter().map(|&j| dataset.feature_names[j].clone()).collect();

    for s in &mut dataset.samples {
        let n = s.n();
        let mut values = Vec::with_capacity(n * keep.len());
        let mut mask_v = Vec::with_capacity(n * keep.len());
        for i in 0..n {
            for &j in &keep {
                let m = s.mask.at(i, j);
                let v = if m == F::one() { (s.values.at(i, j) - mean[j]) / std[j] } else { F::zero() };
                values.push(v);
                mask_v.push(m);
            }
        }
        *s = SeriesSample::new(
            std::mem::take(&mut s.id),
            Array::from_vec(vec![n, keep.len()], values),
            Array::from_vec(vec![n, keep.len()], mask_v),
            s.grid.clone(),
            new_target,
            new_names.clone(),
        )?;
    }
    dataset.norm = Some(NormStats {
        mean: keep.iter().map(|&j| mean[j]).collect(),
        std: keep.iter().map(|&j| std[j]).collect(),
    });
    dataset.feature_names = new_names;
    dataset.target_index = new_target;
    dataset.dropped_features = dropped;
    Ok(dataset)
}
