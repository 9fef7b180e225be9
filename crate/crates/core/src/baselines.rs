//! Reference imputers evaluated under the same corruption plans as the
//! recurrent model: mean fill, missing-aware KNN, an iterative
//! chained-equations imputer, and time interpolation as an extra.

use crate::corruption::CorruptionPlan;
use crate::dataset::{Dataset, SeriesSample, Split};
use crate::error::{Error, Result};
use crate::evaluation::Imputer;
use crate::scalar::Scalar;

fn train_samples<F: Scalar>(dataset: &Dataset<F>) -> Vec<&SeriesSample<F>> {
    dataset.samples_of(Split::Train)
}

fn observed_target_mean<F: Scalar>(train: &[&SeriesSample<F>]) -> Result<F> {
    let mut sum = F::zero();
    let mut count = 0u64;
    for s in train {
        let t = s.target_index;
        for i in 0..s.n() {
            if s.mask.at(i, t) == F::one() {
                sum += s.values.at(i, t);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Data("target feature has no observed train entry".into()));
    }
    Ok(sum / F::c(count as f64))
}

/// Fill every missing target cell with the observed train mean.
#[derive(Debug, Default)]
pub struct MeanImputer<F> {
    fill: Option<F>,
}

impl<F: Scalar> MeanImputer<F> {
    pub fn new() -> Self {
        Self { fill: None }
    }
}

impl<F: Scalar> Imputer<F> for MeanImputer<F> {
    fn name(&self) -> String {
        "mean".into()
    }

    fn fit(&mut self, train: &Dataset<F>) -> Result<()> {
        self.fill = Some(observed_target_mean(&train_samples(train))?);
        Ok(())
    }

    fn impute(&self, plan: &CorruptionPlan<F>) -> Result<Vec<F>> {
        let fill = self.fill.ok_or_else(|| Error::Data("mean imputer not fitted".into()))?;
        let s = &plan.corrupted;
        let t = s.target_index;
        Ok((0..s.n())
            .map(|i| if s.mask.at(i, t) == F::one() { s.values.at(i, t) } else { fill })
            .collect())
    }
}

/// Missing-aware nearest neighbors: distances average squared differences
/// over cells observed in both samples; fills average the k nearest
/// neighbors that observe the queried cell.
pub struct KnnImputer<F> {
    pub k: usize,
    pool: Vec<SeriesSample<F>>,
    fallback: Option<F>,
    warnings: Vec<String>,
}

impl<F: Scalar> KnnImputer<F> {
    pub fn new(k: usize) -> Self {
        Self { k, pool: Vec::new(), fallback: None, warnings: Vec::new() }
    }
}

/// Mean squared difference over mutually observed cells, then the root;
/// incomparable pairs (no overlap) sort last.
fn missing_aware_distance<F: Scalar>(a: &SeriesSample<F>, b: &SeriesSample<F>) -> f64 {
    let mut sum = 0.0;
    let mut overlap = 0usize;
    for i in 0..a.n() {
        for j in 0..a.d() {
            if a.mask.at(i, j) == F::one() && b.mask.at(i, j) == F::one() {
                let diff = (a.values.at(i, j) - b.values.at(i, j)).f64();
                sum += diff * diff;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        f64::INFINITY
    } else {
        (sum / overlap as f64).sqrt()
    }
}

impl<F: Scalar> Imputer<F> for KnnImputer<F> {
    fn name(&self) -> String {
        "knn".into()
    }

    fn fit(&mut self, train: &Dataset<F>) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Data("knn needs k >= 1".into()));
        }
        let samples = train_samples(train);
        self.fallback = Some(observed_target_mean(&samples)?);
        self.pool = samples.into_iter().cloned().collect();
        self.warnings.clear();
        if self.k > self.pool.len() {
            self.warnings.push(format!(
                "k={} exceeds the candidate pool of {}; using every candidate",
                self.k,
                self.pool.len()
            ));
        }
        Ok(())
    }

    fn impute(&self, plan: &CorruptionPlan<F>) -> Result<Vec<F>> {
        let fallback =
            self.fallback.ok_or_else(|| Error::Data("knn imputer not fitted".into()))?;
        let s = &plan.corrupted;
        let t = s.target_index;
        // Rank candidates once per sample; ties break by pool order.
        let mut ranked: Vec<(f64, usize)> = self
            .pool
            .iter()
            .enumerate()
            .map(|(idx, cand)| (missing_aware_distance(s, cand), idx))
            .collect();
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));

        let mut out = Vec::with_capacity(s.n());
        for i in 0..s.n() {
            if s.mask.at(i, t) == F::one() {
                out.push(s.values.at(i, t));
                continue;
            }
            let mut sum = F::zero();
            let mut taken = 0usize;
            for &(dist, idx) in &ranked {
                if dist.is_infinite() {
                    break;
                }
                let cand = &self.pool[idx];
                if cand.mask.at(i, t) == F::one() {
                    sum += cand.values.at(i, t);
                    taken += 1;
                    if taken == self.k {
                        break;
                    }
                }
            }
            out.push(if taken == 0 { fallback } else { sum / F::c(taken as f64) });
        }
        Ok(out)
    }

    fn warnings(&self) -> Vec<String> {
        self.warnings.clone()
    }
}

/// Chained-equations imputer: timesteps become rows, features columns;
/// each iteration regresses every incomplete column on the others and
/// overwrites its missing cells with the predictions.
pub struct MiceImputer<F> {
    pub n_iter: usize,
    ridge: f64,
    rows: Vec<Vec<F>>,
    row_mask: Vec<Vec<bool>>,
    pub used_ridge_fallback: bool,
}

impl<F: Scalar> MiceImputer<F> {
    pub fn new(n_iter: usize) -> Self {
        Self { n_iter, ridge: 1e-6, rows: Vec::new(), row_mask: Vec::new(), used_ridge_fallback: false }
    }
}

/// Solve the normal equations by Gaussian elimination; `None` when the
/// system is numerically singular.
fn solve_normal(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Least-squares fit of `y ~ predictors + intercept` with a ridge retry.
fn fit_column(
    predictors: &[Vec<f64>],
    y: &[f64],
    ridge: f64,
) -> (Vec<f64>, bool) {
    let p = predictors[0].len() + 1;
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (row, &target) in predictors.iter().zip(y) {
        let mut ext = Vec::with_capacity(p);
        ext.push(1.0);
        ext.extend_from_slice(row);
        for i in 0..p {
            for j in 0..p {
                xtx[i][j] += ext[i] * ext[j];
            }
            xty[i] += ext[i] * target;
        }
    }
    if let Some(beta) = solve_normal(xtx.clone(), xty.clone()) {
        return (beta, false);
    }
    for (i, row) in xtx.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let beta = solve_normal(xtx, xty).expect("ridge-regularized system is nonsingular");
    (beta, true)
}

impl<F: Scalar> Imputer<F> for MiceImputer<F> {
    fn name(&self) -> String {
        "mice".into()
    }

    fn fit(&mut self, train: &Dataset<F>) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::Data("mice needs n_iter >= 1".into()));
        }
        self.rows.clear();
        self.row_mask.clear();
        for s in train_samples(train) {
            for i in 0..s.n() {
                self.rows.push((0..s.d()).map(|j| s.values.at(i, j)).collect());
                self.row_mask.push((0..s.d()).map(|j| s.mask.at(i, j) == F::one()).collect());
            }
        }
        if self.rows.is_empty() {
            return Err(Error::Data("mice has no train rows".into()));
        }
        Ok(())
    }

    fn impute(&self, plan: &CorruptionPlan<F>) -> Result<Vec<F>> {
        if self.rows.is_empty() {
            return Err(Error::Data("mice imputer not fitted".into()));
        }
        let s = &plan.corrupted;
        let d = s.d();
        let t = s.target_index;

        // Matrix = train rows plus this sample's rows, f64 workspace.
        let mut values: Vec<Vec<f64>> =
            self.rows.iter().map(|r| r.iter().map(|v| v.f64()).collect()).collect();
        let mut observed: Vec<Vec<bool>> = self.row_mask.clone();
        let sample_base = values.len();
        for i in 0..s.n() {
            values.push((0..d).map(|j| s.values.at(i, j).f64()).collect());
            observed.push((0..d).map(|j| s.mask.at(i, j) == F::one()).collect());
        }

        // Column means over observed cells initialize the missing cells.
        for j in 0..d {
            let mut sum = 0.0;
            let mut count = 0usize;
            for (row, obs) in values.iter().zip(&observed) {
                if obs[j] {
                    sum += row[j];
                    count += 1;
                }
            }
            let mean = if count > 0 { sum / count as f64 } else { 0.0 };
            for (row, obs) in values.iter_mut().zip(&observed) {
                if !obs[j] {
                    row[j] = mean;
                }
            }
        }

        let incomplete: Vec<usize> =
            (0..d).filter(|&j| observed.iter().any(|o| !o[j])).collect();
        for _ in 0..self.n_iter {
            for &j in &incomplete {
                let mut predictors = Vec::new();
                let mut y = Vec::new();
                for (row, obs) in values.iter().zip(&observed) {
                    if obs[j] {
                        let others: Vec<f64> = (0..d).filter(|&c| c != j).map(|c| row[c]).collect();
                        predictors.push(others);
                        y.push(row[j]);
                    }
                }
                if y.is_empty() {
                    continue;
                }
                let (beta, _ridge_used) = fit_column(&predictors, &y, self.ridge);
                for (row, obs) in values.iter_mut().zip(&observed) {
                    if !obs[j] {
                        let mut pred = beta[0];
                        let mut bi = 1;
                        for c in 0..d {
                            if c != j {
                                pred += beta[bi] * row[c];
                                bi += 1;
                            }
                        }
                        row[j] = pred;
                    }
                }
            }
        }

        Ok((0..s.n())
            .map(|i| {
                if s.mask.at(i, t) == F::one() {
                    s.values.at(i, t)
                } else {
                    F::c(values[sample_base + i][t])
                }
            })
            .collect())
    }
}

/// Linear interpolation of the target along time; boundary gaps carry the
/// nearest observation, fully-missing series fall back to the train mean.
pub struct InterpolationImputer<F> {
    fallback: Option<F>,
}

impl<F: Scalar> InterpolationImputer<F> {
    pub fn new() -> Self {
        Self { fallback: None }
    }
}

impl<F: Scalar> Default for InterpolationImputer<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Imputer<F> for InterpolationImputer<F> {
    fn name(&self) -> String {
        "interp".into()
    }

    fn fit(&mut self, train: &Dataset<F>) -> Result<()> {
        self.fallback = Some(observed_target_mean(&train_samples(train))?);
        Ok(())
    }

    fn impute(&self, plan: &CorruptionPlan<F>) -> Result<Vec<F>> {
        let fallback =
            self.fallback.ok_or_else(|| Error::Data("interp imputer not fitted".into()))?;
        let s = &plan.corrupted;
        let t = s.target_index;
        let observed: Vec<usize> =
            (0..s.n()).filter(|&i| s.mask.at(i, t) == F::one()).collect();
        let mut out = Vec::with_capacity(s.n());
        for i in 0..s.n() {
            if s.mask.at(i, t) == F::one() {
                out.push(s.values.at(i, t));
                continue;
            }
            let before = observed.iter().rev().find(|&&o| o < i).copied();
            let after = observed.iter().find(|&&o| o > i).copied();
            out.push(match (before, after) {
                (Some(a), Some(b)) => {
                    let (ta, tb, ti) = (s.grid.at(a), s.grid.at(b), s.grid.at(i));
                    let w = (ti - ta) / (tb - ta);
                    s.values.at(a, t) * (F::one() - w) + s.values.at(b, t) * w
                }
                (Some(a), None) => s.values.at(a, t),
                (None, Some(b)) => s.values.at(b, t),
                (None, None) => fallback,
            });
        }
        Ok(out)
    }
}
