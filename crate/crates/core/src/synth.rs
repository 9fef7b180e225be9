//! Synthetic dataset generators for tests, examples, and benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Array;
use crate::dataset::{Dataset, SeriesSample, Split, TimeGrid};
use crate::scalar::Scalar;
use crate::seed::derive;

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Assign train/validation/test labels 70/10/20 by seeded shuffle.
fn split_labels(count: usize, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "synth-splits", 0));
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);
    let n_test = count / 5;
    let n_val = count / 10;
    let mut labels = vec![Split::Train; count];
    for &i in order.iter().take(n_test) {
        labels[i] = Split::Test;
    }
    for &i in order.iter().skip(n_test).take(n_val) {
        labels[i] = Split::Validation;
    }
    labels
}

fn build_dataset<F: Scalar>(
    values: Vec<Vec<f64>>,
    masks: Vec<Vec<f64>>,
    n: usize,
    d: usize,
    seed: u64,
) -> Dataset<F> {
    let times: Vec<F> = (0..n).map(|i| F::c(i as f64)).collect();
    let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    let samples: Vec<SeriesSample<F>> = values
        .into_iter()
        .zip(masks)
        .enumerate()
        .map(|(k, (v, m))| {
            SeriesSample::new(
                format!("s{k}"),
                Array::from_vec(vec![n, d], v.into_iter().map(F::c).collect()),
                Array::from_vec(vec![n, d], m.into_iter().map(F::c).collect()),
                TimeGrid::new(times.clone()).unwrap(),
                0,
                names.clone(),
            )
            .expect("well-formed synthetic sample")
        })
        .collect();
    let labels = split_labels(samples.len(), seed);
    Dataset::from_samples(samples, labels).expect("aligned synthetic samples")
}

/// Noisy coupled sinusoids: every feature is a phase-shifted, scaled view
/// of one per-sample latent oscillation, with MCAR deletion applied to
/// the target feature. Unnormalized; the target is feature 0.
pub fn coupled_sinusoids<F: Scalar>(
    n_samples: usize,
    n: usize,
    d: usize,
    noise_sd: f64,
    target_missing_rate: f64,
    seed: u64,
) -> Dataset<F> {
    let mut feat_rng = ChaCha8Rng::seed_from_u64(derive(seed, "synth-features", 0));
    let amps: Vec<f64> = (0..d).map(|_| feat_rng.gen_range(0.8..1.5)).collect();
    let shifts: Vec<f64> = (0..d).map(|j| j as f64 * 0.9 + feat_rng.gen_range(-0.2..0.2)).collect();
    let offsets: Vec<f64> = (0..d).map(|_| feat_rng.gen_range(-0.5..0.5)).collect();

    let mut values = Vec::with_capacity(n_samples);
    let mut masks = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "synth-sample", k as u64));
        let freq = rng.gen_range(0.05..0.11);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let mut v = Vec::with_capacity(n * d);
        let mut m = vec![1.0f64; n * d];
        for i in 0..n {
            for j in 0..d {
                let angle = std::f64::consts::TAU * freq * (i as f64 + shifts[j]) + phase;
                v.push(amps[j] * angle.sin() + offsets[j] + noise_sd * standard_normal(&mut rng));
            }
        }
        let mut observed = 0;
        for i in 0..n {
            if rng.gen_bool(target_missing_rate) {
                m[i * d] = 0.0;
            } else {
                observed += 1;
            }
        }
        if observed == 0 {
            m[0] = 1.0;
        }
        values.push(v);
        masks.push(m);
    }
    build_dataset(values, masks, n, d, seed)
}

/// Autoregressive latent series around a persistent per-sample level:
/// `z_t = level + w_t` with `w_{t+1} = phi w_t + sqrt(1 - phi^2) e`.
/// Features are scaled copies of `z` plus observation noise.
pub fn ar1_series<F: Scalar>(
    n_samples: usize,
    n: usize,
    d: usize,
    phi: f64,
    level_sd: f64,
    noise_sd: f64,
    target_missing_rate: f64,
    seed: u64,
) -> Dataset<F> {
    let mut feat_rng = ChaCha8Rng::seed_from_u64(derive(seed, "synth-ar1-features", 0));
    let coeffs: Vec<f64> =
        (0..d).map(|j| if j == 0 { 1.0 } else { feat_rng.gen_range(0.6..1.4) }).collect();
    let innovation = (1.0 - phi * phi).sqrt();

    let mut values = Vec::with_capacity(n_samples);
    let mut masks = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "synth-ar1-sample", k as u64));
        let level = level_sd * standard_normal(&mut rng);
        let mut w = standard_normal(&mut rng);
        let mut v = Vec::with_capacity(n * d);
        let mut m = vec![1.0f64; n * d];
        for _ in 0..n {
            for &c in coeffs.iter() {
                v.push(c * (level + w) + noise_sd * standard_normal(&mut rng));
            }
            w = phi * w + innovation * standard_normal(&mut rng);
        }
        let mut observed = 0;
        for i in 0..n {
            if rng.gen_bool(target_missing_rate) {
                m[i * d] = 0.0;
            } else {
                observed += 1;
            }
        }
        if observed == 0 {
            m[0] = 1.0;
        }
        values.push(v);
        masks.push(m);
    }
    build_dataset(values, masks, n, d, seed)
}
