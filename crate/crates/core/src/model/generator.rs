//! The bidirectional generator: decayed recurrent unrolls in both time
//! directions, a regression head per direction, a learned combination of
//! the two estimates, and observed-value replacement.
//!
//! At step i each direction first emits its estimate from the carried
//! hidden state (the estimate never sees step i's input), then feeds the
//! estimate back in place of a missing target value, decays the hidden
//! state by the gap-driven factor, and applies the cell update.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Array, Tape, Var};
use crate::dataset::SeriesSample;
use crate::error::Result;
use crate::model::cell::{decay, CellBinding, CellKind, CellParams, CellState};
use crate::scalar::Scalar;
use crate::seed::derive;

/// Initial decay-head bias: close enough to "no decay" that training
/// starts neutral, but strictly inside the max(0, .) kink so the decay
/// weights receive gradient from the first step.
pub const DECAY_BIAS_INIT: f64 = 0.1;

/// How forward and backward estimates are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    /// Gap-weighted sum (the learned combination).
    Weighted,
    /// Weighted sum rescaled so the weights sum to one.
    WeightedNormalized,
    /// Plain average; combination weights are left untrained.
    Mean,
}

/// One direction's trainable tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionParams<F> {
    pub cell: CellParams<F>,
    /// Regression head `[1, H]`.
    pub w_x: Array<F>,
    pub b_x: Array<F>,
    /// Hidden-state decay `[H, d]`.
    pub w_gamma: Array<F>,
    pub b_gamma: Array<F>,
    /// Combination weight head `[1, d]`.
    pub w_lambda: Array<F>,
    pub b_lambda: Array<F>,
}

impl<F: Scalar> DirectionParams<F> {
    fn init(kind: CellKind, hidden: usize, input: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let cell = CellParams::init(kind, hidden, input, rng);
        let mut draw = |shape: Vec<usize>| {
            let len = shape.iter().product();
            let data = (0..len).map(|_| F::c(rng.gen_range(-bound..bound))).collect();
            Array::from_vec(shape, data)
        };
        DirectionParams {
            cell,
            w_x: draw(vec![1, hidden]),
            b_x: draw(vec![1]),
            w_gamma: Array::zeros(vec![hidden, input]),
            b_gamma: Array::full(vec![hidden], F::c(DECAY_BIAS_INIT)),
            w_lambda: Array::zeros(vec![1, input]),
            b_lambda: Array::full(vec![1], F::c(DECAY_BIAS_INIT)),
        }
    }

    fn tensors(&self, prefix: &str, with_lambda: bool) -> Vec<(String, &Array<F>)> {
        let mut out = self.cell.tensors(prefix);
        out.push((format!("{prefix}.w_x"), &self.w_x));
        out.push((format!("{prefix}.b_x"), &self.b_x));
        out.push((format!("{prefix}.w_gamma"), &self.w_gamma));
        out.push((format!("{prefix}.b_gamma"), &self.b_gamma));
        if with_lambda {
            out.push((format!("{prefix}.w_lambda"), &self.w_lambda));
            out.push((format!("{prefix}.b_lambda"), &self.b_lambda));
        }
        out
    }

    fn tensors_mut(&mut self, prefix: &str, with_lambda: bool) -> Vec<(String, &mut Array<F>)> {
        let mut out = self.cell.tensors_mut(prefix);
        out.push((format!("{prefix}.w_x"), &mut self.w_x));
        out.push((format!("{prefix}.b_x"), &mut self.b_x));
        out.push((format!("{prefix}.w_gamma"), &mut self.w_gamma));
        out.push((format!("{prefix}.b_gamma"), &mut self.b_gamma));
        if with_lambda {
            out.push((format!("{prefix}.w_lambda"), &mut self.w_lambda));
            out.push((format!("{prefix}.b_lambda"), &mut self.b_lambda));
        }
        out
    }
}

/// All generator weights, forward and backward directions.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams<F> {
    pub fwd: DirectionParams<F>,
    pub bwd: DirectionParams<F>,
    pub hidden: usize,
    pub input_dim: usize,
}

impl<F: Scalar> GeneratorParams<F> {
    pub fn init(kind: CellKind, hidden: usize, input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "generator-init", 0));
        let fwd = DirectionParams::init(kind, hidden, input_dim, &mut rng);
        let bwd = DirectionParams::init(kind, hidden, input_dim, &mut rng);
        GeneratorParams { fwd, bwd, hidden, input_dim }
    }

    pub fn cell_kind(&self) -> CellKind {
        self.fwd.cell.kind()
    }

    /// Named tensors in the canonical optimizer/checkpoint order.
    pub fn tensors(&self, with_lambda: bool) -> Vec<(String, &Array<F>)> {
        let mut out = self.fwd.tensors("gen.fwd", with_lambda);
        out.extend(self.bwd.tensors("gen.bwd", with_lambda));
        out
    }

    pub fn tensors_mut(&mut self, with_lambda: bool) -> Vec<(String, &mut Array<F>)> {
        let mut out = self.fwd.tensors_mut("gen.fwd", with_lambda);
        out.extend(self.bwd.tensors_mut("gen.bwd", with_lambda));
        out
    }
}

struct DirectionBinding {
    cell: CellBinding,
    w_x: Var,
    b_x: Var,
    w_gamma: Var,
    b_gamma: Var,
    lambda: Option<(Var, Var)>,
}

impl DirectionBinding {
    fn bind<F: Scalar>(
        params: &DirectionParams<F>,
        tape: &mut Tape<F>,
        trainable: bool,
        with_lambda: bool,
    ) -> Self {
        let cell = params.cell.bind(tape, trainable);
        let mut put = |a: &Array<F>| {
            if trainable {
                tape.leaf(a.clone())
            } else {
                tape.constant(a.clone())
            }
        };
        DirectionBinding {
            cell,
            w_x: put(&params.w_x),
            b_x: put(&params.b_x),
            w_gamma: put(&params.w_gamma),
            b_gamma: put(&params.b_gamma),
            lambda: with_lambda.then(|| (put(&params.w_lambda), put(&params.b_lambda))),
        }
    }

    fn ordered_vars(&self) -> Vec<Var> {
        let mut out = self.cell.ordered_vars();
        out.extend([self.w_x, self.b_x, self.w_gamma, self.b_gamma]);
        if let Some((w, b)) = self.lambda {
            out.extend([w, b]);
        }
        out
    }
}

/// Tape handles for one generator forward pass.
pub struct GeneratorBinding {
    fwd: DirectionBinding,
    bwd: DirectionBinding,
    vars: Vec<Var>,
}

impl GeneratorBinding {
    /// Leaf vars aligned with `GeneratorParams::tensors` order.
    pub fn ordered_vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Per-step inputs of one unroll direction, already in unroll order.
struct StepInputs<F> {
    /// d-vector per step with the target slot holding `m * x`.
    base_rows: Vec<Vec<F>>,
    target_missing: Vec<bool>,
    delta_rows: Vec<Vec<F>>,
}

fn direction_inputs<F: Scalar>(sample: &SeriesSample<F>, reverse: bool) -> StepInputs<F> {
    let n = sample.n();
    let d = sample.d();
    let t = sample.target_index;
    let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
    let delta = if reverse { &sample.delta_bwd } else { &sample.delta_fwd };
    let mut base_rows = Vec::with_capacity(n);
    let mut target_missing = Vec::with_capacity(n);
    let mut delta_rows = Vec::with_capacity(n);
    for &i in &order {
        // Missing non-target features stay at their stored fill; only the
        // target feature is self-fed during the unroll.
        let row: Vec<F> = (0..d).map(|j| sample.values.at(i, j)).collect();
        base_rows.push(row);
        target_missing.push(sample.mask.at(i, t) == F::zero());
        delta_rows.push((0..d).map(|j| delta.at(i, j)).collect());
    }
    StepInputs { base_rows, target_missing, delta_rows }
}

/// Estimates and hidden states of one direction, in unroll order.
struct DirectionTrace {
    estimates: Vec<Var>,
    hidden: Vec<Var>,
}

fn unroll<F: Scalar>(
    tape: &mut Tape<F>,
    binding: &DirectionBinding,
    inputs: &StepInputs<F>,
    hidden: usize,
    target_index: usize,
) -> Result<DirectionTrace> {
    let n = inputs.base_rows.len();
    let d = inputs.base_rows.first().map_or(0, Vec::len);
    let mut state = binding.cell.initial_state(tape, hidden);
    let mut estimates = Vec::with_capacity(n);
    let mut hidden_states = Vec::with_capacity(n);
    // One-hot column injecting the scalar estimate into the target slot.
    let mut onehot = Array::zeros(vec![d, 1]);
    onehot.data_mut()[target_index] = F::one();
    for step in 0..n {
        // Estimate from the carried state, before consuming this step.
        let head = tape.matmul(binding.w_x, state.h)?;
        let est = tape.add(head, binding.b_x)?;
        let base = tape.constant(Array::vector(inputs.base_rows[step].clone()));
        let xbar = if inputs.target_missing[step] {
            let e = tape.constant(onehot.clone());
            let inject = tape.matmul(e, est)?;
            tape.add(base, inject)?
        } else {
            base
        };
        let gamma = decay(tape, binding.w_gamma, binding.b_gamma, &inputs.delta_rows[step])?;
        let decayed = tape.mul(state.h, gamma)?;
        state = binding.cell.step(tape, CellState { h: decayed, c: state.c }, xbar)?;
        estimates.push(est);
        hidden_states.push(state.h);
    }
    Ok(DirectionTrace { estimates, hidden: hidden_states })
}

/// Tape nodes produced by one generator forward pass. Per-step entries
/// are `[1]` scalars in original time order; stacked entries are `[n]`.
pub struct GeneratorPass {
    pub est_fwd_steps: Vec<Var>,
    pub est_bwd_steps: Vec<Var>,
    pub est_fwd: Var,
    pub est_bwd: Var,
    pub lambda_fwd: Var,
    pub lambda_bwd: Var,
    pub combined_steps: Vec<Var>,
    pub combined: Var,
    pub replaced_steps: Vec<Var>,
    pub replaced: Var,
    pub hidden_fwd: Vec<Var>,
    pub hidden_bwd: Vec<Var>,
}

/// Concrete (tape-free) view of a generator pass.
#[derive(Debug, Clone)]
pub struct GeneratorOutput<F> {
    pub est_fwd: Vec<F>,
    pub est_bwd: Vec<F>,
    pub lambda_fwd: Vec<F>,
    pub lambda_bwd: Vec<F>,
    pub combined: Vec<F>,
    pub replaced: Vec<F>,
    pub hidden_fwd: Array<F>,
    pub hidden_bwd: Array<F>,
}

/// The generator: parameters plus the combination mode in effect.
#[derive(Debug, Clone)]
pub struct Generator<F> {
    pub params: GeneratorParams<F>,
    pub combine: CombineMode,
}

impl<F: Scalar> Generator<F> {
    pub fn new(params: GeneratorParams<F>, combine: CombineMode) -> Self {
        Self { params, combine }
    }

    fn with_lambda(&self) -> bool {
        self.combine != CombineMode::Mean
    }

    pub fn bind(&self, tape: &mut Tape<F>, trainable: bool) -> GeneratorBinding {
        let with_lambda = self.with_lambda();
        let fwd = DirectionBinding::bind(&self.params.fwd, tape, trainable, with_lambda);
        let bwd = DirectionBinding::bind(&self.params.bwd, tape, trainable, with_lambda);
        let mut vars = fwd.ordered_vars();
        vars.extend(bwd.ordered_vars());
        GeneratorBinding { fwd, bwd, vars }
    }

    /// Unroll both directions, combine, and replace observed values.
    pub fn forward(
        &self,
        tape: &mut Tape<F>,
        binding: &GeneratorBinding,
        sample: &SeriesSample<F>,
    ) -> Result<GeneratorPass> {
        let n = sample.n();
        let t = sample.target_index;
        let hidden = self.params.hidden;

        let fwd_in = direction_inputs(sample, false);
        let fwd_trace = unroll(tape, &binding.fwd, &fwd_in, hidden, t)?;

        let bwd_in = direction_inputs(sample, true);
        let mut bwd_trace = unroll(tape, &binding.bwd, &bwd_in, hidden, t)?;
        bwd_trace.estimates.reverse();
        bwd_trace.hidden.reverse();

        // Combination weights from the gap rows of the (possibly corrupted)
        // sample; each is a [1] scalar per step.
        let mut lam_f_steps = Vec::with_capacity(n);
        let mut lam_b_steps = Vec::with_capacity(n);
        let mut combined_steps = Vec::with_capacity(n);
        for i in 0..n {
            let ef = fwd_trace.estimates[i];
            let eb = bwd_trace.estimates[i];
            let (lf, lb, comb) = match self.combine {
                CombineMode::Mean => {
                    let half = tape.constant_scalar(F::c(0.5));
                    let sum = tape.add(ef, eb)?;
                    (half, half, tape.scale(sum, F::c(0.5)))
                }
                CombineMode::Weighted | CombineMode::WeightedNormalized => {
                    let (wf, bf) = binding.fwd.lambda.expect("lambda bound");
                    let (wb, bb) = binding.bwd.lambda.expect("lambda bound");
                    let df: Vec<F> = (0..sample.d()).map(|j| sample.delta_fwd.at(i, j)).collect();
                    let db: Vec<F> = (0..sample.d()).map(|j| sample.delta_bwd.at(i, j)).collect();
                    let lf = decay(tape, wf, bf, &df)?;
                    let lb = decay(tape, wb, bb, &db)?;
                    let tf = tape.mul(lf, ef)?;
                    let tb = tape.mul(lb, eb)?;
                    let mut comb = tape.add(tf, tb)?;
                    if self.combine == CombineMode::WeightedNormalized {
                        let total = tape.add(lf, lb)?;
                        let log_total = tape.log(total);
                        let neg_log = tape.neg(log_total);
                        let inv = tape.exp(neg_log);
                        comb = tape.mul(comb, inv)?;
                    }
                    (lf, lb, comb)
                }
            };
            lam_f_steps.push(lf);
            lam_b_steps.push(lb);
            combined_steps.push(comb);
        }

        // Replacement: observed target values pass through unchanged.
        let mut replaced_steps = Vec::with_capacity(n);
        for i in 0..n {
            if sample.mask.at(i, t) == F::one() {
                replaced_steps.push(tape.constant_scalar(sample.values.at(i, t)));
            } else {
                replaced_steps.push(combined_steps[i]);
            }
        }

        let est_fwd = tape.concat(&fwd_trace.estimates)?;
        let est_bwd = tape.concat(&bwd_trace.estimates)?;
        let lambda_fwd = tape.concat(&lam_f_steps)?;
        let lambda_bwd = tape.concat(&lam_b_steps)?;
        let combined = tape.concat(&combined_steps)?;
        let replaced = tape.concat(&replaced_steps)?;

        Ok(GeneratorPass {
            est_fwd_steps: fwd_trace.estimates,
            est_bwd_steps: bwd_trace.estimates,
            est_fwd,
            est_bwd,
            lambda_fwd,
            lambda_bwd,
            combined_steps,
            combined,
            replaced_steps,
            replaced,
            hidden_fwd: fwd_trace.hidden,
            hidden_bwd: bwd_trace.hidden,
        })
    }

    /// Forward pass without gradients, returning concrete outputs.
    pub fn run(&self, sample: &SeriesSample<F>) -> Result<GeneratorOutput<F>> {
        let mut tape = Tape::new();
        let binding = self.bind(&mut tape, false);
        let pass = self.forward(&mut tape, &binding, sample)?;
        let take = |v: Var| tape.value(v).data().to_vec();
        let stack = |vs: &[Var]| {
            let h = self.params.hidden;
            let mut data = Vec::with_capacity(vs.len() * h);
            for &v in vs {
                data.extend_from_slice(tape.value(v).data());
            }
            Array::from_vec(vec![vs.len(), h], data)
        };
        Ok(GeneratorOutput {
            est_fwd: take(pass.est_fwd),
            est_bwd: take(pass.est_bwd),
            lambda_fwd: take(pass.lambda_fwd),
            lambda_bwd: take(pass.lambda_bwd),
            combined: take(pass.combined),
            replaced: take(pass.replaced),
            hidden_fwd: stack(&pass.hidden_fwd),
            hidden_bwd: stack(&pass.hidden_bwd),
        })
    }
}

/// Observed-value replacement on plain vectors:
/// `x * m + estimate * (1 - m)` elementwise.
pub fn replace<F: Scalar>(x: &[F], m: &[F], estimate: &[F]) -> Vec<F> {
    x.iter()
        .zip(m)
        .zip(estimate)
        .map(|((&xv, &mv), &ev)| xv * mv + ev * (F::one() - mv))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::TimeGrid;

    fn sample(values: Vec<f64>, mask: Vec<f64>, d: usize) -> SeriesSample<f64> {
        let n = values.len() / d;
        SeriesSample::new(
            "s".into(),
            Array::from_vec(vec![n, d], values),
            Array::from_vec(vec![n, d], mask),
            TimeGrid::new((0..n).map(|i| i as f64).collect()).unwrap(),
            0,
            (0..d).map(|j| format!("f{j}")).collect(),
        )
        .unwrap()
    }

    fn tiny_generator(seed: u64, combine: CombineMode) -> Generator<f64> {
        Generator::new(GeneratorParams::init(CellKind::Simple, 3, 2, seed), combine)
    }

    #[test]
    fn replace_identities() {
        let x = vec![1.0, 0.0, 3.0];
        let est = vec![9.0, 5.0, 9.0];
        assert_eq!(replace(&x, &[1.0, 1.0, 1.0], &est), x);
        assert_eq!(replace(&x, &[0.0, 0.0, 0.0], &est), est);
        assert_eq!(replace(&x, &[1.0, 0.0, 1.0], &est), vec![1.0, 5.0, 3.0]);
    }

    #[test]
    fn replace_is_idempotent() {
        let x = vec![1.0, 0.0, 3.0];
        let m = vec![1.0, 0.0, 1.0];
        let est = vec![9.0, 5.0, 9.0];
        let once = replace(&x, &m, &est);
        assert_eq!(replace(&x, &m, &once), once);
    }

    #[test]
    fn first_forward_estimate_is_bias() {
        let gen = tiny_generator(11, CombineMode::Weighted);
        let s = sample(vec![0.5, 1.0, 0.25, -1.0, 0.75, 0.5], vec![1.0; 6], 2);
        let out = gen.run(&s).unwrap();
        assert!((out.est_fwd[0] - gen.params.fwd.b_x.item()).abs() < 1e-15);
        // Last backward estimate comes from the zero state of the
        // reversed pass.
        assert!((out.est_bwd[2] - gen.params.bwd.b_x.item()).abs() < 1e-15);
    }

    #[test]
    fn replaced_matches_input_when_fully_observed() {
        let gen = tiny_generator(3, CombineMode::Weighted);
        let s = sample(vec![0.5, 1.0, 0.25, -1.0, 0.75, 0.5, -0.5, 0.0], vec![1.0; 8], 2);
        let out = gen.run(&s).unwrap();
        assert_eq!(out.replaced, s.target_values());
    }

    #[test]
    fn replaced_uses_estimates_only_where_missing() {
        let gen = tiny_generator(5, CombineMode::Weighted);
        let mask = vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let s = sample(vec![0.5, 1.0, 0.0, -1.0, 0.75, 0.5, -0.5, 0.0], mask, 2);
        let out = gen.run(&s).unwrap();
        assert_eq!(out.replaced[0], 0.5);
        assert_eq!(out.replaced[1], out.combined[1]);
        assert_eq!(out.replaced[2], 0.75);
        assert_eq!(out.replaced[3], -0.5);
    }

    #[test]
    fn hand_computed_three_step_unroll() {
        // H = 1, d = 1, simple cell; follow the recurrences by hand.
        let mut gen = tiny_generator(0, CombineMode::Weighted);
        gen.params = GeneratorParams {
            fwd: DirectionParams {
                cell: CellParams::Simple {
                    w_h: Array::matrix(1, 1, vec![0.5]),
                    u_h: Array::matrix(1, 1, vec![0.25]),
                    b_h: Array::vector(vec![0.1]),
                },
                w_x: Array::matrix(1, 1, vec![2.0]),
                b_x: Array::vector(vec![0.3]),
                w_gamma: Array::matrix(1, 1, vec![0.2]),
                b_gamma: Array::vector(vec![0.0]),
                w_lambda: Array::matrix(1, 1, vec![0.0]),
                b_lambda: Array::vector(vec![0.0]),
            },
            bwd: DirectionParams {
                cell: CellParams::Simple {
                    w_h: Array::matrix(1, 1, vec![0.0]),
                    u_h: Array::matrix(1, 1, vec![0.0]),
                    b_h: Array::vector(vec![0.0]),
                },
                w_x: Array::matrix(1, 1, vec![0.0]),
                b_x: Array::vector(vec![0.0]),
                w_gamma: Array::matrix(1, 1, vec![0.0]),
                b_gamma: Array::vector(vec![0.0]),
                w_lambda: Array::matrix(1, 1, vec![0.0]),
                b_lambda: Array::vector(vec![0.0]),
            },
            hidden: 1,
            input_dim: 1,
        };
        let s = sample(vec![0.4, 0.8, 0.6], vec![1.0, 1.0, 1.0], 1);
        let out = gen.run(&s).unwrap();

        let sigmoid = |v: f64| 1.0 / (1.0 + (-v).exp());
        // step 0: est = 2*0 + 0.3; gamma = exp(-max(0, 0.2*0)) = 1;
        // h1 = sigmoid(0.5*(0*1) + 0.25*0.4 + 0.1)
        let mut h = 0.0;
        let mut expect = Vec::new();
        for (i, &x) in [0.4, 0.8, 0.6].iter().enumerate() {
            expect.push(2.0 * h + 0.3);
            let gamma = (-f64::max(0.0, 0.2 * if i == 0 { 0.0 } else { 1.0 })).exp();
            h = sigmoid(0.5 * (h * gamma) + 0.25 * x + 0.1);
        }
        for (a, e) in out.est_fwd.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
    }

    #[test]
    fn backward_is_reversed_forward_on_reversed_sample() {
        let gen = tiny_generator(17, CombineMode::Weighted);
        let s = sample(
            vec![0.5, 1.0, 0.0, -1.0, 0.75, 0.5, -0.5, 0.0],
            vec![1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            2,
        );
        // Reversed sample: rows of values/mask reversed; its forward gaps
        // are the original backward gaps reversed.
        let n = s.n();
        let d = s.d();
        let rev = |a: &Array<f64>| {
            let mut data = Vec::new();
            for i in (0..n).rev() {
                for j in 0..d {
                    data.push(a.at(i, j));
                }
            }
            Array::from_vec(vec![n, d], data)
        };
        let reversed = SeriesSample::new(
            "rev".into(),
            rev(&s.values),
            rev(&s.mask),
            s.grid.reversed(),
            0,
            s.feature_names.clone(),
        )
        .unwrap();

        // Swap directions so the backward params drive the forward unroll.
        let mut swapped = gen.clone();
        std::mem::swap(&mut swapped.params.fwd, &mut swapped.params.bwd);
        let rev_out = swapped.run(&reversed).unwrap();
        let out = gen.run(&s).unwrap();
        let mut rev_est = rev_out.est_fwd.clone();
        rev_est.reverse();
        for (a, b) in out.est_bwd.iter().zip(&rev_est) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn combine_arithmetic() {
        // With zero lambda heads both weights are exp(0) = 1.
        let mut gen = tiny_generator(23, CombineMode::Weighted);
        gen.params.fwd.w_lambda = Array::matrix(1, 2, vec![0.0, 0.0]);
        gen.params.fwd.b_lambda = Array::vector(vec![0.0]);
        gen.params.bwd.w_lambda = Array::matrix(1, 2, vec![0.0, 0.0]);
        gen.params.bwd.b_lambda = Array::vector(vec![0.0]);
        let s = sample(vec![0.5, 1.0, 0.25, -1.0, 0.75, 0.5], vec![1.0; 6], 2);
        let out = gen.run(&s).unwrap();
        for i in 0..3 {
            assert!((out.lambda_fwd[i] - 1.0).abs() < 1e-15);
            let sum = out.est_fwd[i] + out.est_bwd[i];
            assert!((out.combined[i] - sum).abs() < 1e-12);
        }

        // Normalized mode with equal weights averages the estimates.
        gen.combine = CombineMode::WeightedNormalized;
        let out = gen.run(&s).unwrap();
        for i in 0..3 {
            let mean = (out.est_fwd[i] + out.est_bwd[i]) / 2.0;
            assert!((out.combined[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn combine_weighted_sum_with_unequal_weights() {
        // Bias-only heads pin the weights: lambda = exp(-b).
        let mut gen = tiny_generator(37, CombineMode::Weighted);
        gen.params.fwd.w_lambda = Array::matrix(1, 2, vec![0.0, 0.0]);
        gen.params.fwd.b_lambda = Array::vector(vec![-(0.8f64.ln())]);
        gen.params.bwd.w_lambda = Array::matrix(1, 2, vec![0.0, 0.0]);
        gen.params.bwd.b_lambda = Array::vector(vec![-(0.2f64.ln())]);
        let s = sample(vec![0.5, 1.0, 0.25, -1.0, 0.75, 0.5], vec![1.0; 6], 2);
        let out = gen.run(&s).unwrap();
        for i in 0..3 {
            assert!((out.lambda_fwd[i] - 0.8).abs() < 1e-12);
            assert!((out.lambda_bwd[i] - 0.2).abs() < 1e-12);
            let expect = 0.8 * out.est_fwd[i] + 0.2 * out.est_bwd[i];
            assert!((out.combined[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_mode_averages_and_skips_lambda() {
        let gen = tiny_generator(29, CombineMode::Mean);
        let s = sample(vec![0.5, 1.0, 0.25, -1.0, 0.75, 0.5], vec![1.0; 6], 2);
        let out = gen.run(&s).unwrap();
        for i in 0..3 {
            let mean = (out.est_fwd[i] + out.est_bwd[i]) / 2.0;
            assert!((out.combined[i] - mean).abs() < 1e-12);
            assert_eq!(out.lambda_fwd[i], 0.5);
        }
        // Lambda tensors are excluded from the trainable set.
        let names: Vec<String> =
            gen.params.tensors(false).into_iter().map(|(n, _)| n).collect();
        assert!(!names.iter().any(|n| n.contains("lambda")));
        assert!(gen.params.tensors(true).len() == names.len() + 4);
    }

    #[test]
    fn causality_of_directional_estimates() {
        let gen = tiny_generator(31, CombineMode::Weighted);
        let base = sample(
            vec![0.5, 1.0, 0.25, -1.0, 0.75, 0.5, -0.5, 0.0, 0.3, 0.9],
            vec![1.0; 10],
            2,
        );
        let mut bumped = base.clone();
        bumped.values.set(2, 0, 5.0);
        let a = gen.run(&base).unwrap();
        let b = gen.run(&bumped).unwrap();
        for i in 0..5 {
            let fwd_same = (a.est_fwd[i] - b.est_fwd[i]).abs() < 1e-15;
            let bwd_same = (a.est_bwd[i] - b.est_bwd[i]).abs() < 1e-15;
            // Forward estimates depend only on strictly earlier inputs.
            assert_eq!(fwd_same, i <= 2, "fwd step {i}");
            // Backward estimates depend only on strictly later inputs.
            assert_eq!(bwd_same, i >= 2, "bwd step {i}");
        }
    }

    #[test]
    fn lambda_bounds_hold_over_random_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for trial in 0..50 {
            let gen = tiny_generator(trial, CombineMode::Weighted);
            let values: Vec<f64> = (0..10).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mask: Vec<f64> = (0..10).map(|_| if rng.gen_bool(0.7) { 1.0 } else { 0.0 }).collect();
            if !mask.contains(&1.0) {
                continue;
            }
            let s = sample(values, mask, 2);
            let out = gen.run(&s).unwrap();
            for v in out.lambda_fwd.iter().chain(&out.lambda_bwd) {
                assert!(*v > 0.0 && *v <= 1.0);
            }
        }
    }
}
