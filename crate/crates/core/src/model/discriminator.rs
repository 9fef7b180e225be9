//! Per-timestep discriminator over the completed target series, and the
//! adversarial losses in both the cross-entropy and Wasserstein modes.
//!
//! The discriminator reads the whole completed series and emits one score
//! per step; the target mask then selects which steps feed the real and
//! fake loss terms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Array, Tape, Var};
use crate::dataset::SeriesSample;
use crate::error::{Error, Result};
use crate::model::cell::{CellBinding, CellKind, CellParams, CellState};
use crate::scalar::Scalar;
use crate::seed::derive;

/// Clamp bound for log arguments in the cross-entropy losses.
pub const LOG_EPS: f64 = 1e-12;

/// Adversarial objective in effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvMode {
    /// Binary cross-entropy; scores are probabilities in (0, 1).
    Vanilla,
    /// Weight-clipped critic; scores are unbounded reals.
    Wasserstein,
}

impl AdvMode {
    pub fn name(self) -> &'static str {
        match self {
            AdvMode::Vanilla => "vanilla",
            AdvMode::Wasserstein => "wasserstein",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "vanilla" => Some(AdvMode::Vanilla),
            "wasserstein" => Some(AdvMode::Wasserstein),
            _ => None,
        }
    }
}

/// One bidirectional recurrent layer plus a per-step scoring head.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorParams<F> {
    pub fwd_cell: CellParams<F>,
    pub bwd_cell: CellParams<F>,
    /// Scoring head `[1, 2H]` over the concatenated direction states.
    pub w_out: Array<F>,
    pub b_out: Array<F>,
    pub hidden: usize,
    pub input_dim: usize,
}

impl<F: Scalar> DiscriminatorParams<F> {
    pub fn init(kind: CellKind, hidden: usize, input_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "discriminator-init", 0));
        let fwd_cell = CellParams::init(kind, hidden, input_dim, &mut rng);
        let bwd_cell = CellParams::init(kind, hidden, input_dim, &mut rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_out = Array::from_vec(
            vec![1, 2 * hidden],
            (0..2 * hidden).map(|_| F::c(rng.gen_range(-bound..bound))).collect(),
        );
        let b_out = Array::vector(vec![F::c(rng.gen_range(-bound..bound))]);
        DiscriminatorParams { fwd_cell, bwd_cell, w_out, b_out, hidden, input_dim }
    }

    pub fn tensors(&self) -> Vec<(String, &Array<F>)> {
        let mut out = self.fwd_cell.tensors("disc.fwd");
        out.extend(self.bwd_cell.tensors("disc.bwd"));
        out.push(("disc.w_out".into(), &self.w_out));
        out.push(("disc.b_out".into(), &self.b_out));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Array<F>)> {
        let mut out = self.fwd_cell.tensors_mut("disc.fwd");
        out.extend(self.bwd_cell.tensors_mut("disc.bwd"));
        out.push(("disc.w_out".into(), &mut self.w_out));
        out.push(("disc.b_out".into(), &mut self.b_out));
        out
    }

    /// Clamp every weight into `[-clip, clip]` (Wasserstein mode).
    pub fn clip_weights(&mut self, clip: F) {
        for (_, t) in self.tensors_mut() {
            for v in t.data_mut() {
                if *v > clip {
                    *v = clip;
                } else if *v < -clip {
                    *v = -clip;
                }
            }
        }
    }

    pub fn max_abs_weight(&self) -> F {
        let mut m = F::zero();
        for (_, t) in self.tensors() {
            for v in t.iter() {
                m = m.max(v.abs());
            }
        }
        m
    }
}

pub struct DiscriminatorBinding {
    fwd: CellBinding,
    bwd: CellBinding,
    w_out: Var,
    b_out: Var,
    vars: Vec<Var>,
}

impl DiscriminatorBinding {
    pub fn ordered_vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Per-step scores of one discriminator pass.
pub struct DiscriminatorPass {
    pub score_steps: Vec<Var>,
    /// `[n]` stack of the per-step scores.
    pub scores: Var,
}

#[derive(Debug, Clone)]
pub struct Discriminator<F> {
    pub params: DiscriminatorParams<F>,
    pub mode: AdvMode,
    /// Feed mask and gap channels alongside the completed value.
    pub condition_on_mask: bool,
}

impl<F: Scalar> Discriminator<F> {
    pub fn new(params: DiscriminatorParams<F>, mode: AdvMode, condition_on_mask: bool) -> Self {
        Self { params, mode, condition_on_mask }
    }

    /// Input width implied by the conditioning flag.
    pub fn input_dim(condition_on_mask: bool) -> usize {
        if condition_on_mask {
            4
        } else {
            1
        }
    }

    pub fn bind(&self, tape: &mut Tape<F>, trainable: bool) -> DiscriminatorBinding {
        let fwd = self.params.fwd_cell.bind(tape, trainable);
        let bwd = self.params.bwd_cell.bind(tape, trainable);
        let (w_out, b_out) = if trainable {
            (tape.leaf(self.params.w_out.clone()), tape.leaf(self.params.b_out.clone()))
        } else {
            (tape.constant(self.params.w_out.clone()), tape.constant(self.params.b_out.clone()))
        };
        let mut vars = fwd.ordered_vars();
        vars.extend(bwd.ordered_vars());
        vars.extend([w_out, b_out]);
        DiscriminatorBinding { fwd, bwd, w_out, b_out, vars }
    }

    /// Score a completed target series given per-step `[1]` value nodes
    /// (constants in the critic phase, generator outputs otherwise).
    pub fn forward(
        &self,
        tape: &mut Tape<F>,
        binding: &DiscriminatorBinding,
        completed_steps: &[Var],
        sample: &SeriesSample<F>,
    ) -> Result<DiscriminatorPass> {
        let n = completed_steps.len();
        let hidden = self.params.hidden;
        let t = sample.target_index;

        let step_input = |tape: &mut Tape<F>, i: usize| -> Result<Var> {
            if self.condition_on_mask {
                let channels = tape.constant(Array::vector(vec![
                    sample.mask.at(i, t),
                    sample.delta_fwd.at(i, t),
                    sample.delta_bwd.at(i, t),
                ]));
                tape.concat(&[completed_steps[i], channels])
            } else {
                Ok(completed_steps[i])
            }
        };

        let mut h_fwd = Vec::with_capacity(n);
        let mut state = binding.fwd.initial_state(tape, hidden);
        for i in 0..n {
            let x = step_input(tape, i)?;
            state = binding.fwd.step(tape, state, x)?;
            h_fwd.push(state.h);
        }

        let mut h_bwd = vec![None; n];
        let mut state: CellState = binding.bwd.initial_state(tape, hidden);
        for i in (0..n).rev() {
            let x = step_input(tape, i)?;
            state = binding.bwd.step(tape, state, x)?;
            h_bwd[i] = Some(state.h);
        }

        let mut score_steps = Vec::with_capacity(n);
        for i in 0..n {
            let both = tape.concat(&[h_fwd[i], h_bwd[i].expect("filled")])?;
            let lin = tape.matmul(binding.w_out, both)?;
            let raw = tape.add(lin, binding.b_out)?;
            let score = match self.mode {
                AdvMode::Vanilla => tape.sigmoid(raw),
                AdvMode::Wasserstein => raw,
            };
            score_steps.push(score);
        }
        let scores = tape.concat(&score_steps)?;
        Ok(DiscriminatorPass { score_steps, scores })
    }
}

fn class_weights<F: Scalar>(target_mask: &[F], observed: bool) -> Option<Vec<F>> {
    let match_value = if observed { F::one() } else { F::zero() };
    let count = target_mask.iter().filter(|&&m| m == match_value).count();
    if count == 0 {
        return None;
    }
    let w = F::one() / F::c(count as f64);
    Some(target_mask.iter().map(|&m| if m == match_value { w } else { F::zero() }).collect())
}

/// Discriminator objective. Vanilla: mean negative log-likelihood of
/// classifying observed steps real and the rest fake; an empty class
/// contributes zero. Wasserstein: fake mean minus real mean.
pub fn discriminator_loss<F: Scalar>(
    tape: &mut Tape<F>,
    scores: Var,
    target_mask: &[F],
    mode: AdvMode,
) -> Result<Var> {
    let real = class_weights(target_mask, true);
    let fake = class_weights(target_mask, false);
    match mode {
        AdvMode::Vanilla => {
            let p = tape.clamp(scores, F::c(LOG_EPS), F::c(1.0 - LOG_EPS));
            let mut terms = Vec::new();
            if let Some(w) = real {
                let logp = tape.log(p);
                let mean = tape.dot_const(w, logp)?;
                terms.push(tape.neg(mean));
            }
            if let Some(w) = fake {
                let ones = tape.constant(Array::full(vec![target_mask.len()], F::one()));
                let one_minus = tape.sub(ones, p)?;
                let log1m = tape.log(one_minus);
                let mean = tape.dot_const(w, log1m)?;
                terms.push(tape.neg(mean));
            }
            sum_terms(tape, terms)
        }
        AdvMode::Wasserstein => {
            let mut terms = Vec::new();
            if let Some(w) = fake {
                terms.push(tape.dot_const(w, scores)?);
            }
            if let Some(w) = real {
                let mean = tape.dot_const(w, scores)?;
                terms.push(tape.neg(mean));
            }
            sum_terms(tape, terms)
        }
    }
}

/// Generator's adversarial objective over the fake (mask 0) steps.
/// Vanilla: `mean log(1 - p)`; non-saturating: `-mean log p`;
/// Wasserstein: `-mean score`. Zero when no step is fake.
pub fn generator_adversarial_loss<F: Scalar>(
    tape: &mut Tape<F>,
    scores: Var,
    target_mask: &[F],
    mode: AdvMode,
    non_saturating: bool,
) -> Result<Var> {
    let Some(w) = class_weights(target_mask, false) else {
        return Ok(tape.constant_scalar(F::zero()));
    };
    match mode {
        AdvMode::Vanilla => {
            let p = tape.clamp(scores, F::c(LOG_EPS), F::c(1.0 - LOG_EPS));
            if non_saturating {
                let logp = tape.log(p);
                let mean = tape.dot_const(w, logp)?;
                Ok(tape.neg(mean))
            } else {
                let ones = tape.constant(Array::full(vec![target_mask.len()], F::one()));
                let one_minus = tape.sub(ones, p)?;
                let log1m = tape.log(one_minus);
                tape.dot_const(w, log1m)
            }
        }
        AdvMode::Wasserstein => {
            let mean = tape.dot_const(w, scores)?;
            Ok(tape.neg(mean))
        }
    }
}

fn sum_terms<F: Scalar>(tape: &mut Tape<F>, terms: Vec<Var>) -> Result<Var> {
    let mut iter = terms.into_iter();
    let Some(first) = iter.next() else {
        return Ok(tape.constant_scalar(F::zero()));
    };
    let mut acc = first;
    for t in iter {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}

/// Shape-check helper for callers feeding raw score vectors.
pub fn check_scores_len<F: Scalar>(tape: &Tape<F>, scores: Var, mask_len: usize) -> Result<()> {
    let got = tape.value(scores).len();
    if got != mask_len {
        return Err(Error::ShapeMismatch {
            op: "adversarial-loss",
            lhs: vec![got],
            rhs: vec![mask_len],
        });
    }
    Ok(())
}
