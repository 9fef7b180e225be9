//! Recurrent cells used by the generator and discriminator.
//!
//! The default cell is the plain sigmoid update
//! `h' = sigma(W_h h + U_h x + b_h)`; the LSTM variant keeps a cell state
//! and standard gates. Temporal decay, when used, is applied by the
//! caller to the previous hidden state before the cell update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Array, Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Simple,
    Lstm,
}

impl CellKind {
    pub fn name(self) -> &'static str {
        match self {
            CellKind::Simple => "simple",
            CellKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "simple" => Some(CellKind::Simple),
            "lstm" => Some(CellKind::Lstm),
            _ => None,
        }
    }
}

/// One gate's weights: recurrent, input, bias.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<F> {
    pub w: Array<F>,
    pub u: Array<F>,
    pub b: Array<F>,
}

const LSTM_GATES: [&str; 4] = ["i", "f", "o", "g"];

#[derive(Debug, Clone, PartialEq)]
pub enum CellParams<F> {
    Simple { w_h: Array<F>, u_h: Array<F>, b_h: Array<F> },
    /// Gates in order: input, forget, output, candidate.
    Lstm { gates: Vec<GateParams<F>> },
}

impl<F: Scalar> CellParams<F> {
    /// Uniform init in [-1/sqrt(H), 1/sqrt(H)].
    pub fn init(kind: CellKind, hidden: usize, input: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = |shape: Vec<usize>| {
            let len = shape.iter().product();
            let data = (0..len).map(|_| F::c(rng.gen_range(-bound..bound))).collect();
            Array::from_vec(shape, data)
        };
        match kind {
            CellKind::Simple => CellParams::Simple {
                w_h: draw(vec![hidden, hidden]),
                u_h: draw(vec![hidden, input]),
                b_h: draw(vec![hidden]),
            },
            CellKind::Lstm => CellParams::Lstm {
                gates: (0..4)
                    .map(|_| GateParams {
                        w: draw(vec![hidden, hidden]),
                        u: draw(vec![hidden, input]),
                        b: draw(vec![hidden]),
                    })
                    .collect(),
            },
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            CellParams::Simple { .. } => CellKind::Simple,
            CellParams::Lstm { .. } => CellKind::Lstm,
        }
    }

    pub fn hidden(&self) -> usize {
        match self {
            CellParams::Simple { b_h, .. } => b_h.len(),
            CellParams::Lstm { gates } => gates[0].b.len(),
        }
    }

    /// Named tensors in canonical order under `prefix`.
    pub fn tensors(&self, prefix: &str) -> Vec<(String, &Array<F>)> {
        match self {
            CellParams::Simple { w_h, u_h, b_h } => vec![
                (format!("{prefix}.w_h"), w_h),
                (format!("{prefix}.u_h"), u_h),
                (format!("{prefix}.b_h"), b_h),
            ],
            CellParams::Lstm { gates } => gates
                .iter()
                .zip(LSTM_GATES)
                .flat_map(|(g, name)| {
                    vec![
                        (format!("{prefix}.w_{name}"), &g.w),
                        (format!("{prefix}.u_{name}"), &g.u),
                        (format!("{prefix}.b_{name}"), &g.b),
                    ]
                })
                .collect(),
        }
    }

    pub fn tensors_mut(&mut self, prefix: &str) -> Vec<(String, &mut Array<F>)> {
        match self {
            CellParams::Simple { w_h, u_h, b_h } => vec![
                (format!("{prefix}.w_h"), w_h),
                (format!("{prefix}.u_h"), u_h),
                (format!("{prefix}.b_h"), b_h),
            ],
            CellParams::Lstm { gates } => gates
                .iter_mut()
                .zip(LSTM_GATES)
                .flat_map(|(g, name)| {
                    vec![
                        (format!("{prefix}.w_{name}"), &mut g.w),
                        (format!("{prefix}.u_{name}"), &mut g.u),
                        (format!("{prefix}.b_{name}"), &mut g.b),
                    ]
                })
                .collect(),
        }
    }

    pub fn bind(&self, tape: &mut Tape<F>, trainable: bool) -> CellBinding {
        let mut put = |a: &Array<F>| {
            if trainable {
                tape.leaf(a.clone())
            } else {
                tape.constant(a.clone())
            }
        };
        match self {
            CellParams::Simple { w_h, u_h, b_h } => {
                CellBinding::Simple { w_h: put(w_h), u_h: put(u_h), b_h: put(b_h) }
            }
            CellParams::Lstm { gates } => CellBinding::Lstm {
                gates: gates
                    .iter()
                    .map(|g| GateBinding { w: put(&g.w), u: put(&g.u), b: put(&g.b) })
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GateBinding {
    w: Var,
    u: Var,
    b: Var,
}

#[derive(Debug, Clone)]
pub enum CellBinding {
    Simple { w_h: Var, u_h: Var, b_h: Var },
    Lstm { gates: Vec<GateBinding> },
}

/// Hidden state carried across timesteps; `c` is used by LSTM only.
#[derive(Debug, Clone, Copy)]
pub struct CellState {
    pub h: Var,
    pub c: Option<Var>,
}

impl CellBinding {
    pub fn initial_state<F: Scalar>(&self, tape: &mut Tape<F>, hidden: usize) -> CellState {
        let h = tape.constant(Array::zeros(vec![hidden]));
        let c = match self {
            CellBinding::Simple { .. } => None,
            CellBinding::Lstm { .. } => Some(tape.constant(Array::zeros(vec![hidden]))),
        };
        CellState { h, c }
    }

    pub fn ordered_vars(&self) -> Vec<Var> {
        match self {
            CellBinding::Simple { w_h, u_h, b_h } => vec![*w_h, *u_h, *b_h],
            CellBinding::Lstm { gates } => {
                gates.iter().flat_map(|g| vec![g.w, g.u, g.b]).collect()
            }
        }
    }

    /// One step: `prev.h` must already carry any temporal decay.
    pub fn step<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        prev: CellState,
        x: Var,
    ) -> Result<CellState> {
        match self {
            CellBinding::Simple { w_h, u_h, b_h } => {
                let rec = tape.matmul(*w_h, prev.h)?;
                let inp = tape.matmul(*u_h, x)?;
                let sum = tape.add(rec, inp)?;
                let pre = tape.add(sum, *b_h)?;
                Ok(CellState { h: tape.sigmoid(pre), c: None })
            }
            CellBinding::Lstm { gates } => {
                let mut pre = Vec::with_capacity(4);
                for g in gates {
                    let rec = tape.matmul(g.w, prev.h)?;
                    let inp = tape.matmul(g.u, x)?;
                    let sum = tape.add(rec, inp)?;
                    pre.push(tape.add(sum, g.b)?);
                }
                let gate_i = tape.sigmoid(pre[0]);
                let gate_f = tape.sigmoid(pre[1]);
                let gate_o = tape.sigmoid(pre[2]);
                let cand = tape.tanh(pre[3]);
                let c_prev = prev.c.expect("LSTM state carries c");
                let keep = tape.mul(gate_f, c_prev)?;
                let write = tape.mul(gate_i, cand)?;
                let c = tape.add(keep, write)?;
                let ct = tape.tanh(c);
                let h = tape.mul(gate_o, ct)?;
                Ok(CellState { h, c: Some(c) })
            }
        }
    }
}

/// Gap-driven decay factor `exp(-max(0, W delta + b))`, always in
/// (0, 1]; used for both the hidden-state decay (H outputs) and the
/// combination weights (scalar output).
pub fn decay<F: Scalar>(
    tape: &mut Tape<F>,
    w: Var,
    b: Var,
    delta_row: &[F],
) -> Result<Var> {
    let d = tape.constant(Array::vector(delta_row.to_vec()));
    let lin = tape.matmul(w, d)?;
    let pre = tape.add(lin, b)?;
    let clipped = tape.max_zero(pre);
    let neg = tape.neg(clipped);
    Ok(tape.exp(neg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_weights_give_unit_decay() {
        let mut tape = Tape::<f64>::new();
        let w = tape.constant(Array::matrix(3, 2, vec![0.0; 6]));
        let b = tape.constant(Array::vector(vec![0.0; 3]));
        let g = decay(&mut tape, w, b, &[4.0, 9.0]).unwrap();
        assert_eq!(tape.value(g).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn nonpositive_preactivation_clamps_to_one() {
        let mut tape = Tape::<f64>::new();
        let w = tape.constant(Array::matrix(1, 2, vec![-1.0, -0.5]));
        let b = tape.constant(Array::vector(vec![0.0]));
        let g = decay(&mut tape, w, b, &[2.0, 2.0]).unwrap();
        assert_eq!(tape.value(g).data(), &[1.0]);
    }

    #[test]
    fn log_two_delta_halves() {
        let mut tape = Tape::<f64>::new();
        let w = tape.constant(Array::matrix(1, 2, vec![1.0, 0.0]));
        let b = tape.constant(Array::vector(vec![0.0]));
        let g = decay(&mut tape, w, b, &[2.0f64.ln(), 5.0]).unwrap();
        assert!((tape.value(g).data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decay_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let mut tape = Tape::<f64>::new();
            let wv: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let w = tape.constant(Array::matrix(1, 2, wv));
            let b = tape.constant(Array::vector(vec![rng.gen_range(-3.0..3.0)]));
            let delta = [rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)];
            let g = decay(&mut tape, w, b, &delta).unwrap();
            let v = tape.value(g).data()[0];
            assert!(v > 0.0 && v <= 1.0, "decay {v} outside (0, 1]");
        }
    }

    #[test]
    fn lstm_step_shapes_and_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = CellParams::<f64>::init(CellKind::Lstm, 4, 2, &mut rng);
        assert_eq!(params.tensors("c").len(), 12);
        let mut tape = Tape::new();
        let binding = params.bind(&mut tape, true);
        let state = binding.initial_state(&mut tape, 4);
        let x = tape.constant(Array::vector(vec![0.3, -0.8]));
        let next = binding.step(&mut tape, state, x).unwrap();
        assert_eq!(tape.value(next.h).shape(), &[4]);
        assert!(next.c.is_some());
    }
}
