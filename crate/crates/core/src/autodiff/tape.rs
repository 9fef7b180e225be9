//! Recorded array computations with exact reverse-mode gradients.
//!
//! A `Tape` is built per forward pass: leaves (parameters, inputs) go in
//! first, primitive ops append nodes, and `backward` walks the record in
//! reverse to accumulate partials. Subgradient conventions at kinks are
//! fixed so training is deterministic: `max(0, x)` has derivative 0 at
//! x = 0 and `|x|` has derivative 0 at x = 0.

use crate::autodiff::array::{matmul, Array};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Neg(Var),
    MaxZero(Var),
    Log(Var),
    MeanAbs(Var),
    Concat(Vec<Var>),
    Slice { input: Var, start: usize, len: usize },
}

struct Node<F> {
    op: Op,
    value: Array<F>,
    needs_grad: bool,
}

/// Gradients of one scalar root with respect to every tape node.
pub struct Gradients<F> {
    slots: Vec<Option<Array<F>>>,
    shapes: Vec<Vec<usize>>,
}

impl<F: Scalar> Gradients<F> {
    /// Gradient w.r.t. `v`; zeros when `v` does not reach the root.
    pub fn wrt(&self, v: Var) -> Array<F> {
        match &self.slots[v.0] {
            Some(g) => g.clone(),
            None => Array::zeros(self.shapes[v.0].clone()),
        }
    }
}

/// Record of one forward computation.
pub struct Tape<F> {
    nodes: Vec<Node<F>>,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value produced at `v`.
    pub fn value(&self, v: Var) -> &Array<F> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Array<F>, needs_grad: bool) -> Var {
        self.nodes.push(Node { op, value, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf (parameter or input requiring gradients).
    pub fn leaf(&mut self, value: Array<F>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// Non-differentiable leaf (data, masks, fixed weights).
    pub fn constant(&mut self, value: Array<F>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn constant_scalar(&mut self, v: F) -> Var {
        self.constant(Array::scalar(v))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::ShapeMismatch { op, lhs: sa.to_vec(), rhs: sb.to_vec() });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul(self.value(a), self.value(b))?;
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::MatMul(a, b), value, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Add(a, b), value, ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let ng = self.needs(a) || self.needs(b);
        Ok(self.push(Op::Mul(a, b), value, ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let one = F::one();
        let value = self.value(a).map(|x| one / (one + (-x).exp()));
        let ng = self.needs(a);
        self.push(Op::Sigmoid(a), value, ng)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.tanh());
        let ng = self.needs(a);
        self.push(Op::Tanh(a), value, ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.exp());
        let ng = self.needs(a);
        self.push(Op::Exp(a), value, ng)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| -x);
        let ng = self.needs(a);
        self.push(Op::Neg(a), value, ng)
    }

    /// `max(0, x)` elementwise; derivative at exactly 0 is 0.
    pub fn max_zero(&mut self, a: Var) -> Var {
        let z = F::zero();
        let value = self.value(a).map(|x| if x > z { x } else { z });
        let ng = self.needs(a);
        self.push(Op::MaxZero(a), value, ng)
    }

    /// Natural log, elementwise.
    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.ln());
        let ng = self.needs(a);
        self.push(Op::Log(a), value, ng)
    }

    /// Mean of absolute values over all entries; derivative of `|x|` at 0 is 0.
    pub fn mean_abs(&mut self, a: Var) -> Var {
        let n = F::c(self.value(a).len() as f64);
        let mut acc = F::zero();
        for &v in self.value(a).iter() {
            acc += v.abs();
        }
        let ng = self.needs(a);
        self.push(Op::MeanAbs(a), Array::scalar(acc / n), ng)
    }

    /// Concatenate along the first axis; trailing dimensions must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Data("concat of zero parts".into()));
        }
        let first = self.value(parts[0]).shape().to_vec();
        let mut total = 0usize;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != first.len() || s[1..] != first[1..] {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: first.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[0];
        }
        let mut shape = first;
        shape[0] = total;
        let mut data = Vec::with_capacity(shape.iter().product());
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(Op::Concat(parts.to_vec()), Array::from_vec(shape, data), ng))
    }

    /// Contiguous slice `[start, start+len)` along the first axis.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.value(a).shape().to_vec();
        if start + len > s[0] {
            return Err(Error::Data(format!(
                "slice {}..{} out of bounds for first axis {}",
                start,
                start + len,
                s[0]
            )));
        }
        let inner: usize = s[1..].iter().product();
        let mut shape = s;
        shape[0] = len;
        let data = self.value(a).data()[start * inner..(start + len) * inner].to_vec();
        let ng = self.needs(a);
        Ok(self.push(Op::Slice { input: a, start, len }, Array::from_vec(shape, data), ng))
    }

    // -- conveniences composed from the primitives above --

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    /// Multiply every entry by a fixed constant.
    pub fn scale(&mut self, a: Var, k: F) -> Var {
        let c = self.constant(Array::full(self.value(a).shape().to_vec(), k));
        self.mul(a, c).expect("identical shapes")
    }

    /// Weighted sum `w · v` with a fixed weight vector, as a `[1]` scalar.
    pub fn dot_const(&mut self, weights: Vec<F>, v: Var) -> Result<Var> {
        let w = self.constant(Array::vector(weights));
        self.matmul(w, v)
    }

    /// Clamp entries to `[lo, hi]` (gradient 0 outside, 1 strictly inside).
    pub fn clamp(&mut self, a: Var, lo: F, hi: F) -> Var {
        let shape = self.value(a).shape().to_vec();
        let lo_arr = self.constant(Array::full(shape.clone(), lo));
        let above_lo = self.sub(a, lo_arr).expect("identical shapes");
        let lower = self.max_zero(above_lo);
        let hi_arr = self.constant(Array::full(shape.clone(), hi));
        let above_hi = self.sub(a, hi_arr).expect("identical shapes");
        let over = self.max_zero(above_hi);
        let kept = self.sub(lower, over).expect("identical shapes");
        let base = self.constant(Array::full(shape, lo));
        self.add(base, kept).expect("identical shapes")
    }

    /// Reverse-mode pass from a scalar root. Leaves not on the path get
    /// zero gradients from [`Gradients::wrt`].
    pub fn backward(&self, root: Var) -> Result<Gradients<F>> {
        if self.value(root).len() != 1 {
            return Err(Error::Data(format!(
                "backward root must be scalar, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut slots: Vec<Option<Array<F>>> = (0..self.nodes.len()).map(|_| None).collect();
        slots[root.0] = Some(Array::scalar(F::one()));

        for idx in (0..=root.0).rev() {
            let grad = match slots[idx].take() {
                Some(g) => g,
                None => continue,
            };
            let node = &self.nodes[idx];
            if node.needs_grad {
                match &node.op {
                    Op::Leaf => {}
                    Op::MatMul(a, b) => self.back_matmul(*a, *b, &grad, &mut slots),
                    Op::Add(a, b) => {
                        self.accumulate(*a, &grad, &mut slots);
                        self.accumulate(*b, &grad, &mut slots);
                    }
                    Op::Mul(a, b) => {
                        if self.needs(*a) {
                            let ga = grad.zip_map(self.value(*b), |g, v| g * v);
                            self.accumulate(*a, &ga, &mut slots);
                        }
                        if self.needs(*b) {
                            let gb = grad.zip_map(self.value(*a), |g, v| g * v);
                            self.accumulate(*b, &gb, &mut slots);
                        }
                    }
                    Op::Sigmoid(a) => {
                        let one = F::one();
                        let ga = grad.zip_map(&self.nodes[idx].value, |g, s| g * s * (one - s));
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::Tanh(a) => {
                        let one = F::one();
                        let ga = grad.zip_map(&self.nodes[idx].value, |g, t| g * (one - t * t));
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::Exp(a) => {
                        let ga = grad.zip_map(&self.nodes[idx].value, |g, e| g * e);
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::Neg(a) => {
                        let ga = grad.map(|g| -g);
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::MaxZero(a) => {
                        let z = F::zero();
                        let ga = grad.zip_map(self.value(*a), |g, x| if x > z { g } else { z });
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::Log(a) => {
                        let ga = grad.zip_map(self.value(*a), |g, x| g / x);
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::MeanAbs(a) => {
                        let g = grad.item();
                        let n = F::c(self.value(*a).len() as f64);
                        let z = F::zero();
                        let ga = self.value(*a).map(|x| {
                            if x > z {
                                g / n
                            } else if x < z {
                                -g / n
                            } else {
                                z
                            }
                        });
                        self.accumulate(*a, &ga, &mut slots);
                    }
                    Op::Concat(parts) => {
                        let mut offset = 0usize;
                        for &p in parts {
                            let s = self.value(p).shape();
                            let rows = s[0];
                            let inner: usize = s[1..].iter().product();
                            let piece = Array::from_vec(
                                s.to_vec(),
                                grad.data()[offset * inner..(offset + rows) * inner].to_vec(),
                            );
                            self.accumulate(p, &piece, &mut slots);
                            offset += rows;
                        }
                    }
                    Op::Slice { input, start, len } => {
                        let s = self.value(*input).shape().to_vec();
                        let inner: usize = s[1..].iter().product();
                        let mut full = Array::zeros(s);
                        full.data_mut()[start * inner..(start + len) * inner]
                            .copy_from_slice(grad.data());
                        self.accumulate(*input, &full, &mut slots);
                    }
                }
            }
            // Keep the accumulated gradient readable for the caller.
            if node.needs_grad {
                slots[idx] = Some(grad);
            }
        }

        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { slots, shapes })
    }

    fn accumulate(&self, v: Var, g: &Array<F>, slots: &mut [Option<Array<F>>]) {
        if !self.needs(v) {
            return;
        }
        match &mut slots[v.0] {
            Some(existing) => existing.add_scaled(g, F::one()),
            slot @ None => *slot = Some(g.clone()),
        }
    }

    fn back_matmul(&self, a: Var, b: Var, grad: &Array<F>, slots: &mut [Option<Array<F>>]) {
        let av = self.value(a);
        let bv = self.value(b);
        match (av.shape().len(), bv.shape().len()) {
            (2, 2) => {
                let (m, k) = (av.shape()[0], av.shape()[1]);
                let n = bv.shape()[1];
                if self.needs(a) {
                    // dA = dC · Bᵀ
                    let mut ga = Array::zeros(vec![m, k]);
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = F::zero();
                            for j in 0..n {
                                acc += grad.at(i, j) * bv.at(p, j);
                            }
                            ga.set(i, p, acc);
                        }
                    }
                    self.accumulate(a, &ga, slots);
                }
                if self.needs(b) {
                    // dB = Aᵀ · dC
                    let mut gb = Array::zeros(vec![k, n]);
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc = F::zero();
                            for i in 0..m {
                                acc += av.at(i, p) * grad.at(i, j);
                            }
                            gb.set(p, j, acc);
                        }
                    }
                    self.accumulate(b, &gb, slots);
                }
            }
            (2, 1) => {
                let (m, k) = (av.shape()[0], av.shape()[1]);
                if self.needs(a) {
                    let mut ga = Array::zeros(vec![m, k]);
                    for i in 0..m {
                        for p in 0..k {
                            ga.set(i, p, grad.data()[i] * bv.data()[p]);
                        }
                    }
                    self.accumulate(a, &ga, slots);
                }
                if self.needs(b) {
                    let mut gb = Array::zeros(vec![k]);
                    for p in 0..k {
                        let mut acc = F::zero();
                        for i in 0..m {
                            acc += av.at(i, p) * grad.data()[i];
                        }
                        gb.data_mut()[p] = acc;
                    }
                    self.accumulate(b, &gb, slots);
                }
            }
            (1, 2) => {
                let k = av.shape()[0];
                let n = bv.shape()[1];
                if self.needs(a) {
                    let mut ga = Array::zeros(vec![k]);
                    for p in 0..k {
                        let mut acc = F::zero();
                        for j in 0..n {
                            acc += bv.at(p, j) * grad.data()[j];
                        }
                        ga.data_mut()[p] = acc;
                    }
                    self.accumulate(a, &ga, slots);
                }
                if self.needs(b) {
                    let mut gb = Array::zeros(vec![k, n]);
                    for p in 0..k {
                        for j in 0..n {
                            gb.set(p, j, av.data()[p] * grad.data()[j]);
                        }
                    }
                    self.accumulate(b, &gb, slots);
                }
            }
            (1, 1) => {
                let g = grad.item();
                if self.needs(a) {
                    let ga = bv.map(|v| v * g);
                    self.accumulate(a, &ga, slots);
                }
                if self.needs(b) {
                    let gb = av.map(|v| v * g);
                    self.accumulate(b, &gb, slots);
                }
            }
            _ => unreachable!("matmul forward already validated shapes"),
        }
    }
}
