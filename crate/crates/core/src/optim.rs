//! Adaptive-moment optimizer with a divergence guard.

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam with bias correction. State tensors are kept in the caller's
/// parameter order, which must not change between steps.
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    t: u64,
    m: Vec<Array<F>>,
    v: Vec<Array<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(lr: F, beta1: F, beta2: F, eps: F) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    /// Apply one update. `params` and `grads` must align index by index;
    /// any non-finite parameter after the step aborts with its name.
    pub fn step(
        &mut self,
        params: &mut [(String, &mut Array<F>)],
        grads: &[Array<F>],
    ) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Data(format!(
                "optimizer got {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(_, p)| Array::zeros(p.shape().to_vec())).collect();
            self.v = params.iter().map(|(_, p)| Array::zeros(p.shape().to_vec())).collect();
        }
        self.t += 1;
        let t = F::c(self.t as f64);
        let one = F::one();
        let bc1 = one - self.beta1.powf(t);
        let bc2 = one - self.beta2.powf(t);
        for (i, (name, param)) in params.iter_mut().enumerate() {
            let g = &grads[i];
            if g.shape() != param.shape() {
                return Err(Error::ShapeMismatch {
                    op: "adam-step",
                    lhs: param.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for ((pv, gv), (mv, vv)) in param
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mv = self.beta1 * *mv + (one - self.beta1) * *gv;
                *vv = self.beta2 * *vv + (one - self.beta2) * *gv * *gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            if param.has_non_finite() {
                return Err(Error::Divergence(format!(
                    "parameter {name} became non-finite at optimizer step {}",
                    self.t
                )));
            }
        }
        Ok(())
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}
