//! Numeric gradient verification against central finite differences.
//!
//! The checker reruns the recorded forward function at perturbed inputs,
//! so it never touches the reverse pass it is validating.

use crate::autodiff::array::Array;
use crate::autodiff::tape::{Tape, Var};
use crate::scalar::Scalar;

/// Largest relative gradient error over every entry of every parameter.
///
/// `build` must construct the same scalar expression each call from the
/// leaves it is handed. Relative error uses `max(|fd|, |ad|, floor)` as
/// the denominator; differences below `atol` count as zero (they sit
/// under the cancellation noise of central differences).
pub fn max_relative_error<F, B>(
    build: B,
    params: &[Array<F>],
    step: f64,
    floor: f64,
    atol: f64,
) -> f64
where
    F: Scalar,
    B: Fn(&mut Tape<F>, &[Var]) -> Var,
{
    let run = |inputs: &[Array<F>]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().map(|p| tape.leaf(p.clone())).collect();
        let root = build(&mut tape, &vars);
        tape.value(root).item().f64()
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let root = build(&mut tape, &vars);
    let grads = tape.backward(root).expect("scalar root");

    let mut worst = 0.0f64;
    for (pi, param) in params.iter().enumerate() {
        let analytic = grads.wrt(vars[pi]);
        for ei in 0..param.len() {
            let mut plus = params.to_vec();
            plus[pi].data_mut()[ei] += F::c(step);
            let mut minus = params.to_vec();
            minus[pi].data_mut()[ei] -= F::c(step);
            let fd = (run(&plus) - run(&minus)) / (2.0 * step);
            let ad = analytic.data()[ei].f64();
            if (fd - ad).abs() <= atol {
                continue;
            }
            let denom = fd.abs().max(ad.abs()).max(floor);
            worst = worst.max((fd - ad).abs() / denom);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_matches() {
        let params = vec![Array::vector(vec![0.7f64, -0.3])];
        let err = max_relative_error(
            |tape, vars| {
                let sq = tape.mul(vars[0], vars[0]).unwrap();
                tape.mean_abs(sq)
            },
            &params,
            1e-6,
            1e-8,
            0.0,
        );
        assert!(err < 1e-7, "relative error {err}");
    }
}
