//! Central finite-difference check of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{GradientTape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Worst relative error over every input element.
    pub max_rel_err: f64,
    /// Worst relative error per input, in input order.
    pub per_input: Vec<f64>,
    /// Number of perturbed elements.
    pub probes: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares analytic gradients of `sum(output * cotangent)` against
/// fourth-order central differences with step `eps`, where the cotangent is a fixed random tensor
/// drawn from `seed`.
///
/// The error of element `i` is `|a_i - n_i| / max(|a_i|, |n_i|, floor)` with
/// `floor = 1e-2 * max_j |n_j|` over the same input, so components that
/// cancel to nearly zero are judged against the gradient's overall scale
/// rather than against f32 rounding noise.
pub fn grad_check<F>(build: F, inputs: &[Tensor], eps: f32, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut GradientTape, &[Var]) -> Result<Var>,
{
    let run = |vals: &[Tensor]| -> Result<(GradientTape, Vec<Var>, Var)> {
        let mut tape = GradientTape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok((tape, vars, out))
    };

    let (tape, vars, out) = run(inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cot = Tensor::from_fn(tape.value(out).shape(), |_, _, _, _| rng.random_range(-1.0..1.0));
    let grads = tape.backward(out, cot.clone())?;

    let probe = |vals: &[Tensor]| -> Result<f64> {
        let (t, _, o) = run(vals)?;
        let y = t.value(o);
        if !y.is_finite() {
            return Err(Error::NonFinite("grad_check probe".into()));
        }
        Ok(y.data().iter().zip(cot.data()).map(|(&a, &b)| a as f64 * b as f64).sum())
    };

    let mut per_input = Vec::with_capacity(inputs.len());
    let mut probes = 0;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let analytic = grads
            .get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(inputs[k].shape()));
        let mut numeric = Vec::with_capacity(inputs[k].numel());
        for i in 0..inputs[k].numel() {
            let orig = inputs[k].data()[i];
            let mut at = |delta: f32| -> Result<f64> {
                work[k].data_mut()[i] = orig + delta;
                probe(&work)
            };
            let (p1, m1, p2, m2) = (at(eps)?, at(-eps)?, at(2.0 * eps)?, at(-2.0 * eps)?);
            work[k].data_mut()[i] = orig;
            numeric.push((8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps as f64));
            probes += 1;
        }
        let scale = numeric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = (1e-2 * scale).max(1e-8);
        let worst = analytic
            .data()
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| {
                let a = a as f64;
                (a - n).abs() / a.abs().max(n.abs()).max(floor)
            })
            .fold(0.0f64, f64::max);
        per_input.push(worst);
    }
    Ok(GradCheckReport {
        max_rel_err: per_input.iter().copied().fold(0.0, f64::max),
        per_input,
        probes,
    })
}

/// Pushes every element at least `margin` away from zero, keeping its sign.
/// Keeps finite-difference probes off activation kinks.
pub fn away_from_zero(t: &Tensor, margin: f32) -> Tensor {
    t.map(|v| if v >= 0.0 { v.max(margin) } else { v.min(-margin) })
}
