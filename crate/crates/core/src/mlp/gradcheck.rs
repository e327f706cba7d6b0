//! Finite-difference verification of backpropagation.

use alloc::vec::Vec;

use super::model::{Mlp, Mode};
use crate::error::Result;

/// Central-difference step.
pub const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
pub const FLOOR: f64 = 1e-6;
/// The absolute floor also grows to this fraction of the largest gradient,
/// since central differences of a zero gradient still carry roundoff.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters whose perturbation moved a pre-activation across zero.
    pub skipped: usize,
}

/// Largest relative error between analytic and central-difference gradients
/// over the parameters in `indices` (all of them when `None`).
///
/// In [`Mode::Train`] the batch statistics are part of the function being
/// differentiated, so the check covers the full batch-norm backward pass.
pub fn gradcheck(
    model: &Mlp,
    x: &[f64],
    y: &[f64],
    weights: &[f64],
    mode: Mode,
    indices: Option<&[usize]>,
) -> Result<GradCheck> {
    let rows = y.len();
    let (_, grad, _) = model.loss_grad(x, y, weights, mode)?;
    let all: Vec<usize> = (0..grad.len()).collect();
    let indices = indices.unwrap_or(&all);
    let floor = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) * RELATIVE_FLOOR;
    let floor = floor.max(FLOOR);
    let pattern = model.activation_pattern(x, rows, mode);
    let mut probe = model.clone();
    let mut out = GradCheck { max_rel_error: 0.0, checked: 0, skipped: 0 };
    for &i in indices {
        let p0 = model.params()[i];
        probe.params_mut()[i] = p0 + STEP;
        let kink_hi = probe.activation_pattern(x, rows, mode) != pattern;
        let (hi, _, _) = probe.loss_grad(x, y, weights, mode)?;
        probe.params_mut()[i] = p0 - STEP;
        let kink_lo = probe.activation_pattern(x, rows, mode) != pattern;
        let (lo, _, _) = probe.loss_grad(x, y, weights, mode)?;
        probe.params_mut()[i] = p0;
        if kink_hi || kink_lo {
            out.skipped += 1;
            continue;
        }
        let numeric = (hi - lo) / (2.0 * STEP);
        let scale = grad[i].abs().max(numeric.abs()).max(floor);
        out.max_rel_error = out.max_rel_error.max((grad[i] - numeric).abs() / scale);
        out.checked += 1;
    }
    Ok(out)
}

/// Shift hidden biases until every pre-activation on the batch is at least
/// `margin` away from the ReLU kink. Returns the number of biases moved.
pub fn nudge_from_kinks(model: &mut Mlp, x: &[f64], rows: usize, mode: Mode, margin: f64) -> usize {
    let mut moved = 0;
    for layer in 0..model.num_hidden() {
        let z = model.preactivations(x, rows, mode, layer);
        let width = z.len() / rows;
        for u in 0..width {
            let col: Vec<f64> = (0..rows).map(|r| z[r * width + u]).collect();
            let clear = |d: f64| col.iter().all(|v| (v + d).abs() >= margin);
            if clear(0.0) {
                continue;
            }
            // Candidate shifts on both sides, growing until one clears.
            let shift = (1..)
                .flat_map(|k| {
                    let s = k as f64 * margin;
                    [s, -s]
                })
                .find(|d| clear(*d))
                .expect("some shift clears a finite column");
            let b = model.bias_index(layer, u);
            model.params_mut()[b] += shift;
            moved += 1;
        }
    }
    moved
}
