//! Lower signal envelope, the DC (systole trough) estimate.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::MHR_BAND;

/// Longest maternal beat period; the default envelope window.
pub fn default_window() -> f64 {
    1.0 / MHR_BAND.0
}

/// Minimum of `x` over `[i - half, i + half]` for every `i`.
fn sliding_min(x: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n);
    let mut q: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while q.back().is_some_and(|&b| x[b] >= x[next]) {
                q.pop_back();
            }
            q.push_back(next);
            next += 1;
        }
        while q.front().is_some_and(|&f| f + half < i) {
            q.pop_front();
        }
        out.push(x[*q.front().expect("window is never empty")]);
    }
    out
}

/// Lower envelope of `x` sampled at `fs`.
///
/// Samples that are the minimum of a centred window of `window` seconds are
/// anchors; the envelope interpolates linearly between anchors and holds the
/// first/last anchor value at the ends.
pub fn lower_envelope(x: &[f64], fs: f64, window: f64) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let half = (libm::round(window * fs / 2.0) as usize).max(1);
    let mins = sliding_min(x, half);
    let anchors: Vec<usize> = (0..x.len()).filter(|&i| x[i] == mins[i]).collect();
    let mut env = Vec::with_capacity(x.len());
    let first = anchors[0];
    let last = anchors[anchors.len() - 1];
    let mut k = 0;
    for i in 0..x.len() {
        if i <= first {
            env.push(x[first]);
        } else if i >= last {
            env.push(x[last]);
        } else {
            while anchors[k + 1] < i {
                k += 1;
            }
            let (a, b) = (anchors[k], anchors[k + 1]);
            let t = (i - a) as f64 / (b - a) as f64;
            env.push(x[a] + t * (x[b] - x[a]));
        }
    }
    env
}
