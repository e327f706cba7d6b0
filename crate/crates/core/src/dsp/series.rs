//! EPR time series from lock-in AC and envelope DC.

use alloc::vec::Vec;

use super::envelope::{default_window, lower_envelope};
use super::lockin::{lock_in, LockIn};
use super::synth::RateSeries;
use crate::error::{bail, Result};

/// Moving-average window, seconds.
pub const EPR_WINDOW: f64 = 90.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EprSeries {
    pub fs: f64,
    /// Pointwise ratio before smoothing; excluded samples are interpolated.
    pub raw: Vec<f64>,
    pub epr: Vec<f64>,
    /// Samples dropped for a non-positive DC.
    pub excluded: usize,
}

impl EprSeries {
    pub fn mean(&self) -> f64 {
        self.epr.iter().sum::<f64>() / self.epr.len() as f64
    }
}

/// Linear interpolation over `None` gaps, holding the nearest value at the ends.
fn fill_gaps(x: &[Option<f64>]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..x.len()).filter(|&i| x[i].is_some()).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = Vec::with_capacity(x.len());
    let mut k = 0;
    for i in 0..x.len() {
        let v = if i <= first {
            x[first].unwrap()
        } else if i >= last {
            x[last].unwrap()
        } else if let Some(v) = x[i] {
            v
        } else {
            while known[k + 1] < i {
                k += 1;
            }
            let (a, b) = (known[k], known[k + 1]);
            let (ya, yb) = (x[a].unwrap(), x[b].unwrap());
            ya + (i - a) as f64 / (b - a) as f64 * (yb - ya)
        };
        out.push(v);
    }
    Some(out)
}

/// Centered moving average of `2 * half + 1` samples, shrinking at the ends.
pub fn moving_average(x: &[f64], half: usize) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix[prefix.len() - 1] + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// `(2 * ac + dc) / dc` per sample, then a centered moving average of
/// `window` seconds.
pub fn epr_series(ac: &[f64], dc: &[f64], fs: f64, window: f64) -> Result<EprSeries> {
    if ac.len() != dc.len() || ac.is_empty() {
        bail!(Data, "AC and DC series must be aligned and non-empty ({} vs {})", ac.len(), dc.len());
    }
    if !(fs > 0.0 && window > 0.0) {
        bail!(Config, "sampling rate and window must be positive");
    }
    let pointwise: Vec<Option<f64>> =
        ac.iter().zip(dc).map(|(a, d)| (*d > 0.0).then(|| (2.0 * a + d) / d)).collect();
    let excluded = pointwise.iter().filter(|v| v.is_none()).count();
    if excluded > 0 {
        log::warn!("{} samples with non-positive DC excluded from the EPR series", excluded);
    }
    let Some(raw) = fill_gaps(&pointwise) else {
        bail!(Data, "every DC sample is non-positive");
    };
    let half = libm::round(window * fs) as usize / 2;
    let epr = moving_average(&raw, half);
    Ok(EprSeries { fs, raw, epr, excluded })
}

/// Envelope, lock-in, and EPR series of one demodulated channel.
///
/// The lock-in settling time is cut from both ends, so the series starts
/// `settle` samples into the signal.
pub fn extract_epr(x: &[f64], fhr: &RateSeries, lockin: &LockIn) -> Result<Extracted> {
    let dc = lower_envelope(x, lockin.fs, default_window());
    let ac = lock_in(x, fhr, lockin)?;
    let settle = ac.settle;
    if x.len() <= 2 * settle {
        bail!(Data, "{} samples do not outlast the lock-in settling time", x.len());
    }
    let keep = settle..x.len() - settle;
    let series = epr_series(&ac.amplitude[keep.clone()], &dc[keep], lockin.fs, EPR_WINDOW)?;
    Ok(Extracted { series, settle, clamped: ac.clamped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extracted {
    pub series: EprSeries,
    /// Samples trimmed from each end.
    pub settle: usize,
    pub clamped: usize,
}
