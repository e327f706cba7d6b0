//! Lock-in detection of the fetal pulsation amplitude.

use alloc::vec::Vec;

use super::fir::{filter, kaiser_lowpass};
use super::synth::RateSeries;
use super::{FHR_BAND, FS_DEMOD};
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockIn {
    pub fs: f64,
    /// Lowpass passband edge, Hz.
    pub pass: f64,
    /// Lowpass stopband edge, Hz.
    pub stop: f64,
    pub atten_db: f64,
}

impl Default for LockIn {
    fn default() -> Self {
        Self { fs: FS_DEMOD, pass: 0.1, stop: 0.6, atten_db: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockInOutput {
    /// Amplitude of the component at the reference rate.
    pub amplitude: Vec<f64>,
    /// Heart-rate samples that were clamped into the fetal band.
    pub clamped: usize,
    /// Samples at each end where the lowpass runs off the signal.
    pub settle: usize,
}

/// Amplitude of the component of `x` that tracks the instantaneous rate `fhr`.
///
/// A term `a * sin(phase + θ)` comes out as `a` whatever `θ`. The signal mean
/// is removed before mixing so the DC level cannot leak in where the lowpass
/// is truncated at the ends.
pub fn lock_in(x: &[f64], fhr: &RateSeries, cfg: &LockIn) -> Result<LockInOutput> {
    if x.is_empty() || fhr.hz.is_empty() || !(fhr.fs > 0.0) {
        bail!(Data, "lock-in needs a signal and a heart-rate series");
    }
    let mut rate = fhr.clone();
    let mut clamped = 0;
    for f in rate.hz.iter_mut() {
        let c = f.clamp(FHR_BAND.0, FHR_BAND.1);
        if c != *f {
            clamped += 1;
            *f = c;
        }
    }
    if clamped > 0 {
        log::warn!("{} heart-rate samples outside [{}, {}] Hz were clamped", clamped, FHR_BAND.0, FHR_BAND.1);
    }
    let taps = kaiser_lowpass(cfg.pass, cfg.stop, cfg.atten_db, cfg.fs)?;
    let phase = rate.phase(cfg.fs, x.len(), 0.0);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let (i_mix, q_mix): (Vec<f64>, Vec<f64>) =
        x.iter().zip(&phase).map(|(v, p)| ((v - mean) * libm::cos(*p), (v - mean) * libm::sin(*p))).unzip();
    let i = filter(&i_mix, &taps);
    let q = filter(&q_mix, &taps);
    let amplitude = i.iter().zip(&q).map(|(a, b)| 2.0 * libm::sqrt(a * a + b * b)).collect();
    Ok(LockInOutput { amplitude, clamped, settle: taps.len() / 2 })
}
