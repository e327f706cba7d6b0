//! Synchronous demodulation of the two LED carriers.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use super::fir::{filter_decimate, kaiser_lowpass};
use super::{CARRIERS, FS_DEMOD, FS_RAW};
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodConfig {
    pub fs_raw: f64,
    pub fs_out: f64,
    pub carriers: [f64; 2],
    /// Lowpass passband edge, Hz.
    pub pass: f64,
    /// Lowpass stopband edge, Hz.
    pub stop: f64,
    pub atten_db: f64,
}

impl Default for DemodConfig {
    fn default() -> Self {
        Self { fs_raw: FS_RAW, fs_out: FS_DEMOD, carriers: CARRIERS, pass: 35.0, stop: 60.0, atten_db: 80.0 }
    }
}

impl DemodConfig {
    fn factor(&self) -> Result<usize> {
        let f = self.fs_raw / self.fs_out;
        if !(f >= 1.0 && (f - libm::round(f)).abs() < 1e-9) {
            bail!(Config, "output rate {} must divide the raw rate {}", self.fs_out, self.fs_raw);
        }
        for c in self.carriers {
            if !(c > 0.0 && c < self.fs_raw / 2.0) {
                bail!(Config, "carrier {} Hz cannot be demodulated at {} samples per second", c, self.fs_raw);
            }
        }
        Ok(libm::round(f) as usize)
    }
}

/// Recover each wavelength's baseband from a raw detector waveform.
///
/// The waveform is mixed with a sine at each carrier, lowpassed, and
/// decimated. The square carrier's fundamental has amplitude `2/π`, so the
/// mixer gain of `π` makes a constant baseband `c` come back as `c`.
pub fn demodulate(raw: &[f64], cfg: &DemodConfig) -> Result<[Vec<f64>; 2]> {
    let factor = cfg.factor()?;
    if raw.is_empty() {
        bail!(Data, "empty waveform");
    }
    let taps = kaiser_lowpass(cfg.pass, cfg.stop, cfg.atten_db, cfg.fs_raw)?;
    let channel = |f: f64| {
        let mixed: Vec<f64> =
            raw.iter().enumerate().map(|(i, x)| PI * x * libm::sin(TAU * f * i as f64 / cfg.fs_raw)).collect();
        filter_decimate(&mixed, &taps, factor)
    };
    Ok([channel(cfg.carriers[0]), channel(cfg.carriers[1])])
}
