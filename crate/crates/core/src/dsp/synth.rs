//! Dual-wavelength, frequency-multiplexed PPG synthesis.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use super::{CARRIERS, FHR_BAND, FS_RAW, MHR_BAND, MRR_BAND};
use crate::error::{bail, Result};
use crate::rng::{Domain, RngStream};

/// A rate (Hz) sampled uniformly in time, linearly interpolated between samples
/// and held constant beyond the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    pub fs: f64,
    pub hz: Vec<f64>,
}

impl RateSeries {
    pub fn constant(hz: f64) -> Self {
        Self { fs: 1.0, hz: alloc::vec![hz] }
    }

    pub fn at(&self, t: f64) -> f64 {
        let pos = t * self.fs;
        if pos <= 0.0 || self.hz.len() == 1 {
            return self.hz[0];
        }
        let i = libm::floor(pos) as usize;
        if i + 1 >= self.hz.len() {
            return self.hz[self.hz.len() - 1];
        }
        let frac = pos - i as f64;
        self.hz[i] + frac * (self.hz[i + 1] - self.hz[i])
    }

    /// Phase `2π ∫ f dt` at `n` samples of rate `fs`, by the trapezoid rule.
    pub fn phase(&self, fs: f64, n: usize, start: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut phi = start;
        let mut prev = self.at(0.0);
        for i in 0..n {
            if i > 0 {
                let f = self.at(i as f64 / fs);
                phi += TAU * 0.5 * (prev + f) / fs;
                prev = f;
            }
            out.push(phi);
        }
        out
    }

    fn validate(&self, band: (f64, f64), what: &str) -> Result<()> {
        if self.hz.is_empty() || !(self.fs > 0.0) {
            bail!(Config, "{} series is empty", what);
        }
        if self.hz.iter().any(|f| !(band.0..=band.1).contains(f)) {
            bail!(Config, "{} must stay within [{}, {}] Hz", what, band.0, band.1);
        }
        Ok(())
    }
}

/// Physiological rhythms shared by every detector.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysioParams {
    pub fhr: RateSeries,
    pub mhr: f64,
    pub mrr: f64,
    /// Starting phases of the fetal, maternal, and respiratory components.
    pub phases: [f64; 3],
}

impl PhysioParams {
    pub fn validate(&self) -> Result<()> {
        self.fhr.validate(FHR_BAND, "fetal heart rate")?;
        RateSeries::constant(self.mhr).validate(MHR_BAND, "maternal heart rate")?;
        RateSeries::constant(self.mrr).validate(MRR_BAND, "maternal respiration rate")
    }
}

/// Baseband components of one detector at one wavelength, in intensity units.
///
/// Each pulsatile term swings between 0 and `2 * ac`, so the fetal trough is
/// `dc` and the fetal peak is `dc + 2 * fetal_ac`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelAmplitudes {
    pub dc: f64,
    pub fetal_ac: f64,
    pub maternal_ac: f64,
    pub resp_ac: f64,
}

impl ChannelAmplitudes {
    /// Amplitudes implied by a replayed trough/peak intensity pair.
    pub fn from_intensities(i1: f64, i2: f64, maternal_ac: f64, resp_ac: f64) -> Self {
        Self { dc: i1, fetal_ac: (i2 - i1) / 2.0, maternal_ac, resp_ac }
    }
}

/// Shortest record the extraction windows can work with, seconds.
pub const MIN_DURATION: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub fs_raw: f64,
    pub carriers: [f64; 2],
    pub duration: f64,
    /// Standard deviation of white noise added to each baseband sample.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { fs_raw: FS_RAW, carriers: CARRIERS, duration: 240.0, noise_std: 0.0, seed: 0 }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs_raw > 0.0 && self.noise_std >= 0.0) {
            bail!(Config, "sampling rate must be positive and noise non-negative");
        }
        if !(self.duration >= MIN_DURATION) {
            bail!(Config, "duration {} s is shorter than {} s", self.duration, MIN_DURATION);
        }
        for f in self.carriers {
            if !(f > 0.0 && f < self.fs_raw / 2.0) {
                bail!(Config, "carrier {} Hz aliases at {} samples per second", f, self.fs_raw);
            }
        }
        if self.carriers[0] == self.carriers[1] {
            bail!(Config, "carriers must differ");
        }
        Ok(())
    }

    pub fn samples(&self) -> usize {
        libm::round(self.duration * self.fs_raw) as usize
    }
}

/// Raw and demodulated waveforms of every detector.
#[derive(Debug, Clone, PartialEq)]
pub struct PpgRecord {
    pub fs_raw: f64,
    pub fs_demod: f64,
    pub duration: f64,
    /// Modulated detector waveform, one per detector.
    pub raw: Vec<Vec<f64>>,
    /// Demodulated waveforms, `[detector][wavelength]`; empty until demodulated.
    pub demod: Vec<[Vec<f64>; 2]>,
}

/// 50% duty on/off square wave of frequency `f`, built from its odd harmonics
/// below the Nyquist rate (the waveform an ideal anti-aliasing front end sees).
pub fn carrier(f: f64, fs: f64, n: usize) -> Vec<f64> {
    let harmonics: Vec<f64> = (0..).map(|k| (2 * k + 1) as f64).take_while(|k| k * f < fs / 2.0).collect();
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let s: f64 = harmonics.iter().map(|k| libm::sin(TAU * k * f * t) / k).sum();
            0.5 + 2.0 / PI * s
        })
        .collect()
}

/// Modulated raw waveform of every detector.
///
/// `channels[d][w]` gives detector `d`'s baseband at wavelength `w`.
pub fn synthesize(channels: &[[ChannelAmplitudes; 2]], physio: &PhysioParams, cfg: &SynthConfig) -> Result<PpgRecord> {
    cfg.validate()?;
    physio.validate()?;
    if channels.iter().flatten().any(|c| c.dc < 0.0 || c.fetal_ac < 0.0 || c.maternal_ac < 0.0 || c.resp_ac < 0.0) {
        bail!(Domain, "PPG amplitudes must be non-negative");
    }
    let n = cfg.samples();
    let fs = cfg.fs_raw;
    let fetal: Vec<f64> = physio.fhr.phase(fs, n, physio.phases[0]).into_iter().map(libm::sin).collect();
    let maternal: Vec<f64> =
        (0..n).map(|i| libm::sin(TAU * physio.mhr * i as f64 / fs + physio.phases[1])).collect();
    let resp: Vec<f64> = (0..n).map(|i| libm::sin(TAU * physio.mrr * i as f64 / fs + physio.phases[2])).collect();
    let carriers = [carrier(cfg.carriers[0], fs, n), carrier(cfg.carriers[1], fs, n)];

    let mut raw = Vec::with_capacity(channels.len());
    for (d, ch) in channels.iter().enumerate() {
        let mut out = alloc::vec![0.0; n];
        for (w, c) in ch.iter().enumerate() {
            let mut rng = RngStream::new(cfg.seed, Domain::Ppg, (d * 2 + w) as u64);
            for i in 0..n {
                let mut b = c.dc
                    + c.fetal_ac * (1.0 + fetal[i])
                    + c.maternal_ac * (1.0 + maternal[i])
                    + c.resp_ac * (1.0 + resp[i]);
                if cfg.noise_std > 0.0 {
                    b += cfg.noise_std * rng.normal();
                }
                out[i] += b * carriers[w][i];
            }
        }
        raw.push(out);
    }
    Ok(PpgRecord { fs_raw: fs, fs_demod: 0.0, duration: cfg.duration, raw, demod: Vec::new() })
}
