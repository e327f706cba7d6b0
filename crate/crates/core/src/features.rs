//! Pulsation features: EPR, ratio-of-ratios, and EPR-vs-distance smoothing.

use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Detectors used per wavelength in a feature row.
pub const NUM_SELECTED: usize = 5;
/// Wavelengths per feature row.
pub const NUM_WAVELENGTHS: usize = 2;
/// Length of the EPR feature vector.
pub const EPR_DIM: usize = NUM_SELECTED * NUM_WAVELENGTHS;
/// Length of the ratio-of-ratios feature vector.
pub const ROR_DIM: usize = NUM_SELECTED;

/// Exponential pulsation ratio `I2 / I1` of diastole peak to systole trough.
pub fn epr(i_trough: f64, i_peak: f64) -> Result<f64> {
    if !(i_trough > 0.0 && i_peak > 0.0 && i_trough.is_finite() && i_peak.is_finite()) {
        bail!(Domain, "EPR needs positive finite intensities, got {} and {}", i_trough, i_peak);
    }
    Ok(i_peak / i_trough)
}

/// Ratio of ratios `(ac1 / dc1) / (ac2 / dc2)`.
pub fn ror(ac1: f64, dc1: f64, ac2: f64, dc2: f64) -> Result<f64> {
    if !(dc1 > 0.0 && dc2 > 0.0) {
        bail!(Domain, "ratio of ratios needs positive DC, got {} and {}", dc1, dc2);
    }
    if ac2 == 0.0 {
        bail!(Domain, "ratio of ratios is undefined for zero AC at the second wavelength");
    }
    Ok((ac1 / dc1) / (ac2 / dc2))
}

/// Ratio of ratios from trough/peak intensity pairs, with `AC = (I2 - I1) / 2`
/// and `DC = I1` at each wavelength.
pub fn ror_from_intensities(w1: (f64, f64), w2: (f64, f64)) -> Result<f64> {
    ror((w1.1 - w1.0) / 2.0, w1.0, (w2.1 - w2.0) / 2.0, w2.0)
}

/// EPR and ratio-of-ratios features of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Features {
    /// `[w1 r1..r5, w2 r1..r5]`.
    pub epr: [f64; EPR_DIM],
    /// One value per detector; NaN where the second wavelength has no AC.
    pub ror: [f64; ROR_DIM],
}

impl Features {
    pub fn ror_defined(&self) -> bool {
        self.ror.iter().all(|r| r.is_finite())
    }
}

/// Features from systole (`i1`) and diastole (`i2`) intensities laid out
/// wavelength-major. Fails if any intensity is non-positive.
pub fn feature_vector(i1: &[f64; EPR_DIM], i2: &[f64; EPR_DIM]) -> Result<Features> {
    let mut epr_out = [0.0; EPR_DIM];
    for k in 0..EPR_DIM {
        epr_out[k] = epr(i1[k], i2[k])?;
    }
    let mut ror_out = [0.0; ROR_DIM];
    for r in 0..ROR_DIM {
        let s = NUM_SELECTED;
        ror_out[r] = ror_from_intensities((i1[r], i2[r]), (i1[s + r], i2[s + r])).unwrap_or(f64::NAN);
    }
    Ok(Features { epr: epr_out, ror: ror_out })
}

/// EPR as a function of source-detector distance at one wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct EprCurve {
    pub sdd: Vec<f64>,
    pub epr: Vec<f64>,
    pub wavelength: f64,
}

impl EprCurve {
    pub fn new(sdd: Vec<f64>, epr: Vec<f64>, wavelength: f64) -> Result<Self> {
        if sdd.len() != epr.len() {
            bail!(Data, "curve has {} distances but {} values", sdd.len(), epr.len());
        }
        if sdd.windows(2).any(|w| !(w[0] < w[1])) {
            bail!(Data, "curve distances must be strictly increasing");
        }
        if epr.iter().any(|e| !(*e > 0.0)) {
            bail!(Domain, "EPR values must be positive");
        }
        Ok(Self { sdd, epr, wavelength })
    }
}

/// Smooth `y(x)` by differentiating, averaging neighbouring slopes, and
/// re-integrating from the first point.
///
/// Slopes are central differences (one-sided at the ends); adjacent pairs are
/// averaged to give one slope per interval; the curve is rebuilt from `y[0]`.
/// Fewer than three points are returned unchanged.
pub fn smooth_curve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = y.len();
    debug_assert_eq!(x.len(), n);
    if n < 3 {
        return y.to_vec();
    }
    let mut d = Vec::with_capacity(n);
    d.push((y[1] - y[0]) / (x[1] - x[0]));
    for i in 1..n - 1 {
        d.push((y[i + 1] - y[i - 1]) / (x[i + 1] - x[i - 1]));
    }
    d.push((y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]));
    let mut out = Vec::with_capacity(n);
    out.push(y[0]);
    for i in 0..n - 1 {
        let slope = 0.5 * (d[i] + d[i + 1]);
        out.push(out[i] + slope * (x[i + 1] - x[i]));
    }
    out
}

pub fn smooth_epr_curve(curve: &EprCurve) -> EprCurve {
    if curve.epr.len() < 3 {
        log::warn!("EPR curve with {} points left unsmoothed", curve.epr.len());
    }
    EprCurve { sdd: curve.sdd.clone(), epr: smooth_curve(&curve.sdd, &curve.epr), wavelength: curve.wavelength }
}

/// Apply [`smooth_curve`] to each wavelength's EPRs and to the RoRs, over the
/// detector distances `sdd`.
pub fn smooth_features(f: &Features, sdd: &[f64; NUM_SELECTED]) -> Features {
    let mut epr_out = [0.0; EPR_DIM];
    for w in 0..NUM_WAVELENGTHS {
        let s = smooth_curve(sdd, &f.epr[w * NUM_SELECTED..(w + 1) * NUM_SELECTED]);
        epr_out[w * NUM_SELECTED..(w + 1) * NUM_SELECTED].copy_from_slice(&s);
    }
    let mut ror_out = [0.0; ROR_DIM];
    ror_out.copy_from_slice(&smooth_curve(sdd, &f.ror));
    Features { epr: epr_out, ror: ror_out }
}
