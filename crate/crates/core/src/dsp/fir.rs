//! Linear-phase Kaiser-window FIR lowpass filters.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{bail, Result};

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > sum * 1e-17 {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// Kaiser window shape parameter for a stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * libm::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Windowed-sinc lowpass.
///
/// `pass` and `stop` are the passband and stopband edges in Hz; the sinc
/// cutoff sits halfway between them. Taps are odd in number, symmetric, and
/// sum to one.
pub fn kaiser_lowpass(pass: f64, stop: f64, atten_db: f64, fs: f64) -> Result<Vec<f64>> {
    if !(0.0 < pass && pass < stop && stop < fs / 2.0 && atten_db > 0.0) {
        bail!(Config, "invalid lowpass: pass {} Hz, stop {} Hz, fs {} Hz", pass, stop, fs);
    }
    let width = 2.0 * PI * (stop - pass) / fs;
    let n = libm::ceil((atten_db - 7.95) / (2.285 * width)).max(1.0) as usize + 1;
    let n = n | 1;
    let beta = kaiser_beta(atten_db);
    let fc = 0.5 * (pass + stop) / fs;
    let m = (n - 1) as f64 / 2.0;
    let norm = bessel_i0(beta);
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - m;
            let sinc = if t == 0.0 { 2.0 * fc } else { libm::sin(2.0 * PI * fc * t) / (PI * t) };
            let r = t / m;
            sinc * bessel_i0(beta * libm::sqrt((1.0 - r * r).max(0.0))) / norm
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    Ok(taps)
}

/// Zero-delay filtering evaluated only at every `factor`-th input sample.
///
/// Output `j` is centred on input `j * factor`. Near the ends the taps that
/// fall outside the signal are dropped and the rest renormalized, so a
/// constant input stays constant everywhere.
pub fn filter_decimate(x: &[f64], taps: &[f64], factor: usize) -> Vec<f64> {
    debug_assert!(factor >= 1 && taps.len() % 2 == 1);
    let half = taps.len() / 2;
    let n = x.len();
    let outputs = n.div_ceil(factor);
    let mut y = Vec::with_capacity(outputs);
    for j in 0..outputs {
        let c = j * factor;
        let lo = c.saturating_sub(half);
        let hi = (c + half).min(n - 1);
        let first_tap = lo + half - c;
        let h = &taps[first_tap..first_tap + (hi - lo + 1)];
        let acc: f64 = x[lo..=hi].iter().zip(h).map(|(a, b)| a * b).sum();
        if lo + half == c && hi == c + half {
            y.push(acc);
        } else {
            y.push(acc / h.iter().sum::<f64>());
        }
    }
    y
}

/// Zero-delay filtering at the input rate.
pub fn filter(x: &[f64], taps: &[f64]) -> Vec<f64> {
    filter_decimate(x, taps, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_reference_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert_relative_eq!(bessel_i0(1.0), 1.266_065_877_752_008_4, max_relative = 1e-14);
        assert_relative_eq!(bessel_i0(5.0), 27.239_871_823_604_45, max_relative = 1e-13);
    }

    fn response(taps: &[f64], f: f64, fs: f64) -> f64 {
        let m = (taps.len() - 1) as f64 / 2.0;
        let (mut re, mut im) = (0.0, 0.0);
        for (i, h) in taps.iter().enumerate() {
            let w = 2.0 * PI * f / fs * (i as f64 - m);
            re += h * libm::cos(w);
            im += h * libm::sin(w);
        }
        libm::sqrt(re * re + im * im)
    }

    #[test]
    fn lowpass_meets_its_spec() {
        let taps = kaiser_lowpass(35.0, 60.0, 80.0, 8000.0).unwrap();
        assert_eq!(taps.len() % 2, 1);
        assert!(taps.iter().zip(taps.iter().rev()).all(|(a, b)| a == b));
        for f in [0.0, 5.0, 20.0, 35.0] {
            assert!((response(&taps, f, 8000.0) - 1.0).abs() < 1e-3, "passband {f}");
        }
        for f in [60.0, 250.0, 690.0, 1380.0, 3999.0] {
            assert!(response(&taps, f, 8000.0) < 1e-3, "stopband {f}");
        }
        assert!(kaiser_lowpass(60.0, 35.0, 80.0, 8000.0).is_err());
    }

    #[test]
    fn filtering_keeps_constants_everywhere() {
        let taps = kaiser_lowpass(1.0, 3.0, 60.0, 80.0).unwrap();
        let y = filter(&[2.5; 300], &taps);
        assert!(y.iter().all(|v| (v - 2.5).abs() < 1e-12));
        let d = filter_decimate(&[1.0; 1001], &taps, 10);
        assert_eq!(d.len(), 101);
    }
}
