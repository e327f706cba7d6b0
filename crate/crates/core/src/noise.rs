//! Photodetector noise on clean simulated intensities.
//!
//! Normalized intensities are turned into optical power with a source power,
//! into photocurrent with the photodiode responsivity, perturbed with shot
//! and (optionally) transimpedance thermal noise, and mapped back.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::features::{feature_vector, EPR_DIM};
use crate::replay::FeatureRow;
use crate::rng::{Domain, RngStream};

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Shot-noise current standard deviation `sqrt(2 q B i)`.
pub fn shot_sigma(photocurrent: f64, bandwidth: f64) -> f64 {
    libm::sqrt(2.0 * ELEMENTARY_CHARGE * bandwidth * photocurrent.max(0.0))
}

/// Johnson noise current of the gain resistor, `sqrt(4 k T B / R)`.
pub fn thermal_sigma(temperature: f64, resistance: f64, bandwidth: f64) -> f64 {
    libm::sqrt(4.0 * BOLTZMANN * temperature * bandwidth / resistance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Shot noise only.
    ShotOnly,
    /// Shot plus thermal noise, then per-detector gain.
    ShotAndMeasurement,
}

impl Scenario {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "shot" | "shot_only" => Ok(Self::ShotOnly),
            "combined" | "shot_and_measurement" => Ok(Self::ShotAndMeasurement),
            other => bail!(Config, "unknown noise scenario '{}'", other),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ShotOnly => "shot",
            Self::ShotAndMeasurement => "combined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Detection bandwidth, Hz.
    pub bandwidth: f64,
    /// Gain resistor temperature, K.
    pub temperature: f64,
    /// Transimpedance gain resistor, ohm.
    pub resistance: f64,
    /// Photodiode responsivity, A/W.
    pub responsivity: f64,
    /// Optical power corresponding to a normalized intensity of 1, W.
    pub source_power: f64,
    pub scenario: Scenario,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            bandwidth: 40.0,
            temperature: 300.0,
            resistance: 1e6,
            responsivity: 0.60,
            source_power: 1e-3,
            scenario: Scenario::ShotOnly,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        // A zero bandwidth is allowed: it switches the noise off.
        if !(self.bandwidth >= 0.0 && self.temperature > 0.0 && self.resistance > 0.0) {
            bail!(Config, "bandwidth must be >= 0 and temperature, resistance > 0");
        }
        if !(self.responsivity > 0.0 && self.source_power > 0.0) {
            bail!(Config, "responsivity and source power must be positive");
        }
        Ok(())
    }

    /// Standard deviation of the noise in optical power (W) at received power `power`.
    pub fn power_sigma(&self, power: f64) -> f64 {
        let current = self.responsivity * power;
        let shot = shot_sigma(current, self.bandwidth);
        let sigma_i = match self.scenario {
            Scenario::ShotOnly => shot,
            Scenario::ShotAndMeasurement => {
                let th = thermal_sigma(self.temperature, self.resistance, self.bandwidth);
                libm::sqrt(shot * shot + th * th)
            }
        };
        sigma_i / self.responsivity
    }

    /// One noisy reading of received power `power` (W) through a detector with gain `gain`.
    /// The gain only applies in the combined scenario.
    pub fn inject(&self, power: f64, gain: f64, rng: &mut RngStream) -> f64 {
        let noisy = power + self.power_sigma(power) * rng.normal();
        match self.scenario {
            Scenario::ShotOnly => noisy,
            Scenario::ShotAndMeasurement => gain * noisy,
        }
    }
}

/// Per-detector gains `G_r = P_ref / P_r` equalizing mean received power,
/// with the first detector as reference.
pub fn compute_gains(mean_power: &[f64]) -> Result<Vec<f64>> {
    if mean_power.is_empty() {
        bail!(Data, "no detectors to compute gains for");
    }
    if mean_power.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
        bail!(Data, "mean detector powers must be positive: {:?}", mean_power);
    }
    Ok(mean_power.iter().map(|p| mean_power[0] / p).collect())
}

/// Noisy copy of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    pub rows: Vec<FeatureRow>,
    /// Rows dropped because a noisy intensity came out non-positive.
    pub excluded: usize,
    /// Gain of each detector, laid out like the feature vector.
    pub gains: [f64; EPR_DIM],
}

/// Dataset-wide gains: each wavelength's detectors are normalized to that
/// wavelength's first detector, using mean clean systole power.
pub fn dataset_gains(rows: &[FeatureRow], cfg: &NoiseConfig) -> Result<[f64; EPR_DIM]> {
    if rows.is_empty() {
        bail!(Data, "cannot derive gains from an empty dataset");
    }
    let mut mean = [0.0; EPR_DIM];
    for row in rows {
        for k in 0..EPR_DIM {
            mean[k] += row.i1[k] * cfg.source_power;
        }
    }
    let n = rows.len() as f64;
    let mut gains = [0.0; EPR_DIM];
    let per_wl = crate::features::NUM_SELECTED;
    for w in 0..EPR_DIM / per_wl {
        let block: Vec<f64> = mean[w * per_wl..(w + 1) * per_wl].iter().map(|m| m / n).collect();
        gains[w * per_wl..(w + 1) * per_wl].copy_from_slice(&compute_gains(&block)?);
    }
    Ok(gains)
}

/// Perturb one row; `None` if a noisy intensity is non-positive.
///
/// The row's stream is keyed by its dataset index, so the result does not
/// depend on how rows are distributed over workers.
pub fn noisy_row(row: &FeatureRow, index: u64, gains: &[f64; EPR_DIM], cfg: &NoiseConfig) -> Option<FeatureRow> {
    let mut rng = RngStream::new(cfg.seed, Domain::Noise, index);
    let mut out = *row;
    for k in 0..EPR_DIM {
        let p1 = cfg.inject(row.i1[k] * cfg.source_power, gains[k], &mut rng);
        let p2 = cfg.inject(row.i2[k] * cfg.source_power, gains[k], &mut rng);
        out.i1[k] = p1 / cfg.source_power;
        out.i2[k] = p2 / cfg.source_power;
    }
    out.features = feature_vector(&out.i1, &out.i2).ok()?;
    Some(out)
}

/// Apply noise to every row, keeping order and counting exclusions.
pub fn apply_noise(rows: &[FeatureRow], cfg: &NoiseConfig) -> Result<NoisyDataset> {
    cfg.validate()?;
    let gains = dataset_gains(rows, cfg)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut excluded = 0;
    for (i, row) in rows.iter().enumerate() {
        match noisy_row(row, i as u64, &gains, cfg) {
            Some(r) => out.push(r),
            None => excluded += 1,
        }
    }
    if excluded > 0 {
        log::warn!("{} noisy rows had non-positive intensities and were excluded", excluded);
    }
    Ok(NoisyDataset { rows: out, excluded, gains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::feature_vector;
    use crate::replay::Labels;
    use crate::stats::{mean, std_pop};
    use crate::tissue::Hemodynamics;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn sigma_formulas() {
        assert_eq!(shot_sigma(0.0, 100.0), 0.0);
        assert_relative_eq!(shot_sigma(1e-6, 100.0), libm::sqrt(3.204_353_268e-23), max_relative = 1e-9);
        assert_relative_eq!(shot_sigma(4e-6, 10.0), 2.0 * shot_sigma(1e-6, 10.0), max_relative = 1e-12);
        assert_relative_eq!(thermal_sigma(300.0, 1e6, 100.0), libm::sqrt(1.656_778_8e-24), max_relative = 1e-6);
        assert_eq!(thermal_sigma(300.0, f64::INFINITY, 100.0), 0.0);
        assert_relative_eq!(thermal_sigma(300.0, 1e6, 400.0), 2.0 * thermal_sigma(300.0, 1e6, 100.0), max_relative = 1e-12);
    }

    #[test]
    fn zero_bandwidth_is_noiseless() {
        let mut rng = RngStream::new(1, Domain::Noise, 0);
        let mut cfg = NoiseConfig { bandwidth: 0.0, ..Default::default() };
        assert_eq!(cfg.inject(1e-6, 3.0, &mut rng), 1e-6);
        cfg.scenario = Scenario::ShotAndMeasurement;
        assert_eq!(cfg.inject(1e-6, 3.0, &mut rng), 3e-6);
    }

    #[test]
    fn empirical_std_matches_analytic() {
        for scenario in [Scenario::ShotOnly, Scenario::ShotAndMeasurement] {
            let cfg = NoiseConfig { scenario, ..Default::default() };
            let p = 2e-9;
            let mut rng = RngStream::new(5, Domain::Noise, 0);
            let draws: Vec<f64> = (0..100_000).map(|_| cfg.inject(p, 1.0, &mut rng) - p).collect();
            let sigma = cfg.power_sigma(p);
            assert!((std_pop(&draws) / sigma - 1.0).abs() < 0.05);
            assert!(mean(&draws).abs() < 3.0 * sigma / libm::sqrt(1e5));
        }
    }

    #[test]
    fn gains_examples() {
        assert_eq!(compute_gains(&[2.0, 2.0, 2.0]).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(compute_gains(&[8.0, 4.0, 2.0, 1.0]).unwrap(), [1.0, 2.0, 4.0, 8.0]);
        assert!(compute_gains(&[1.0, 0.0]).is_err());
        let p = [3.1, 0.7, 0.02, 1e-5];
        let g = compute_gains(&p).unwrap();
        for k in 0..4 {
            assert_relative_eq!(g[k] * p[k], p[0], max_relative = 1e-12);
        }
    }

    fn row(scale: f64) -> FeatureRow {
        let i1: [f64; EPR_DIM] = core::array::from_fn(|k| scale * libm::exp(-((k % 5) as f64) * 2.0));
        let i2 = i1.map(|v| v * 1.002);
        FeatureRow {
            labels: Labels { d_m: 4.0, hemo: Hemodynamics::new(120.0, 0.98, 150.0, 0.5).unwrap() },
            i1,
            i2,
            features: feature_vector(&i1, &i2).unwrap(),
        }
    }

    #[test]
    fn dataset_noise_is_deterministic_and_counts_exclusions() {
        let rows: Vec<FeatureRow> = (0..20).map(|i| row(1e-6 * (1.0 + i as f64))).collect();
        let cfg = NoiseConfig { scenario: Scenario::ShotAndMeasurement, seed: 3, ..Default::default() };
        let a = apply_noise(&rows, &cfg).unwrap();
        assert_eq!(a, apply_noise(&rows, &cfg).unwrap());
        assert_eq!(a.rows.len() + a.excluded, rows.len());
        assert_relative_eq!(a.gains[0], 1.0);
        assert_relative_eq!(a.gains[1], libm::exp(2.0), max_relative = 1e-12);

        // Thermal noise at this tiny power drives intensities negative.
        let dark: Vec<FeatureRow> = (0..20).map(|_| row(1e-12)).collect();
        let out = apply_noise(&dark, &NoiseConfig { resistance: 1e3, ..cfg }).unwrap();
        assert!(out.excluded > 0);
    }

    proptest! {
        #[test]
        fn combined_sigma_dominates_shot(p in 0.0f64..1e-3, b in 1.0f64..1e4, r in 1e3f64..1e9) {
            let shot = NoiseConfig { bandwidth: b, resistance: r, ..Default::default() };
            let both = NoiseConfig { scenario: Scenario::ShotAndMeasurement, ..shot };
            prop_assert!(both.power_sigma(p) >= shot.power_sigma(p));
        }
    }
}
