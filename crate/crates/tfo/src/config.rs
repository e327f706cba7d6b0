//! Experiment configuration, read from TOML.
//!
//! Lengths are in mm, absorption and scattering in mm⁻¹, hemoglobin in g/L,
//! saturations as fractions, extinction coefficients in cm⁻¹/M (decadic).

use std::path::Path;

use serde::{Deserialize, Serialize};
use tfo_core::mlp::MlpConfig;
use tfo_core::noise::{NoiseConfig, Scenario};
use tfo_core::replay::{nearest_rings, HemoGrid};
use tfo_core::tissue::{
    evenly_spaced_rings, BloodModel, ExtinctionTable, LayerKind, LayerSpec, OpticalProps, TissueModel,
    TissueModelSpec,
};

use crate::error::{bail, Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub format_version: u32,
    /// Photon seed; each table's stream is keyed by it.
    pub seed: u64,
    /// Photons launched per table.
    pub photons: u64,
    /// Exactly two wavelengths, nm.
    pub wavelengths: Vec<f64>,
    pub geometry: Geometry,
    pub detectors: Detectors,
    pub layers: Vec<Layer>,
    pub extinction: Vec<Extinction>,
    #[serde(default)]
    pub blood: Blood,
    pub grid: Grid,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub training: Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Maternal wall thicknesses; one table pair per value.
    pub d_m: Axis,
    #[serde(default)]
    pub source: [f64; 2],
    pub lateral_half_width: f64,
    pub volume_depth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detectors {
    pub first_sdd: f64,
    pub last_sdd: f64,
    pub count: usize,
    pub half_width: f64,
    /// Distances used as features; each maps to the nearest ring.
    pub selected_sdd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// `maternal_wall`, `uterus`, `amniotic_fluid`, or `fetal_tissue`.
    pub kind: String,
    /// Required for uterus and amniotic fluid; the maternal wall takes its
    /// thickness from `geometry.d_m` and the fetal layer fills the volume.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thickness: Option<f64>,
    /// One entry per wavelength.
    pub optics: Vec<Optics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optics {
    pub mu_a: f64,
    pub mu_s: f64,
    pub g: f64,
    pub n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extinction {
    pub wavelength: f64,
    pub hbo2: f64,
    pub hhb: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Blood {
    pub arterial_fraction: f64,
    pub venous_fraction: f64,
    pub venous_saturation_factor: f64,
    pub pulsation: f64,
}

impl Default for Blood {
    fn default() -> Self {
        let b = BloodModel::default();
        Self {
            arterial_fraction: b.arterial_fraction,
            venous_fraction: b.venous_fraction,
            venous_saturation_factor: b.venous_saturation_factor,
            pulsation: b.pulsation,
        }
    }
}

/// Either explicit values or `count` evenly spaced values from `start` to `stop`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Values(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::Values(v) => v.clone(),
            Axis::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub hb_m: Axis,
    pub s_m: Axis,
    pub hb_f: Axis,
    pub s_f: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScenario {
    None,
    Shot,
    Combined,
}

impl NoiseScenario {
    pub fn core(self) -> Option<Scenario> {
        match self {
            NoiseScenario::None => None,
            NoiseScenario::Shot => Some(Scenario::ShotOnly),
            NoiseScenario::Combined => Some(Scenario::ShotAndMeasurement),
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "none" | "clean" => Ok(Self::None),
            other => match Scenario::from_name(other)? {
                Scenario::ShotOnly => Ok(Self::Shot),
                Scenario::ShotAndMeasurement => Ok(Self::Combined),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub scenario: NoiseScenario,
    pub bandwidth: f64,
    pub temperature: f64,
    pub resistance: f64,
    pub responsivity: f64,
    pub source_power: f64,
    pub seed: u64,
}

impl Default for Noise {
    fn default() -> Self {
        let n = NoiseConfig::default();
        Self {
            scenario: NoiseScenario::None,
            bandwidth: n.bandwidth,
            temperature: n.temperature,
            resistance: n.resistance,
            responsivity: n.responsivity,
            source_power: n.source_power,
            seed: n.seed,
        }
    }
}

impl Noise {
    /// Core noise parameters, or `None` for the clean scenario.
    pub fn core(&self) -> Option<NoiseConfig> {
        self.core_for(self.scenario)
    }

    pub fn core_for(&self, scenario: NoiseScenario) -> Option<NoiseConfig> {
        Some(NoiseConfig {
            bandwidth: self.bandwidth,
            temperature: self.temperature,
            resistance: self.resistance,
            responsivity: self.responsivity,
            source_power: self.source_power,
            scenario: scenario.core()?,
            seed: self.seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Epr,
    Ror,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 2] = [FeatureKind::Epr, FeatureKind::Ror];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Epr => "epr",
            FeatureKind::Ror => "ror",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "epr" => Ok(Self::Epr),
            "ror" => Ok(Self::Ror),
            other => bail!(Config, "unknown feature kind '{}'", other),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Epr => tfo_core::features::EPR_DIM,
            FeatureKind::Ror => tfo_core::features::ROR_DIM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Training {
    pub features: FeatureKind,
    pub first_hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub init_std: f64,
    pub train_fraction: f64,
    /// One model is trained per seed; the seed drives the split, the
    /// initialization, and the shuffling.
    pub seeds: Vec<u64>,
    /// Smooth each sample's feature curve over distance before training.
    pub smooth: bool,
}

impl Default for Training {
    fn default() -> Self {
        let m = MlpConfig::new(1);
        Self {
            features: FeatureKind::Epr,
            first_hidden: m.first_hidden,
            lr: m.lr,
            weight_decay: m.weight_decay,
            batch_size: m.batch_size,
            max_epochs: m.max_epochs,
            patience: m.patience,
            init_std: m.init_std,
            train_fraction: 0.8,
            seeds: vec![0],
            smooth: true,
        }
    }
}

impl Training {
    pub fn mlp(&self, input_dim: usize, seed: u64) -> MlpConfig {
        MlpConfig {
            first_hidden: self.first_hidden,
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            init_std: self.init_std,
            seed,
            ..MlpConfig::new(input_dim)
        }
    }
}

fn optics(mu_a: f64, mu_s: f64, n: f64) -> Optics {
    Optics { mu_a, mu_s, g: 0.0, n }
}

impl Config {
    /// Built-in four-layer profile at 735/850 nm.
    ///
    /// Scattering is given as isotropic with the reduced coefficient of soft
    /// tissue; static absorptions are typical literature magnitudes.
    pub fn default_profile() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed: 1,
            photons: 10_000_000,
            wavelengths: vec![735.0, 850.0],
            geometry: Geometry {
                d_m: Axis::Range { start: 4.0, stop: 34.0, count: 31 },
                source: [0.0, 0.0],
                lateral_half_width: 120.0,
                volume_depth: 70.0,
                path_cutoff: None,
            },
            detectors: Detectors {
                first_sdd: 10.0,
                last_sdd: 95.0,
                count: 20,
                half_width: 1.0,
                selected_sdd: vec![15.0, 33.0, 46.0, 68.0, 94.0],
            },
            layers: vec![
                Layer {
                    kind: "maternal_wall".into(),
                    thickness: None,
                    optics: vec![optics(0.02, 1.0, 1.4), optics(0.018, 0.85, 1.4)],
                },
                Layer {
                    kind: "uterus".into(),
                    thickness: Some(5.0),
                    optics: vec![optics(0.015, 0.9, 1.4), optics(0.012, 0.78, 1.4)],
                },
                Layer {
                    kind: "amniotic_fluid".into(),
                    thickness: Some(1.0),
                    optics: vec![optics(0.0025, 0.05, 1.33), optics(0.0043, 0.05, 1.33)],
                },
                Layer {
                    kind: "fetal_tissue".into(),
                    thickness: None,
                    optics: vec![optics(0.03, 1.1, 1.4), optics(0.025, 0.95, 1.4)],
                },
            ],
            extinction: vec![
                Extinction { wavelength: 735.0, hbo2: 418.0, hhb: 1109.0 },
                Extinction { wavelength: 850.0, hbo2: 1058.0, hhb: 691.32 },
            ],
            blood: Blood::default(),
            grid: Grid {
                hb_m: Axis::Values(vec![110.0, 130.0, 150.0]),
                s_m: Axis::Values(vec![0.90, 0.95, 1.00]),
                hb_f: Axis::Values(vec![120.0, 150.0, 180.0]),
                s_f: Axis::Range { start: 0.1, stop: 0.9, count: 17 },
            },
            noise: Noise::default(),
            training: Training::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {}", path.display(), m)),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check everything that can be checked without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            bail!(Config, "format_version {} is not supported (expected {})", self.format_version, FORMAT_VERSION);
        }
        if self.photons == 0 {
            bail!(Config, "photons must be positive");
        }
        let d_m = self.geometry.d_m.values();
        if d_m.is_empty() {
            bail!(Config, "geometry.d_m is empty");
        }
        for d in &d_m {
            self.model(*d)?;
        }
        self.extinction_table()?;
        self.blood_model().validate()?;
        self.hemo_grid().validate()?;
        self.selected_rings()?;
        if self.selected_rings()?.len() != tfo_core::features::NUM_SELECTED {
            bail!(Config, "exactly {} selected distances are required", tfo_core::features::NUM_SELECTED);
        }
        if let Some(n) = self.noise.core() {
            n.validate()?;
        }
        let t = &self.training;
        if !(0.0 < t.train_fraction && t.train_fraction < 1.0) {
            bail!(Config, "training.train_fraction must lie strictly between 0 and 1");
        }
        if t.seeds.is_empty() {
            bail!(Config, "training.seeds is empty");
        }
        t.mlp(1, 0).validate()?;
        Ok(())
    }

    pub fn d_m_values(&self) -> Vec<f64> {
        self.geometry.d_m.values()
    }

    pub fn rings(&self) -> Vec<tfo_core::tissue::DetectorRing> {
        let d = &self.detectors;
        evenly_spaced_rings(d.first_sdd, d.last_sdd, d.count, d.half_width)
    }

    /// Ring indices of the selected distances.
    pub fn selected_rings(&self) -> Result<Vec<usize>> {
        Ok(nearest_rings(&self.rings(), &self.detectors.selected_sdd)?)
    }

    /// Centre distances of the selected rings.
    pub fn selected_sdd(&self) -> Result<[f64; tfo_core::features::NUM_SELECTED]> {
        let rings = self.rings();
        let sel = self.selected_rings()?;
        let mut out = [0.0; tfo_core::features::NUM_SELECTED];
        if sel.len() != out.len() {
            bail!(Config, "exactly {} selected distances are required", out.len());
        }
        for (o, i) in out.iter_mut().zip(sel) {
            *o = rings[i].sdd;
        }
        Ok(out)
    }

    /// The tissue model for maternal wall thickness `d_m`.
    pub fn model(&self, d_m: f64) -> Result<TissueModel> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let kind = LayerKind::from_name(&l.kind)
                .ok_or_else(|| Error::Config(format!("unknown layer kind '{}'", l.kind)))?;
            let thickness = match kind {
                LayerKind::MaternalWall => {
                    if l.thickness.is_some() {
                        bail!(Config, "maternal wall thickness comes from geometry.d_m");
                    }
                    Some(d_m)
                }
                _ => l.thickness,
            };
            let optics = l.optics.iter().map(|o| OpticalProps { mu_a: o.mu_a, mu_s: o.mu_s, g: o.g, n: o.n }).collect();
            layers.push(LayerSpec { kind, thickness, optics });
        }
        let g = &self.geometry;
        Ok(TissueModel::new(TissueModelSpec {
            layers,
            wavelengths: self.wavelengths.clone(),
            source: (g.source[0], g.source[1]),
            rings: self.rings(),
            lateral_half_width: g.lateral_half_width,
            volume_depth: g.volume_depth,
            path_cutoff: g.path_cutoff,
        })?)
    }

    pub fn extinction_table(&self) -> Result<ExtinctionTable> {
        let rows: Vec<(f64, f64, f64)> = self.extinction.iter().map(|e| (e.wavelength, e.hbo2, e.hhb)).collect();
        let table = ExtinctionTable::from_molar_decadic(&rows)?;
        table.covers(&self.wavelengths)?;
        Ok(table)
    }

    pub fn blood_model(&self) -> BloodModel {
        let b = &self.blood;
        BloodModel {
            arterial_fraction: b.arterial_fraction,
            venous_fraction: b.venous_fraction,
            venous_saturation_factor: b.venous_saturation_factor,
            pulsation: b.pulsation,
        }
    }

    pub fn hemo_grid(&self) -> HemoGrid {
        let g = &self.grid;
        HemoGrid { hb_m: g.hb_m.values(), s_m: g.s_m.values(), hb_f: g.hb_f.values(), s_f: g.s_f.values() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_is_valid_and_roundtrips() {
        let cfg = Config::default_profile();
        cfg.validate().unwrap();
        let back = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn selected_distances_map_to_expected_rings() {
        let cfg = Config::default_profile();
        assert_eq!(cfg.selected_rings().unwrap(), vec![1, 5, 8, 13, 19]);
    }

    #[test]
    fn fetal_depths_of_the_shallow_models() {
        let cfg = Config::default_profile();
        for (d_m, depth) in [(4.0, 10.0), (5.0, 11.0), (6.0, 12.0)] {
            assert!((cfg.model(d_m).unwrap().fetal_depth() - depth).abs() < 1e-12);
        }
    }

    #[test]
    fn axis_range_is_inclusive() {
        let a = Axis::Range { start: 0.1, stop: 0.9, count: 5 };
        let v = a.values();
        assert_eq!(v.len(), 5);
        assert!((v[4] - 0.9).abs() < 1e-15 && (v[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_version_and_unknown_fields_are_config_errors() {
        let mut cfg = Config::default_profile();
        cfg.format_version = 9;
        let err = Config::from_toml(&cfg.to_toml()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let text = Config::default_profile().to_toml().replace("photons =", "photon_count =");
        assert_eq!(Config::from_toml(&text).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn explicit_maternal_thickness_is_rejected() {
        let mut cfg = Config::default_profile();
        cfg.layers[0].thickness = Some(3.0);
        assert!(cfg.validate().is_err());
    }
}
