//! Layered tissue geometry and hemodynamics-driven absorption.
//!
//! All lengths are millimetres and all coefficients are per millimetre.

use alloc::vec::Vec;

use crate::error::{bail, Error, Result};

/// Number of tissue layers in the model.
pub const NUM_LAYERS: usize = 4;

/// Relative drop in fetal hemoglobin concentration between systole and diastole.
pub const FETAL_PULSATION: f64 = 0.025;

/// Grams per mole of hemoglobin (tetramer), used to convert molar extinction.
pub const HB_MOLAR_MASS: f64 = 64_500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    MaternalWall,
    Uterus,
    AmnioticFluid,
    FetalTissue,
}

impl LayerKind {
    /// Top-to-bottom order required of every model.
    pub const ORDER: [LayerKind; NUM_LAYERS] = [
        LayerKind::MaternalWall,
        LayerKind::Uterus,
        LayerKind::AmnioticFluid,
        LayerKind::FetalTissue,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Layers whose absorption follows the blood model.
    pub fn is_pulsatile(self) -> bool {
        matches!(self, LayerKind::MaternalWall | LayerKind::FetalTissue)
    }

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::MaternalWall => "maternal_wall",
            LayerKind::Uterus => "uterus",
            LayerKind::AmnioticFluid => "amniotic_fluid",
            LayerKind::FetalTissue => "fetal_tissue",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ORDER.into_iter().find(|k| k.name() == name)
    }
}

/// Bulk optical properties of one layer at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalProps {
    /// Absorption coefficient, mm⁻¹.
    pub mu_a: f64,
    /// Scattering coefficient, mm⁻¹.
    pub mu_s: f64,
    /// Scattering anisotropy, in (-1, 1).
    pub g: f64,
    /// Refractive index, at least 1.
    pub n: f64,
}

impl OpticalProps {
    fn validate(&self) -> Result<()> {
        let finite = self.mu_a.is_finite() && self.mu_s.is_finite() && self.g.is_finite() && self.n.is_finite();
        if !finite || self.mu_a < 0.0 || self.mu_s < 0.0 || self.g.abs() >= 1.0 || self.n < 1.0 {
            bail!(Config, "invalid optical properties {:?}", self);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// `None` is only valid for the fetal layer and means "down to the volume bottom".
    pub thickness: Option<f64>,
    /// One entry per model wavelength, in the model's wavelength order.
    pub optics: Vec<OpticalProps>,
}

/// Annular detector on the top surface, centred on the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRing {
    /// Source-detector distance, mm.
    pub sdd: f64,
    /// Half the radial width of the annulus, mm.
    pub half_width: f64,
}

impl DetectorRing {
    pub fn inner(&self) -> f64 {
        self.sdd - self.half_width
    }

    pub fn outer(&self) -> f64 {
        self.sdd + self.half_width
    }

    pub fn contains(&self, radius: f64) -> bool {
        radius >= self.inner() && radius <= self.outer()
    }
}

/// `count` rings evenly spaced from `first` to `last` inclusive.
pub fn evenly_spaced_rings(first: f64, last: f64, count: usize, half_width: f64) -> Vec<DetectorRing> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![DetectorRing { sdd: first, half_width }],
        _ => {
            let step = (last - first) / (count - 1) as f64;
            (0..count)
                .map(|i| DetectorRing { sdd: first + step * i as f64, half_width })
                .collect()
        }
    }
}

/// Everything needed to build a [`TissueModel`]; validated by [`TissueModel::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct TissueModelSpec {
    pub layers: Vec<LayerSpec>,
    /// Wavelengths in nm.
    pub wavelengths: Vec<f64>,
    /// Pencil-beam entry point on the top surface; the beam points straight down.
    pub source: (f64, f64),
    pub rings: Vec<DetectorRing>,
    /// Half-extent of the simulated volume in x and y.
    pub lateral_half_width: f64,
    /// Depth of the volume bottom below the top surface.
    pub volume_depth: f64,
    /// Photons whose total pathlength exceeds this are discarded.
    /// Defaults to 30 times the source-to-bottom distance.
    pub path_cutoff: Option<f64>,
}

/// Validated slab model: the simulation's world.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueModel {
    spec: TissueModelSpec,
    /// Depth of each layer's lower interface.
    bottoms: [f64; NUM_LAYERS],
}

impl TissueModel {
    pub fn new(spec: TissueModelSpec) -> Result<Self> {
        if spec.layers.len() != NUM_LAYERS {
            bail!(Config, "expected {} layers, got {}", NUM_LAYERS, spec.layers.len());
        }
        if spec.wavelengths.is_empty() {
            bail!(Config, "at least one wavelength is required");
        }
        for (i, w) in spec.wavelengths.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                bail!(Config, "wavelength {} must be positive", w);
            }
            if spec.wavelengths[..i].iter().any(|o| (o - w).abs() < 1e-9) {
                bail!(Config, "duplicate wavelength {}", w);
            }
        }
        if !(spec.volume_depth.is_finite() && spec.volume_depth > 0.0) {
            bail!(Config, "volume depth must be positive");
        }

        let mut bottoms = [0.0; NUM_LAYERS];
        let mut z = 0.0;
        for (i, (layer, kind)) in spec.layers.iter().zip(LayerKind::ORDER).enumerate() {
            if layer.kind != kind {
                bail!(Config, "layer {} must be {}, found {}", i, kind.name(), layer.kind.name());
            }
            if layer.optics.len() != spec.wavelengths.len() {
                bail!(
                    Config,
                    "layer {} has {} optical entries for {} wavelengths",
                    kind.name(),
                    layer.optics.len(),
                    spec.wavelengths.len()
                );
            }
            for o in &layer.optics {
                o.validate()?;
            }
            z = match layer.thickness {
                Some(t) if t.is_finite() && t > 0.0 => z + t,
                None if kind == LayerKind::FetalTissue => spec.volume_depth,
                None => bail!(Config, "only the fetal layer may be semi-infinite"),
                Some(t) => bail!(Config, "layer {} thickness {} must be positive", kind.name(), t),
            };
            if z > spec.volume_depth + 1e-12 || (kind == LayerKind::FetalTissue && z <= bottoms[2]) {
                bail!(Config, "layer {} ends at {} mm, outside the {} mm volume", kind.name(), z, spec.volume_depth);
            }
            bottoms[i] = z;
        }

        for (i, ring) in spec.rings.iter().enumerate() {
            if !(ring.half_width.is_finite() && ring.half_width > 0.0) || !(ring.inner() >= 0.0) {
                bail!(Config, "invalid detector ring {:?}", ring);
            }
            if i > 0 {
                let prev = spec.rings[i - 1];
                if ring.sdd <= prev.sdd {
                    bail!(Config, "detector SDDs must be strictly increasing");
                }
                if ring.inner() < prev.outer() {
                    bail!(Config, "detector rings at {} and {} mm overlap", prev.sdd, ring.sdd);
                }
            }
        }
        let reach = libm::hypot(spec.source.0, spec.source.1) + spec.rings.last().map_or(0.0, |r| r.outer());
        if !(spec.lateral_half_width.is_finite() && spec.lateral_half_width > 0.0) || reach > spec.lateral_half_width {
            bail!(Config, "detector rings must lie within the lateral half-width {}", spec.lateral_half_width);
        }
        if let Some(c) = spec.path_cutoff {
            if !(c.is_finite() && c > 0.0) {
                bail!(Config, "path cutoff must be positive");
            }
        }
        Ok(Self { spec, bottoms })
    }

    pub fn spec(&self) -> &TissueModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.spec.layers
    }

    pub fn layer(&self, kind: LayerKind) -> &LayerSpec {
        &self.spec.layers[kind.index()]
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.spec.wavelengths
    }

    pub fn rings(&self) -> &[DetectorRing] {
        &self.spec.rings
    }

    pub fn source(&self) -> (f64, f64) {
        self.spec.source
    }

    pub fn lateral_half_width(&self) -> f64 {
        self.spec.lateral_half_width
    }

    /// Depth of the lower interface of each layer.
    pub fn layer_bottoms(&self) -> [f64; NUM_LAYERS] {
        self.bottoms
    }

    /// Depth at which photons leave through the bottom of the tissue.
    pub fn tissue_bottom(&self) -> f64 {
        self.bottoms[NUM_LAYERS - 1]
    }

    /// Maternal abdominal wall thickness.
    pub fn d_m(&self) -> f64 {
        self.bottoms[0]
    }

    /// Depth of the top of the fetal layer.
    pub fn fetal_depth(&self) -> f64 {
        self.bottoms[2]
    }

    pub fn path_cutoff(&self) -> f64 {
        self.spec.path_cutoff.unwrap_or(30.0 * self.tissue_bottom())
    }

    /// Position of `wavelength` in the model's wavelength list.
    pub fn wavelength_index(&self, wavelength: f64) -> Result<usize> {
        self.spec
            .wavelengths
            .iter()
            .position(|w| (w - wavelength).abs() < 1e-6)
            .ok_or_else(|| Error::Config(alloc::format!("wavelength {} nm is not part of the model", wavelength)))
    }

    /// Optical properties of every layer at one wavelength.
    pub fn optics_at(&self, wavelength: f64) -> Result<[OpticalProps; NUM_LAYERS]> {
        let wi = self.wavelength_index(wavelength)?;
        Ok(core::array::from_fn(|l| self.spec.layers[l].optics[wi]))
    }

    /// Same model with a different maternal wall thickness; the layers below shift.
    pub fn with_maternal_thickness(&self, d_m: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.layers[0].thickness = Some(d_m);
        Self::new(spec)
    }

    /// Same model with the static absorption of every layer replaced at `wavelength`.
    pub fn with_absorption(&self, wavelength: f64, mu: &AbsorptionVector) -> Result<Self> {
        let wi = self.wavelength_index(wavelength)?;
        let mut spec = self.spec.clone();
        for (layer, m) in spec.layers.iter_mut().zip(mu.0) {
            layer.optics[wi].mu_a = m;
        }
        Self::new(spec)
    }

    /// Stable 64-bit digest of every parameter that influences transport.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        let s = &self.spec;
        h.write_u64(s.layers.len() as u64);
        for layer in &s.layers {
            h.write_u64(layer.kind as u64);
            h.write_f64(layer.thickness.unwrap_or(-1.0));
            for o in &layer.optics {
                for v in [o.mu_a, o.mu_s, o.g, o.n] {
                    h.write_f64(v);
                }
            }
        }
        for w in &s.wavelengths {
            h.write_f64(*w);
        }
        h.write_f64(s.source.0);
        h.write_f64(s.source.1);
        for r in &s.rings {
            h.write_f64(r.sdd);
            h.write_f64(r.half_width);
        }
        h.write_f64(s.lateral_half_width);
        h.write_f64(s.volume_depth);
        h.write_f64(self.path_cutoff());
        h.finish()
    }
}

/// 64-bit FNV-1a.
#[derive(Debug, Clone, Copy)]
pub struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    pub fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write(&v.to_le_bytes());
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Arterial hemodynamic state of mother and fetus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hemodynamics {
    /// Maternal hemoglobin concentration, g/L.
    pub hb_m: f64,
    /// Maternal arterial saturation, fraction.
    pub s_m: f64,
    /// Fetal hemoglobin concentration, g/L.
    pub hb_f: f64,
    /// Fetal arterial saturation, fraction.
    pub s_f: f64,
}

impl Hemodynamics {
    pub fn new(hb_m: f64, s_m: f64, hb_f: f64, s_f: f64) -> Result<Self> {
        let h = Self { hb_m, s_m, hb_f, s_f };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, hb) in [("hb_m", self.hb_m), ("hb_f", self.hb_f)] {
            if !(hb.is_finite() && hb >= 0.0) {
                bail!(Domain, "{} = {} must be a non-negative concentration", name, hb);
            }
        }
        for (name, s) in [("s_m", self.s_m), ("s_f", self.s_f)] {
            if !(0.0..=1.0).contains(&s) {
                bail!(Domain, "{} = {} must lie in [0, 1]", name, s);
            }
        }
        Ok(())
    }
}

/// Extinction coefficients of oxy- and deoxy-hemoglobin at one wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionEntry {
    pub wavelength: f64,
    /// mm⁻¹ per g/L of oxyhemoglobin.
    pub eps_hbo: f64,
    /// mm⁻¹ per g/L of deoxyhemoglobin.
    pub eps_hhb: f64,
}

/// Hemoglobin extinction table. Coefficients are stored so that
/// concentration (g/L) times coefficient is an absorption in mm⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionTable {
    entries: Vec<ExtinctionEntry>,
}

impl ExtinctionTable {
    pub fn new(entries: Vec<ExtinctionEntry>) -> Result<Self> {
        for (i, e) in entries.iter().enumerate() {
            if !(e.eps_hbo > 0.0 && e.eps_hhb > 0.0 && e.eps_hbo.is_finite() && e.eps_hhb.is_finite()) {
                bail!(Config, "extinction coefficients at {} nm must be positive", e.wavelength);
            }
            if entries[..i].iter().any(|o| (o.wavelength - e.wavelength).abs() < 1e-6) {
                bail!(Config, "duplicate extinction entry at {} nm", e.wavelength);
            }
        }
        Ok(Self { entries })
    }

    /// Build from decadic molar extinction coefficients (cm⁻¹/M), the form
    /// hemoglobin spectra are usually tabulated in.
    pub fn from_molar_decadic(rows: &[(f64, f64, f64)]) -> Result<Self> {
        let factor = core::f64::consts::LN_10 / HB_MOLAR_MASS / 10.0;
        Self::new(
            rows.iter()
                .map(|&(wavelength, hbo, hhb)| ExtinctionEntry { wavelength, eps_hbo: hbo * factor, eps_hhb: hhb * factor })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ExtinctionEntry] {
        &self.entries
    }

    pub fn lookup(&self, wavelength: f64) -> Result<ExtinctionEntry> {
        self.entries
            .iter()
            .copied()
            .find(|e| (e.wavelength - wavelength).abs() < 1e-6)
            .ok_or_else(|| Error::Config(alloc::format!("no extinction coefficients for {} nm", wavelength)))
    }

    pub fn covers(&self, wavelengths: &[f64]) -> Result<()> {
        wavelengths.iter().try_for_each(|w| self.lookup(*w).map(|_| ()))
    }
}

/// Blood-volume and pulsation assumptions of the pulsatile layers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BloodModel {
    pub arterial_fraction: f64,
    pub venous_fraction: f64,
    /// Venous saturation as a multiple of arterial saturation.
    pub venous_saturation_factor: f64,
    /// Relative fetal Hb drop from systole to diastole.
    pub pulsation: f64,
}

impl Default for BloodModel {
    fn default() -> Self {
        Self { arterial_fraction: 0.05, venous_fraction: 0.05, venous_saturation_factor: 0.75, pulsation: FETAL_PULSATION }
    }
}

impl BloodModel {
    pub fn validate(&self) -> Result<()> {
        let fracs = [self.arterial_fraction, self.venous_fraction];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) || self.arterial_fraction + self.venous_fraction > 1.0 {
            bail!(Config, "blood volume fractions must lie in [0, 1] and sum to at most 1");
        }
        if !(0.0..=1.0).contains(&self.venous_saturation_factor) {
            bail!(Config, "venous saturation factor must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.pulsation) {
            bail!(Config, "pulsation must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Per-layer absorption coefficients (mm⁻¹), top to bottom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionVector(pub [f64; NUM_LAYERS]);

impl AbsorptionVector {
    pub fn new(mu_a: [f64; NUM_LAYERS]) -> Result<Self> {
        let v = Self(mu_a);
        v.validate()?;
        Ok(v)
    }

    pub fn zero() -> Self {
        Self([0.0; NUM_LAYERS])
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            bail!(Domain, "absorption coefficients must be finite and non-negative: {:?}", self.0);
        }
        Ok(())
    }

    pub fn get(&self, kind: LayerKind) -> f64 {
        self.0[kind.index()]
    }
}

/// Absorption of whole blood: `hb * (sat * eps_HbO + (1 - sat) * eps_HHb)`.
pub fn blood_mu_a(hb: f64, sat: f64, ext: &ExtinctionTable, wavelength: f64) -> Result<f64> {
    if !(hb.is_finite() && hb >= 0.0) {
        bail!(Domain, "hemoglobin concentration {} must be non-negative", hb);
    }
    if !(0.0..=1.0).contains(&sat) {
        bail!(Domain, "saturation {} must lie in [0, 1]", sat);
    }
    let e = ext.lookup(wavelength)?;
    Ok(hb * (sat * e.eps_hbo + (1.0 - sat) * e.eps_hhb))
}

/// Non-blood background absorption of skin-like tissue, in mm⁻¹.
///
/// The power law `7.84e7 * λ^-3.255` yields cm⁻¹ for λ in nm.
pub fn baseline_mu_a(wavelength: f64) -> f64 {
    7.84e7 * libm::pow(wavelength, -3.255) * 0.1
}

/// Absorption of a pulsatile layer: arterial and venous blood fractions plus background.
pub fn pulsatile_tissue_mu_a(
    hemo: &Hemodynamics,
    layer: LayerKind,
    wavelength: f64,
    ext: &ExtinctionTable,
    blood: &BloodModel,
) -> Result<f64> {
    let (hb, sat) = match layer {
        LayerKind::MaternalWall => (hemo.hb_m, hemo.s_m),
        LayerKind::FetalTissue => (hemo.hb_f, hemo.s_f),
        other => bail!(Usage, "layer {} does not pulsate", other.name()),
    };
    let arterial = blood_mu_a(hb, sat, ext, wavelength)?;
    let venous = blood_mu_a(hb, blood.venous_saturation_factor * sat, ext, wavelength)?;
    Ok(blood.arterial_fraction * arterial + blood.venous_fraction * venous + baseline_mu_a(wavelength))
}

/// Absorption of every layer at one wavelength: blood model for the pulsatile
/// layers, the model's static values for the others.
pub fn absorption_vector(
    model: &TissueModel,
    hemo: &Hemodynamics,
    wavelength: f64,
    ext: &ExtinctionTable,
    blood: &BloodModel,
) -> Result<AbsorptionVector> {
    hemo.validate()?;
    let optics = model.optics_at(wavelength)?;
    let mut mu = [0.0; NUM_LAYERS];
    for kind in LayerKind::ORDER {
        mu[kind.index()] = if kind.is_pulsatile() {
            pulsatile_tissue_mu_a(hemo, kind, wavelength, ext, blood)?
        } else {
            optics[kind.index()].mu_a
        };
    }
    AbsorptionVector::new(mu)
}

/// Absorption at fetal systole (full Hb) and diastole (Hb reduced by the pulsation).
/// Only the fetal entry differs between the two.
pub fn systole_diastole_pair(
    model: &TissueModel,
    hemo: &Hemodynamics,
    wavelength: f64,
    ext: &ExtinctionTable,
    blood: &BloodModel,
) -> Result<(AbsorptionVector, AbsorptionVector)> {
    blood.validate()?;
    let systole = absorption_vector(model, hemo, wavelength, ext, blood)?;
    let relaxed = Hemodynamics { hb_f: hemo.hb_f * (1.0 - blood.pulsation), ..*hemo };
    let mut diastole = systole;
    let f = LayerKind::FetalTissue.index();
    diastole.0[f] = pulsatile_tissue_mu_a(&relaxed, LayerKind::FetalTissue, wavelength, ext, blood)?;
    Ok((systole, diastole))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::vec;

    pub fn layer(kind: LayerKind, thickness: Option<f64>, mu_a: f64, mu_s: f64, g: f64, n: f64) -> LayerSpec {
        LayerSpec { kind, thickness, optics: vec![OpticalProps { mu_a, mu_s, g, n }] }
    }

    /// Small single-wavelength model used across unit tests.
    pub fn small_model() -> TissueModel {
        TissueModel::new(TissueModelSpec {
            layers: vec![
                layer(LayerKind::MaternalWall, Some(2.0), 0.01, 5.0, 0.8, 1.4),
                layer(LayerKind::Uterus, Some(1.0), 0.01, 5.0, 0.8, 1.4),
                layer(LayerKind::AmnioticFluid, Some(1.0), 0.001, 0.5, 0.8, 1.33),
                layer(LayerKind::FetalTissue, None, 0.01, 5.0, 0.8, 1.4),
            ],
            wavelengths: vec![800.0],
            source: (0.0, 0.0),
            rings: evenly_spaced_rings(3.0, 15.0, 5, 1.0),
            lateral_half_width: 40.0,
            volume_depth: 30.0,
            path_cutoff: None,
        })
        .unwrap()
    }

    pub fn synthetic_ext() -> ExtinctionTable {
        ExtinctionTable::new(vec![ExtinctionEntry { wavelength: 800.0, eps_hbo: 2.0, eps_hhb: 4.0 }]).unwrap()
    }
}
