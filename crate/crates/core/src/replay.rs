//! Detector intensities for arbitrary absorption, recomputed from stored
//! partial pathlengths.
//!
//! A detected photon with partial pathlengths `L_j` contributes
//! `exp(-Σ_j μa_j L_j) / n_launched` to its ring. Every sum here runs in
//! photon-index order so results are bit-reproducible.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::features::{feature_vector, Features, NUM_SELECTED, NUM_WAVELENGTHS};
pub use crate::tissue::AbsorptionVector;
use crate::tissue::{
    systole_diastole_pair, BloodModel, DetectorRing, ExtinctionTable, Hemodynamics, TissueModel, NUM_LAYERS,
};
use crate::transport::{attenuation, PathlengthTable, PhotonRecord};

fn weight(mu: &AbsorptionVector, row: &PhotonRecord) -> f64 {
    attenuation(&mu.0, &row.pathlengths)
}

fn ring_of(row: &PhotonRecord) -> usize {
    row.detector.map(|d| d as usize).unwrap_or(usize::MAX)
}

/// Normalized intensity `I / I0` of every ring.
pub fn replay_intensity(table: &PathlengthTable, mu: &AbsorptionVector) -> Result<Vec<f64>> {
    mu.validate()?;
    let mut sums = alloc::vec![0.0; table.num_rings()];
    for row in table.rows() {
        sums[ring_of(row)] += weight(mu, row);
    }
    let n = table.meta().n_launched as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Intensity carried by fetal-sensitive photons (those with `L_f > 0`) only.
pub fn fetal_sensitive_intensity(table: &PathlengthTable, mu: &AbsorptionVector) -> Result<Vec<f64>> {
    Ok(intensity_profile(table, mu)?.fetal_sensitive)
}

/// Per-ring `Σ L_f w / (Σ L_f w + Σ L_m w)`; `None` for rings without photons.
pub fn fetal_sensitivity(table: &PathlengthTable, mu: &AbsorptionVector) -> Result<Vec<Option<f64>>> {
    Ok(intensity_profile(table, mu)?.sensitivity)
}

/// Everything the sensitivity analysis needs for one absorption vector.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub intensity: Vec<f64>,
    pub fetal_sensitive: Vec<f64>,
    pub sensitivity: Vec<Option<f64>>,
}

pub fn intensity_profile(table: &PathlengthTable, mu: &AbsorptionVector) -> Result<IntensityProfile> {
    mu.validate()?;
    let rings = table.num_rings();
    let mut total = alloc::vec![0.0; rings];
    let mut fetal_only = alloc::vec![0.0; rings];
    let mut lf = alloc::vec![0.0; rings];
    let mut lm = alloc::vec![0.0; rings];
    for row in table.rows() {
        let r = ring_of(row);
        let w = weight(mu, row);
        total[r] += w;
        if row.is_fetal_sensitive() {
            fetal_only[r] += w;
        }
        lf[r] += row.fetal() * w;
        lm[r] += row.maternal() * w;
    }
    let mut sensitivity = Vec::with_capacity(rings);
    for r in 0..rings {
        if table.ring_counts()[r] == 0 {
            sensitivity.push(None);
            continue;
        }
        let denom = lf[r] + lm[r];
        if denom <= 0.0 {
            // Every detected photon crosses the maternal wall twice, so this
            // only happens when all weights underflow or the table is corrupt.
            bail!(Invariant, "ring {} has no weighted maternal or fetal path", r);
        }
        sensitivity.push(Some(lf[r] / denom));
    }
    let n = table.meta().n_launched as f64;
    Ok(IntensityProfile {
        intensity: total.into_iter().map(|s| s / n).collect(),
        fetal_sensitive: fetal_only.into_iter().map(|s| s / n).collect(),
        sensitivity,
    })
}

/// Pathlengths of a subset of rings, grouped per ring for repeated replay.
///
/// Rows keep their photon order inside each ring, so [`RingView::intensity`]
/// matches [`replay_intensity`] bit for bit.
#[derive(Debug, Clone)]
pub struct RingView {
    rings: Vec<usize>,
    paths: Vec<Vec<[f64; NUM_LAYERS]>>,
    n_launched: f64,
}

impl RingView {
    pub fn new(table: &PathlengthTable, rings: &[usize]) -> Result<Self> {
        let mut paths = alloc::vec![Vec::new(); rings.len()];
        let mut slot = alloc::vec![usize::MAX; table.num_rings()];
        for (i, &r) in rings.iter().enumerate() {
            if r >= table.num_rings() {
                bail!(Usage, "ring {} out of range", r);
            }
            slot[r] = i;
            paths[i].reserve(table.ring_counts()[r] as usize);
        }
        for row in table.rows() {
            let s = slot[ring_of(row)];
            if s != usize::MAX {
                paths[s].push(row.pathlengths);
            }
        }
        Ok(Self { rings: rings.to_vec(), paths, n_launched: table.meta().n_launched as f64 })
    }

    pub fn rings(&self) -> &[usize] {
        &self.rings
    }

    /// Number of detected photons in each viewed ring.
    pub fn counts(&self) -> Vec<usize> {
        self.paths.iter().map(Vec::len).collect()
    }

    /// Intensity of each viewed ring, in view order.
    pub fn intensity(&self, mu: &AbsorptionVector) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| p.iter().map(|l| attenuation(&mu.0, l)).fold(0.0, |a, w| a + w) / self.n_launched)
            .collect()
    }
}

/// Index of the ring closest to each requested source-detector distance.
pub fn nearest_rings(rings: &[DetectorRing], sdds: &[f64]) -> Result<Vec<usize>> {
    if rings.is_empty() {
        bail!(Config, "model has no detector rings");
    }
    let picked: Vec<usize> = sdds
        .iter()
        .map(|&d| {
            let mut best = 0;
            for (i, r) in rings.iter().enumerate() {
                if (r.sdd - d).abs() < (rings[best].sdd - d).abs() {
                    best = i;
                }
            }
            best
        })
        .collect();
    if picked.windows(2).any(|w| w[0] >= w[1]) {
        bail!(Config, "selected distances {:?} must map to distinct, increasing rings", sdds);
    }
    Ok(picked)
}

/// Ground truth attached to every dataset row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Labels {
    pub d_m: f64,
    pub hemo: Hemodynamics,
}

/// One dataset sample: clean systole/diastole intensities and their features.
///
/// Per-detector arrays are laid out wavelength-major: index `w * 5 + r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub labels: Labels,
    /// Systole (trough) intensities.
    pub i1: [f64; NUM_WAVELENGTHS * NUM_SELECTED],
    /// Diastole (peak) intensities.
    pub i2: [f64; NUM_WAVELENGTHS * NUM_SELECTED],
    pub features: Features,
}

/// Hemodynamic sweep axes; points are enumerated row-major with `hb_m`
/// outermost and `s_f` innermost.
#[derive(Debug, Clone, PartialEq)]
pub struct HemoGrid {
    pub hb_m: Vec<f64>,
    pub s_m: Vec<f64>,
    pub hb_f: Vec<f64>,
    pub s_f: Vec<f64>,
}

impl HemoGrid {
    pub fn len(&self) -> usize {
        self.hb_m.len() * self.s_m.len() * self.hb_f.len() * self.s_f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th point in enumeration order.
    pub fn point(&self, i: usize) -> Hemodynamics {
        let n_sf = self.s_f.len();
        let n_hbf = self.hb_f.len();
        let n_sm = self.s_m.len();
        Hemodynamics {
            s_f: self.s_f[i % n_sf],
            hb_f: self.hb_f[(i / n_sf) % n_hbf],
            s_m: self.s_m[(i / (n_sf * n_hbf)) % n_sm],
            hb_m: self.hb_m[i / (n_sf * n_hbf * n_sm)],
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Hemodynamics> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            bail!(Config, "hemodynamic grid is empty");
        }
        self.points().try_for_each(|h| h.validate())
    }
}

/// Replay context for one geometry: the model, one table per wavelength, and
/// the detector selection.
#[derive(Debug, Clone)]
pub struct SweepContext {
    model: TissueModel,
    views: Vec<RingView>,
    ext: ExtinctionTable,
    blood: BloodModel,
}

impl SweepContext {
    /// `tables[w]` must have been simulated from `model` at `model.wavelengths()[w]`.
    pub fn new(
        model: TissueModel,
        tables: &[&PathlengthTable],
        rings: &[usize],
        ext: ExtinctionTable,
        blood: BloodModel,
    ) -> Result<Self> {
        if model.wavelengths().len() != NUM_WAVELENGTHS || tables.len() != NUM_WAVELENGTHS {
            bail!(Config, "a sweep needs exactly {} wavelengths and tables", NUM_WAVELENGTHS);
        }
        if rings.len() != NUM_SELECTED {
            bail!(Config, "a sweep needs exactly {} selected rings", NUM_SELECTED);
        }
        ext.covers(model.wavelengths())?;
        blood.validate()?;
        let hash = model.fingerprint();
        for (t, &wl) in tables.iter().zip(model.wavelengths()) {
            if t.meta().model_hash != hash || t.meta().wavelength != wl {
                bail!(Data, "table for {} nm does not belong to this model", wl);
            }
        }
        let views = tables.iter().map(|t| RingView::new(t, rings)).collect::<Result<Vec<_>>>()?;
        Ok(Self { model, views, ext, blood })
    }

    pub fn model(&self) -> &TissueModel {
        &self.model
    }

    /// Features for one grid point, or `None` when a selected ring has no
    /// usable intensity.
    pub fn point(&self, hemo: &Hemodynamics) -> Result<Option<FeatureRow>> {
        let mut i1 = [0.0; NUM_WAVELENGTHS * NUM_SELECTED];
        let mut i2 = [0.0; NUM_WAVELENGTHS * NUM_SELECTED];
        for (w, &wl) in self.model.wavelengths().iter().enumerate() {
            let (sys, dia) = systole_diastole_pair(&self.model, hemo, wl, &self.ext, &self.blood)?;
            let a = self.views[w].intensity(&sys);
            let b = self.views[w].intensity(&dia);
            i1[w * NUM_SELECTED..(w + 1) * NUM_SELECTED].copy_from_slice(&a);
            i2[w * NUM_SELECTED..(w + 1) * NUM_SELECTED].copy_from_slice(&b);
        }
        let features = match feature_vector(&i1, &i2) {
            Ok(f) => f,
            Err(_) => return Ok(None),
        };
        Ok(Some(FeatureRow { labels: Labels { d_m: self.model.d_m(), hemo: *hemo }, i1, i2, features }))
    }
}

/// Result of a sweep: valid rows in grid order and the number of skipped points.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<FeatureRow>,
    pub invalid: usize,
}

/// Evaluate every grid point sequentially.
pub fn sweep(ctx: &SweepContext, grid: &HemoGrid) -> Result<SweepOutput> {
    grid.validate()?;
    let mut rows = Vec::with_capacity(grid.len());
    let mut invalid = 0;
    for h in grid.points() {
        match ctx.point(&h)? {
            Some(r) => rows.push(r),
            None => invalid += 1,
        }
    }
    if invalid > 0 {
        log::warn!("{} of {} grid points had an empty or dark selected ring", invalid, grid.len());
    }
    Ok(SweepOutput { rows, invalid })
}
