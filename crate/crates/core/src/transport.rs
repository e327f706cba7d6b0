//! Scattering-only Monte Carlo photon transport through the layered slab.
//!
//! Free paths are drawn from the scattering coefficient alone. Absorption never
//! terminates a photon; it is applied afterwards as `exp(-Σ μa_j L_j)` from the
//! recorded partial pathlengths, which is what makes [`crate::replay`] possible.
//!
//! Coordinates: the tissue occupies `z >= 0`, with `z` increasing downward.
//! The source is a pencil beam entering at `(x0, y0, 0)` pointing along `+z`.

use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{bail, Error, Result};
use crate::rng::RngStream;
use crate::stats::{quantile_sorted, Quartiles};
use crate::tissue::{AbsorptionVector, DetectorRing, LayerKind, TissueModel, NUM_LAYERS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn normalized(self) -> Self {
        let k = 1.0 / self.norm();
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Exponential free path for scattering coefficient `mu_s` and uniform `u` in (0, 1).
/// A non-scattering medium gives an infinite step.
#[inline]
pub fn sample_free_path(mu_s: f64, u: f64) -> f64 {
    if mu_s <= 0.0 {
        f64::INFINITY
    } else {
        -libm::log(u) / mu_s
    }
}

/// Deflection cosine drawn from the Henyey-Greenstein phase function.
#[inline]
pub fn sample_hg_cos(g: f64, u: f64) -> f64 {
    if g.abs() < 1e-6 {
        return 2.0 * u - 1.0;
    }
    let t = (1.0 - g * g) / (1.0 - g + 2.0 * g * u);
    ((1.0 + g * g - t * t) / (2.0 * g)).clamp(-1.0, 1.0)
}

/// New propagation direction after a Henyey-Greenstein scattering event.
/// `u1` picks the deflection angle, `u2` the azimuth.
#[inline]
pub fn sample_scatter_direction(g: f64, u1: f64, u2: f64, incoming: Vec3) -> Vec3 {
    let (sin_p, cos_p) = libm::sincos(core::f64::consts::TAU * u2);
    rotate(incoming, sample_hg_cos(g, u1), cos_p, sin_p)
}

/// Uniform azimuth as `(cos φ, sin φ)`, drawn by rejection from the unit disk.
#[inline]
pub fn sample_azimuth(rng: &mut RngStream) -> (f64, f64) {
    loop {
        let a = 2.0 * rng.uniform() - 1.0;
        let b = 2.0 * rng.uniform() - 1.0;
        let r2 = a * a + b * b;
        if r2 <= 1.0 && r2 > 1e-12 {
            let k = 1.0 / r2;
            return ((a * a - b * b) * k, 2.0 * a * b * k);
        }
    }
}

/// Deflect `dir` by polar cosine `cos_t` and azimuth `(cos_p, sin_p)`.
#[inline]
pub fn rotate(dir: Vec3, cos_t: f64, cos_p: f64, sin_p: f64) -> Vec3 {
    deflect(dir, cos_t, cos_p, sin_p).normalized()
}

/// [`rotate`] without the final renormalization. The rotation preserves the
/// norm up to rounding, so the transport loop only renormalizes on refraction.
#[inline(always)]
fn deflect(dir: Vec3, cos_t: f64, cos_p: f64, sin_p: f64) -> Vec3 {
    let sin_t = libm::sqrt((1.0 - cos_t * cos_t).max(0.0));
    let Vec3 { x: ux, y: uy, z: uz } = dir;
    if uz.abs() > 0.999_999 {
        Vec3::new(sin_t * cos_p, sin_t * sin_p, cos_t * uz.signum())
    } else {
        let tmp = libm::sqrt(1.0 - uz * uz);
        let k = sin_t / tmp;
        Vec3::new(
            k * (ux * uz * cos_p - uy * sin_p) + ux * cos_t,
            k * (uy * uz * cos_p + ux * sin_p) + uy * cos_t,
            -sin_t * cos_p * tmp + uz * cos_t,
        )
    }
}

/// Unpolarized Fresnel reflectance for a ray hitting an interface from index
/// `n_i` into `n_t` with incidence cosine `cos_i` (non-negative).
/// Returns the reflectance and the cosine of the transmitted ray.
#[inline]
pub fn fresnel(n_i: f64, n_t: f64, cos_i: f64) -> (f64, f64) {
    if n_i == n_t {
        return (0.0, cos_i);
    }
    if cos_i > 1.0 - 1e-12 {
        let r = (n_t - n_i) / (n_t + n_i);
        return (r * r, cos_i);
    }
    if cos_i < 1e-9 {
        return (1.0, 0.0);
    }
    let sin_i = libm::sqrt(1.0 - cos_i * cos_i);
    let sin_t = n_i * sin_i / n_t;
    if sin_t >= 1.0 {
        return (1.0, 0.0);
    }
    let cos_t = libm::sqrt(1.0 - sin_t * sin_t);
    let cap = cos_i * cos_t - sin_i * sin_t;
    let cam = cos_i * cos_t + sin_i * sin_t;
    let sap = sin_i * cos_t + cos_i * sin_t;
    let sam = sin_i * cos_t - cos_i * sin_t;
    let r = 0.5 * sam * sam * (cam * cam + cap * cap) / (sap * sap * cam * cam);
    (r.min(1.0), cos_t)
}

/// `exp(-Σ_j μa_j L_j)`, evaluated layer by layer from the top.
#[inline]
pub fn attenuation(mu: &[f64; NUM_LAYERS], lengths: &[f64; NUM_LAYERS]) -> f64 {
    let mut s = 0.0;
    for j in 0..NUM_LAYERS {
        s += mu[j] * lengths[j];
    }
    libm::exp(-s)
}

/// One detected photon history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonRecord {
    pub photon_index: u64,
    /// Ring index, or `None` for photons that were not detected.
    pub detector: Option<u32>,
    /// Geometric pathlength in each layer, mm.
    pub pathlengths: [f64; NUM_LAYERS],
}

impl PhotonRecord {
    pub fn total(&self) -> f64 {
        self.pathlengths.iter().sum()
    }

    pub fn fetal(&self) -> f64 {
        self.pathlengths[LayerKind::FetalTissue.index()]
    }

    pub fn maternal(&self) -> f64 {
        self.pathlengths[LayerKind::MaternalWall.index()]
    }

    /// The photon visited the fetal layer.
    pub fn is_fetal_sensitive(&self) -> bool {
        self.fetal() > 0.0
    }
}

/// A detected photon together with its weight under the generating absorption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub record: PhotonRecord,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct SlabLayer {
    top: f64,
    bottom: f64,
    mu_s: f64,
    /// Mean free path; infinite for a non-scattering layer.
    mfp: f64,
    g: f64,
    n: f64,
}

/// Per-wavelength transport setup derived from a [`TissueModel`].
#[derive(Debug, Clone)]
pub struct Transport {
    layers: [SlabLayer; NUM_LAYERS],
    rings: Vec<DetectorRing>,
    source: (f64, f64),
    lateral: f64,
    cutoff: f64,
    generating_mu_a: [f64; NUM_LAYERS],
    model_hash: u64,
    wavelength: f64,
}

/// Refractive index outside the tissue.
const N_AIR: f64 = 1.0;

impl Transport {
    pub fn new(model: &TissueModel, wavelength: f64) -> Result<Self> {
        let optics = model.optics_at(wavelength)?;
        let bottoms = model.layer_bottoms();
        let layers = core::array::from_fn(|l| SlabLayer {
            top: if l == 0 { 0.0 } else { bottoms[l - 1] },
            bottom: bottoms[l],
            mu_s: optics[l].mu_s,
            mfp: if optics[l].mu_s > 0.0 { 1.0 / optics[l].mu_s } else { f64::INFINITY },
            g: optics[l].g,
            n: optics[l].n,
        });
        Ok(Self {
            layers,
            rings: model.rings().to_vec(),
            source: model.source(),
            lateral: model.lateral_half_width(),
            cutoff: model.path_cutoff(),
            generating_mu_a: core::array::from_fn(|l| optics[l].mu_a),
            model_hash: model.fingerprint(),
            wavelength,
        })
    }

    pub fn num_rings(&self) -> usize {
        self.rings.len()
    }

    /// Absorption applied by the in-simulation tally.
    pub fn generating_mu_a(&self) -> AbsorptionVector {
        AbsorptionVector(self.generating_mu_a)
    }

    /// Ring whose annulus contains `radius`.
    pub fn ring_at(&self, radius: f64) -> Option<usize> {
        let i = self.rings.partition_point(|r| r.outer() < radius);
        (i < self.rings.len() && self.rings[i].contains(radius)).then_some(i)
    }

    /// Follow one photon from launch to termination.
    pub fn trace(&self, seed: u64, photon_index: u64) -> Option<Detection> {
        let mut rng = RngStream::photon(seed, photon_index);
        let mut pos = Vec3::new(self.source.0, self.source.1, 0.0);
        let mut dir = Vec3::new(0.0, 0.0, 1.0);
        let mut layer = 0usize;
        let mut lengths = [0.0; NUM_LAYERS];
        let mut total = 0.0;
        // Remaining optical depth (in scattering mean free paths) until the next event.
        let mut tau = -libm::log(rng.uniform());

        loop {
            let slab = &self.layers[layer];
            // Vertical gap to the interface ahead; avoids a division on scattering steps.
            let gap = if dir.z > 0.0 {
                slab.bottom - pos.z
            } else if dir.z < 0.0 {
                pos.z - slab.top
            } else {
                f64::INFINITY
            };
            let to_event = tau * slab.mfp;
            let scatters = to_event * dir.z.abs() <= gap;
            let step = if scatters { to_event } else { gap / dir.z.abs() };
            if !step.is_finite() || total + step > self.cutoff {
                return None;
            }

            pos.x += dir.x * step;
            pos.y += dir.y * step;
            lengths[layer] += step;
            total += step;
            if pos.x.abs() > self.lateral || pos.y.abs() > self.lateral {
                return None;
            }

            if scatters {
                pos.z += dir.z * step;
                let cos_t = sample_hg_cos(slab.g, rng.uniform());
                let (cos_p, sin_p) = sample_azimuth(&mut rng);
                dir = deflect(dir, cos_t, cos_p, sin_p);
                tau = -libm::log(rng.uniform());
                continue;
            }

            tau -= slab.mu_s * step;
            let upward = dir.z < 0.0;
            pos.z = if upward { slab.top } else { slab.bottom };

            if !upward && layer == NUM_LAYERS - 1 {
                // Out through the bottom of the volume.
                return None;
            }
            let (next, n_t) = if upward {
                if layer == 0 {
                    (None, N_AIR)
                } else {
                    (Some(layer - 1), self.layers[layer - 1].n)
                }
            } else {
                (Some(layer + 1), self.layers[layer + 1].n)
            };

            let (reflectance, cos_t) = fresnel(slab.n, n_t, dir.z.abs());
            if reflectance > 0.0 && rng.uniform() <= reflectance {
                dir.z = -dir.z;
                continue;
            }
            if slab.n != n_t {
                let ratio = slab.n / n_t;
                dir = Vec3::new(dir.x * ratio, dir.y * ratio, cos_t.copysign(dir.z)).normalized();
            }
            match next {
                Some(l) => layer = l,
                None => {
                    let radius = libm::hypot(pos.x - self.source.0, pos.y - self.source.1);
                    let ring = self.ring_at(radius)?;
                    return Some(Detection {
                        record: PhotonRecord { photon_index, detector: Some(ring as u32), pathlengths: lengths },
                        weight: attenuation(&self.generating_mu_a, &lengths),
                    });
                }
            }
        }
    }

    /// Trace every photon index in `range`, keeping detections in index order.
    pub fn trace_range(&self, seed: u64, range: Range<u64>) -> Vec<Detection> {
        range.filter_map(|i| self.trace(seed, i)).collect()
    }
}

/// Provenance of a [`PathlengthTable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableMeta {
    pub model_hash: u64,
    pub wavelength: f64,
    pub n_launched: u64,
    pub seed: u64,
}

/// Per-photon partial pathlengths of every detected photon: the replay substrate.
#[derive(Debug, Clone, PartialEq)]
pub struct PathlengthTable {
    meta: TableMeta,
    rows: Vec<PhotonRecord>,
    ring_counts: Vec<u64>,
    /// Ring intensities tallied while tracing, under the model's own absorption.
    sim_tally: Vec<f64>,
}

impl PathlengthTable {
    /// Assemble a table from stored parts, checking its invariants.
    pub fn from_parts(meta: TableMeta, num_rings: usize, rows: Vec<PhotonRecord>, sim_tally: Vec<f64>) -> Result<Self> {
        if sim_tally.len() != num_rings {
            bail!(Data, "tally has {} rings, expected {}", sim_tally.len(), num_rings);
        }
        if rows.len() as u64 > meta.n_launched {
            bail!(Data, "{} detected photons out of {} launched", rows.len(), meta.n_launched);
        }
        let mut ring_counts = alloc::vec![0u64; num_rings];
        let mut prev: Option<u64> = None;
        for r in &rows {
            if prev.is_some_and(|p| p >= r.photon_index) || r.photon_index >= meta.n_launched {
                bail!(Data, "rows must be strictly sorted photon indices below n_launched");
            }
            prev = Some(r.photon_index);
            let ring = match r.detector {
                Some(d) if (d as usize) < num_rings => d as usize,
                _ => bail!(Data, "photon {} has invalid detector {:?}", r.photon_index, r.detector),
            };
            if r.pathlengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || r.total() <= 0.0 {
                bail!(Data, "photon {} has invalid pathlengths", r.photon_index);
            }
            ring_counts[ring] += 1;
        }
        Ok(Self { meta, rows, ring_counts, sim_tally })
    }

    pub fn meta(&self) -> &TableMeta {
        &self.meta
    }

    pub fn rows(&self) -> &[PhotonRecord] {
        &self.rows
    }

    pub fn num_rings(&self) -> usize {
        self.ring_counts.len()
    }

    pub fn ring_counts(&self) -> &[u64] {
        &self.ring_counts
    }

    pub fn sim_tally(&self) -> &[f64] {
        &self.sim_tally
    }

    /// Rows detected by one ring, in photon order.
    pub fn ring_rows(&self, ring: usize) -> impl Iterator<Item = &PhotonRecord> + '_ {
        self.rows.iter().filter(move |r| r.detector == Some(ring as u32))
    }
}

/// Accumulates chunks of detections, in photon-index order, into a table.
///
/// Chunks may be produced in any order or on any thread; as long as they are
/// pushed in index order the result is identical to a sequential run.
#[derive(Debug)]
pub struct TableBuilder {
    meta: TableMeta,
    rows: Vec<PhotonRecord>,
    sums: Vec<f64>,
    next_index: u64,
}

impl TableBuilder {
    pub fn new(transport: &Transport, n_launched: u64, seed: u64) -> Self {
        Self {
            meta: TableMeta { model_hash: transport.model_hash, wavelength: transport.wavelength, n_launched, seed },
            rows: Vec::new(),
            sums: alloc::vec![0.0; transport.num_rings()],
            next_index: 0,
        }
    }

    pub fn push(&mut self, range: Range<u64>, detections: Vec<Detection>) -> Result<()> {
        if range.start != self.next_index || range.end > self.meta.n_launched {
            return Err(Error::Invariant(alloc::format!(
                "chunk {:?} pushed out of order (expected start {})",
                range,
                self.next_index
            )));
        }
        for d in detections {
            let ring = d.record.detector.map(|r| r as usize).filter(|&r| r < self.sums.len());
            let ring = ring.ok_or_else(|| Error::Invariant("detection without a valid ring".into()))?;
            self.sums[ring] += d.weight;
            self.rows.push(d.record);
        }
        self.next_index = range.end;
        Ok(())
    }

    pub fn finish(self) -> Result<PathlengthTable> {
        if self.next_index != self.meta.n_launched {
            bail!(Invariant, "only {} of {} photons were traced", self.next_index, self.meta.n_launched);
        }
        let n = self.meta.n_launched as f64;
        let tally = self.sums.iter().map(|s| s / n).collect();
        PathlengthTable::from_parts(self.meta, self.sums.len(), self.rows, tally)
    }
}

/// Photon-index chunk size used by chunked drivers.
pub const CHUNK: u64 = 1 << 14;

/// Run the full simulation on the calling thread.
pub fn simulate(model: &TissueModel, wavelength: f64, n_photons: u64, seed: u64) -> Result<PathlengthTable> {
    if n_photons == 0 {
        bail!(Config, "at least one photon must be launched");
    }
    let transport = Transport::new(model, wavelength)?;
    let mut builder = TableBuilder::new(&transport, n_photons, seed);
    let mut start = 0;
    while start < n_photons {
        let end = (start + CHUNK).min(n_photons);
        builder.push(start..end, transport.trace_range(seed, start..end))?;
        start = end;
    }
    builder.finish()
}

/// Distribution summaries for the detected photons of one ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathlengthStats {
    pub count: usize,
    pub total: Quartiles,
    pub fetal: Quartiles,
}

/// Quartile boundaries and means of total and fetal pathlength for one ring.
pub fn pathlength_stats(table: &PathlengthTable, ring: usize) -> Result<PathlengthStats> {
    if ring >= table.num_rings() {
        bail!(Usage, "ring {} out of range", ring);
    }
    let mut total: Vec<f64> = table.ring_rows(ring).map(PhotonRecord::total).collect();
    let mut fetal: Vec<f64> = table.ring_rows(ring).map(PhotonRecord::fetal).collect();
    if total.is_empty() {
        return Err(Error::EmptyRing(ring));
    }
    Ok(PathlengthStats { count: total.len(), total: Quartiles::of(&mut total), fetal: Quartiles::of(&mut fetal) })
}

/// Median of the values, for callers that only need a centre.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(quantile_sorted(values, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tissue::fixtures::small_model;
    use crate::tissue::{evenly_spaced_rings, OpticalProps};
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn free_path_closed_forms() {
        assert_relative_eq!(sample_free_path(10.0, (-1.0f64).exp()), 0.1, max_relative = 1e-15);
        assert!(sample_free_path(10.0, 1.0 - 1e-12) < 1e-12);
        assert_eq!(sample_free_path(0.0, 0.5), f64::INFINITY);
    }

    #[test]
    fn free_path_mean() {
        let mut rng = RngStream::photon(1, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_free_path(4.0, rng.uniform())).sum::<f64>() / n as f64;
        assert_relative_eq!(mean, 0.25, max_relative = 0.01);
    }

    #[test]
    fn hg_isotropic_is_linear() {
        for u in [0.01, 0.3, 0.5, 0.77, 0.99] {
            assert_relative_eq!(sample_hg_cos(0.0, u), 2.0 * u - 1.0);
        }
    }

    #[test]
    fn hg_mean_cosine_equals_g() {
        let mut rng = RngStream::photon(2, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_hg_cos(0.9, rng.uniform())).sum::<f64>() / n as f64;
        assert!((mean - 0.9).abs() < 0.003, "mean cosine {}", mean);
    }

    #[test]
    fn scatter_direction_is_unit_and_has_right_deflection() {
        let mut rng = RngStream::photon(3, 0);
        let mut dir = Vec3::new(0.0, 0.0, 1.0);
        for _ in 0..10_000 {
            let (u1, u2) = (rng.uniform(), rng.uniform());
            let next = sample_scatter_direction(0.7, u1, u2, dir);
            assert!((next.norm() - 1.0).abs() < 1e-12);
            let cos = dir.x * next.x + dir.y * next.y + dir.z * next.z;
            assert!((cos - sample_hg_cos(0.7, u1)).abs() < 1e-9);
            dir = next;
        }
    }

    #[test]
    fn fresnel_limits() {
        let (r, c) = fresnel(1.4, 1.0, 1.0);
        assert_relative_eq!(r, (0.4f64 / 2.4).powi(2));
        assert_eq!(c, 1.0);
        // Beyond the critical angle of 1.4 -> 1.0 (about 45.6 degrees).
        assert_eq!(fresnel(1.4, 1.0, 0.5).0, 1.0);
        let (r, _) = fresnel(1.0, 1.4, 0.5);
        assert!(r > 0.0 && r < 1.0);
        assert_eq!(fresnel(1.3, 1.3, 0.2), (0.0, 0.2));
    }

    #[test]
    fn no_scattering_means_no_detection() {
        let mut spec = small_model().spec().clone();
        for l in &mut spec.layers {
            l.optics = vec![OpticalProps { mu_s: 0.0, ..l.optics[0] }];
        }
        let model = TissueModel::new(spec).unwrap();
        let table = simulate(&model, 800.0, 2_000, 5).unwrap();
        assert!(table.rows().is_empty());
        assert!(table.ring_counts().iter().all(|&c| c == 0));
    }

    #[test]
    fn detected_photons_cross_the_top_layer() {
        let table = simulate(&small_model(), 800.0, 20_000, 9).unwrap();
        assert!(!table.rows().is_empty());
        for r in table.rows() {
            assert!(r.maternal() > 0.0);
            assert!(r.pathlengths.iter().all(|l| *l >= 0.0));
        }
        let total: u64 = table.ring_counts().iter().sum();
        assert_eq!(total as usize, table.rows().len());
    }

    #[test]
    fn simulate_is_deterministic_and_chunking_invariant() {
        let model = small_model();
        let a = simulate(&model, 800.0, 5_000, 11).unwrap();
        let b = simulate(&model, 800.0, 5_000, 11).unwrap();
        assert_eq!(a, b);

        let t = Transport::new(&model, 800.0).unwrap();
        let mut builder = TableBuilder::new(&t, 5_000, 11);
        for (s, e) in [(0, 7), (7, 1_000), (1_000, 5_000)] {
            builder.push(s..e, t.trace_range(11, s..e)).unwrap();
        }
        assert_eq!(builder.finish().unwrap(), a);
    }

    #[test]
    fn builder_rejects_out_of_order_chunks() {
        let t = Transport::new(&small_model(), 800.0).unwrap();
        let mut b = TableBuilder::new(&t, 100, 0);
        assert!(b.push(10..20, Vec::new()).is_err());
        b.push(0..50, Vec::new()).unwrap();
        assert!(b.finish().is_err());
    }

    #[test]
    fn ring_lookup() {
        let mut spec = small_model().spec().clone();
        spec.rings = evenly_spaced_rings(5.0, 15.0, 3, 1.0);
        let t = Transport::new(&TissueModel::new(spec).unwrap(), 800.0).unwrap();
        assert_eq!(t.ring_at(4.0), Some(0));
        assert_eq!(t.ring_at(6.0), Some(0));
        assert_eq!(t.ring_at(7.5), None);
        assert_eq!(t.ring_at(10.3), Some(1));
        assert_eq!(t.ring_at(16.0), Some(2));
        assert_eq!(t.ring_at(16.1), None);
        assert_eq!(t.ring_at(0.5), None);
    }

    fn table_of(rows: &[[f64; 4]]) -> PathlengthTable {
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, l)| PhotonRecord { photon_index: i as u64, detector: Some(0), pathlengths: *l })
            .collect::<Vec<_>>();
        let meta = TableMeta { model_hash: 0, wavelength: 800.0, n_launched: rows.len() as u64, seed: 0 };
        PathlengthTable::from_parts(meta, 2, rows, vec![0.0; 2]).unwrap()
    }

    #[test]
    fn stats_identical_rows() {
        let t = table_of(&[[1.0, 0.5, 0.5, 2.0]; 7]);
        let s = pathlength_stats(&t, 0).unwrap();
        for q in [s.total.min, s.total.q1, s.total.median, s.total.q3, s.total.max, s.total.mean] {
            assert_eq!(q, 4.0);
        }
        assert_eq!(s.fetal.median, 2.0);
        assert_eq!(pathlength_stats(&t, 1), Err(Error::EmptyRing(1)));
    }

    #[test]
    fn stats_of_one_to_four() {
        let t = table_of(&[[1.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0], [4.0, 0.0, 0.0, 0.0]]);
        let s = pathlength_stats(&t, 0).unwrap();
        assert_eq!(s.total.median, 2.5);
        assert_eq!(s.total.mean, 2.5);
        assert_eq!(s.total.min, 1.0);
        assert_eq!(s.total.max, 4.0);
    }

    #[test]
    fn from_parts_checks_invariants() {
        let meta = TableMeta { model_hash: 0, wavelength: 800.0, n_launched: 2, seed: 0 };
        let row = |i, d| PhotonRecord { photon_index: i, detector: d, pathlengths: [1.0, 0.0, 0.0, 0.0] };
        assert!(PathlengthTable::from_parts(meta, 1, vec![row(1, Some(0)), row(0, Some(0))], vec![0.0]).is_err());
        assert!(PathlengthTable::from_parts(meta, 1, vec![row(0, None)], vec![0.0]).is_err());
        assert!(PathlengthTable::from_parts(meta, 1, vec![row(0, Some(3))], vec![0.0]).is_err());
        assert!(PathlengthTable::from_parts(meta, 1, vec![row(5, Some(0))], vec![0.0]).is_err());
        assert!(PathlengthTable::from_parts(meta, 1, vec![row(0, Some(0))], vec![0.0]).is_ok());
    }
}
