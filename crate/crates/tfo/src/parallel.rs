//! Multi-threaded drivers. Work is split into fixed index ranges and the
//! results are merged in index order, so outputs do not depend on the number
//! of workers.

use std::ops::Range;

use rayon::prelude::*;
use tfo_core::noise::{apply_noise, dataset_gains, noisy_row, NoiseConfig, NoisyDataset};
use tfo_core::replay::{FeatureRow, HemoGrid, SweepContext, SweepOutput};
use tfo_core::tissue::TissueModel;
use tfo_core::transport::{PathlengthTable, TableBuilder, Transport, CHUNK};

use crate::error::{Error, Result};

/// Run `f` on a pool of `workers` threads (`None`: rayon's default pool).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("cannot start {} workers: {}", n, e)))?;
            Ok(pool.install(f))
        }
    }
}

fn chunks(n: u64) -> Vec<Range<u64>> {
    (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect()
}

/// Parallel equivalent of [`tfo_core::transport::simulate`]; bit-identical to it.
pub fn simulate(model: &TissueModel, wavelength: f64, n_photons: u64, seed: u64) -> Result<PathlengthTable> {
    if n_photons == 0 {
        return Err(tfo_core::Error::Config("at least one photon must be launched".into()).into());
    }
    let transport = Transport::new(model, wavelength)?;
    let ranges = chunks(n_photons);
    let detections: Vec<_> = ranges.par_iter().map(|r| transport.trace_range(seed, r.clone())).collect();
    let mut builder = TableBuilder::new(&transport, n_photons, seed);
    for (r, d) in ranges.into_iter().zip(detections) {
        builder.push(r, d)?;
    }
    Ok(builder.finish()?)
}

/// Parallel equivalent of [`tfo_core::replay::sweep`]; rows come out in grid order.
pub fn sweep(ctx: &SweepContext, grid: &HemoGrid) -> Result<SweepOutput> {
    grid.validate()?;
    let points: Vec<Option<FeatureRow>> =
        (0..grid.len()).into_par_iter().map(|i| ctx.point(&grid.point(i))).collect::<tfo_core::Result<_>>()?;
    let invalid = points.iter().filter(|p| p.is_none()).count();
    if invalid > 0 {
        log::warn!("{} of {} grid points had an empty or dark selected ring", invalid, grid.len());
    }
    Ok(SweepOutput { rows: points.into_iter().flatten().collect(), invalid })
}

/// Parallel equivalent of [`tfo_core::noise::apply_noise`].
pub fn noise(rows: &[FeatureRow], cfg: &NoiseConfig) -> Result<NoisyDataset> {
    cfg.validate()?;
    if rows.len() < 1024 {
        return Ok(apply_noise(rows, cfg)?);
    }
    let gains = dataset_gains(rows, cfg)?;
    let noisy: Vec<Option<FeatureRow>> =
        rows.par_iter().enumerate().map(|(i, r)| noisy_row(r, i as u64, &gains, cfg)).collect();
    let excluded = noisy.iter().filter(|r| r.is_none()).count();
    if excluded > 0 {
        log::warn!("{} noisy rows had non-positive intensities and were excluded", excluded);
    }
    Ok(NoisyDataset { rows: noisy.into_iter().flatten().collect(), excluded, gains })
}
