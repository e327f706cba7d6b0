//! Training and evaluating estimators on feature datasets.

use rayon::prelude::*;
use tfo_core::features::{smooth_features, NUM_SELECTED};
use tfo_core::mlp::{grouped_split, temporal_cv, History, Regressor, Samples};
use tfo_core::replay::FeatureRow;

use crate::config::{FeatureKind, Training};
use crate::error::{bail, Result};
use crate::metrics::{evaluate_with_p, Evaluation};

/// Labels are fetal saturation in percent.
pub fn label(row: &FeatureRow) -> f64 {
    row.labels.hemo.s_f * 100.0
}

/// Input vector of one row, or `None` when the requested features are not
/// all finite (RoR is undefined for some rows).
pub fn features_of(row: &FeatureRow, kind: FeatureKind, smooth: Option<&[f64; NUM_SELECTED]>) -> Option<Vec<f64>> {
    let f = match smooth {
        Some(sdd) => smooth_features(&row.features, sdd),
        None => row.features,
    };
    let v = match kind {
        FeatureKind::Epr => f.epr.to_vec(),
        FeatureKind::Ror => f.ror.to_vec(),
    };
    v.iter().all(|x| x.is_finite()).then_some(v)
}

/// Usable rows of a dataset as training samples.
#[derive(Debug, Clone)]
pub struct Design {
    pub samples: Samples,
    /// Dataset index of each sample.
    pub source: Vec<usize>,
    /// Geometry key (bits of `d_m`) of each sample.
    pub groups: Vec<u64>,
    /// Rows left out for undefined features.
    pub dropped: usize,
}

pub fn design(rows: &[FeatureRow], kind: FeatureKind, smooth: Option<&[f64; NUM_SELECTED]>) -> Result<Design> {
    let (mut x, mut y, mut source, mut groups) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, row) in rows.iter().enumerate() {
        if let Some(f) = features_of(row, kind, smooth) {
            x.extend(f);
            y.push(label(row));
            source.push(i);
            groups.push(row.labels.d_m.to_bits());
        }
    }
    let dropped = rows.len() - source.len();
    if dropped > 0 {
        log::warn!("{} of {} rows have undefined {} features and were left out", dropped, rows.len(), kind.name());
    }
    if source.len() < 4 {
        bail!(Data, "only {} usable rows for {} features", source.len(), kind.name());
    }
    Ok(Design { samples: Samples::new(kind.dim(), x, y)?, source, groups, dropped })
}

/// One trained model and its validation performance.
#[derive(Debug, Clone)]
pub struct Trial {
    pub kind: FeatureKind,
    pub seed: u64,
    pub model: Regressor,
    pub history: History,
    pub evaluation: Evaluation,
    pub n_train: usize,
    /// Dataset index, label, and prediction of every validation sample.
    pub predictions: Vec<(usize, f64, f64)>,
}

/// Train on a per-geometry random split seeded by `seed`, validate on the rest.
pub fn random_split_trial(d: &Design, kind: FeatureKind, training: &Training, seed: u64) -> Result<Trial> {
    let (tr, va) = grouped_split(&d.groups, training.train_fraction, seed)?;
    fit_and_score(d, kind, training, seed, &d.samples.select(&tr), &va)
}

fn fit_and_score(
    d: &Design,
    kind: FeatureKind,
    training: &Training,
    seed: u64,
    train: &Samples,
    va: &[usize],
) -> Result<Trial> {
    if va.len() < 2 {
        bail!(Data, "validation split has {} samples", va.len());
    }
    let val = d.samples.select(va);
    let cfg = training.mlp(kind.dim(), seed);
    let (model, history) = Regressor::fit(&cfg, train, &val)?;
    let pred = model.predict(&val.x)?;
    let evaluation = evaluate_with_p(&pred, &val.y)?;
    let predictions = va.iter().zip(&val.y).zip(&pred).map(|((&i, &y), &p)| (d.source[i], y, p)).collect();
    Ok(Trial { kind, seed, model, history, evaluation, n_train: train.len(), predictions })
}

/// One trial per configured seed, run in parallel; results in seed order.
pub fn random_split_trials(rows: &[FeatureRow], kind: FeatureKind, training: &Training, sdd: &[f64; NUM_SELECTED]) -> Result<Vec<Trial>> {
    let d = design(rows, kind, training.smooth.then_some(sdd))?;
    training.seeds.par_iter().map(|&s| random_split_trial(&d, kind, training, s)).collect()
}

/// Temporal cross-validation: one trial per fold, with per-round training weights.
pub fn temporal_trials(
    rows: &[FeatureRow],
    rounds: &[u64],
    times: &[f64],
    kind: FeatureKind,
    training: &Training,
    folds: usize,
    sdd: &[f64; NUM_SELECTED],
) -> Result<Vec<Trial>> {
    if rounds.len() != rows.len() || times.len() != rows.len() {
        bail!(Data, "round and time columns do not match the dataset");
    }
    let d = design(rows, kind, training.smooth.then_some(sdd))?;
    let r: Vec<u64> = d.source.iter().map(|&i| rounds[i]).collect();
    let t: Vec<f64> = d.source.iter().map(|&i| times[i]).collect();
    let cv = temporal_cv(&r, &t, folds)?;
    let seed = training.seeds[0];
    cv.folds
        .par_iter()
        .map(|fold| {
            let base = d.samples.select(&fold.train);
            let train = Samples::weighted(base.dim, base.x, base.y, fold.train_weights.clone())?;
            fit_and_score(&d, kind, training, seed, &train, &fold.val)
        })
        .collect()
}

/// Mean of each metric over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub trials: usize,
    pub mae: f64,
    pub err_std: f64,
    pub r: f64,
    /// Largest p-value over the trials.
    pub p_value: f64,
}

pub fn summarize(trials: &[Trial]) -> Summary {
    let n = trials.len() as f64;
    let avg = |f: &dyn Fn(&Trial) -> f64| trials.iter().map(f).sum::<f64>() / n;
    Summary {
        trials: trials.len(),
        mae: avg(&|t| t.evaluation.metrics.mae),
        err_std: avg(&|t| t.evaluation.metrics.err_std),
        r: avg(&|t| t.evaluation.metrics.r),
        p_value: trials.iter().map(|t| t.evaluation.p_value).fold(0.0, f64::max),
    }
}
