//! Train/validation splits.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::rng::{Domain, RngStream};

/// One cross-validation iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    /// Loss weight of each `train` entry: one over its round's training count.
    pub train_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalCv {
    pub folds: Vec<Fold>,
    /// Rounds with fewer samples than folds, left out entirely.
    pub excluded_rounds: Vec<u64>,
}

/// Contiguous `k`-fold split of every round in time order.
///
/// Iteration `i` validates on fold `i` of every round and trains on the rest,
/// weighting each training sample by the inverse of its round's training
/// count so every round contributes equally.
pub fn temporal_cv(rounds: &[u64], times: &[f64], k: usize) -> Result<TemporalCv> {
    if rounds.len() != times.len() {
        bail!(Data, "{} round ids for {} timestamps", rounds.len(), times.len());
    }
    if k < 2 {
        bail!(Config, "need at least two folds");
    }
    let mut by_round: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in rounds.iter().enumerate() {
        by_round.entry(*r).or_default().push(i);
    }
    let mut excluded_rounds = Vec::new();
    // Fold boundaries per retained round.
    let mut parts: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for (round, mut idx) in by_round {
        if idx.len() < k {
            log::warn!("round {} has {} samples, fewer than {} folds; excluded", round, idx.len(), k);
            excluded_rounds.push(round);
            continue;
        }
        idx.sort_by(|a, b| times[*a].total_cmp(&times[*b]).then(a.cmp(b)));
        let n = idx.len();
        let bounds = (0..=k).map(|f| f * n / k).collect();
        parts.push((idx, bounds));
    }
    if parts.is_empty() {
        bail!(Data, "no round has at least {} samples", k);
    }
    let folds = (0..k)
        .map(|f| {
            let mut fold = Fold { train: Vec::new(), val: Vec::new(), train_weights: Vec::new() };
            for (idx, b) in &parts {
                fold.val.extend_from_slice(&idx[b[f]..b[f + 1]]);
                let train_count = idx.len() - (b[f + 1] - b[f]);
                for (j, i) in idx.iter().enumerate() {
                    if j < b[f] || j >= b[f + 1] {
                        fold.train.push(*i);
                        fold.train_weights.push(1.0 / train_count as f64);
                    }
                }
            }
            fold
        })
        .collect();
    Ok(TemporalCv { folds, excluded_rounds })
}

/// Seeded random split putting `round(train_frac * n)` indices in training.
pub fn random_split(n: usize, train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < train_frac && train_frac < 1.0) {
        bail!(Config, "training fraction must lie strictly between 0 and 1");
    }
    let mut idx: Vec<usize> = (0..n).collect();
    RngStream::new(seed, Domain::Split, 0).shuffle(&mut idx);
    let cut = libm::round(train_frac * n as f64) as usize;
    let val = idx.split_off(cut);
    Ok((idx, val))
}

/// [`random_split`] applied separately inside each group (e.g. each geometry),
/// so every group keeps the same train fraction. Group `g`, in order of first
/// appearance, shuffles with stream index `g + 1`. Both outputs are sorted.
pub fn grouped_split(groups: &[u64], train_frac: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0 < train_frac && train_frac < 1.0) {
        bail!(Config, "training fraction must lie strictly between 0 and 1");
    }
    let mut order: Vec<u64> = Vec::new();
    let mut members: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, g) in groups.iter().enumerate() {
        if !members.contains_key(g) {
            order.push(*g);
        }
        members.entry(*g).or_default().push(i);
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (k, g) in order.iter().enumerate() {
        let mut idx = members.remove(g).unwrap_or_default();
        RngStream::new(seed, Domain::Split, k as u64 + 1).shuffle(&mut idx);
        let cut = libm::round(train_frac * idx.len() as f64) as usize;
        val.extend_from_slice(&idx[cut..]);
        idx.truncate(cut);
        train.extend(idx);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}
