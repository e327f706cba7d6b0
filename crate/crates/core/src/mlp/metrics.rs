//! Accuracy metrics of fSpO2 estimates.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::stats::{mean, pearson, std_pop};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub n: usize,
    /// Mean absolute error.
    pub mae: f64,
    /// Population standard deviation of the absolute errors.
    pub err_std: f64,
    /// Pearson correlation of estimates against labels.
    pub r: f64,
}

pub fn evaluate(pred: &[f64], label: &[f64]) -> Result<Metrics> {
    if pred.len() != label.len() || pred.len() < 2 {
        bail!(Data, "need at least two paired values ({} vs {})", pred.len(), label.len());
    }
    let abs: Vec<f64> = pred.iter().zip(label).map(|(p, y)| (p - y).abs()).collect();
    Ok(Metrics { n: pred.len(), mae: mean(&abs), err_std: std_pop(&abs), r: pearson(pred, label)? })
}
