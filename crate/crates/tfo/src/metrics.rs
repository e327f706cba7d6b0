//! Significance of a Pearson correlation.

use statrs::distribution::{ContinuousCDF, StudentsT};
use tfo_core::mlp::{evaluate, Metrics};

use crate::error::Result;

/// Two-sided p-value of Pearson's `r` over `n` pairs, from the t statistic
/// `r sqrt((n - 2) / (1 - r^2))` with `n - 2` degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return f64::NAN;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * dist.sf(t.abs())
}

/// Core metrics plus the p-value of the correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub p_value: f64,
}

pub fn evaluate_with_p(pred: &[f64], label: &[f64]) -> Result<Evaluation> {
    let metrics = evaluate(pred, label)?;
    Ok(Evaluation { metrics, p_value: pearson_p_value(metrics.r, metrics.n) })
}
