//! Metric files and the comparison tables built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::FeatureKind;
use crate::error::{bail, Error, Result};

/// One trained model's validation metrics (percentage points for MAE and std).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub features: FeatureKind,
    /// `none`, `shot`, or `combined`.
    pub scenario: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub mae: f64,
    pub err_std: f64,
    pub r: f64,
    pub p_value: f64,
}

pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricRow>, _>>()?;
    if rows.is_empty() {
        bail!(Data, "{}: no metric rows", path.display());
    }
    Ok(rows)
}

/// Relative improvement in percent: reduction for errors, increase for
/// correlations, both relative to `old`.
pub fn relative_improvement(old: f64, new: f64, higher_is_better: bool) -> f64 {
    let gain = if higher_is_better { new - old } else { old - new };
    100.0 * gain / old
}

/// Range of [`relative_improvement`] over all unrounded values that display
/// as `old` and `new` with `decimals` decimal places.
pub fn improvement_range(old: f64, new: f64, decimals: i32, higher_is_better: bool) -> (f64, f64) {
    let h = 0.5 * 10f64.powi(-decimals);
    let corners = [(old - h, new - h), (old - h, new + h), (old + h, new - h), (old + h, new + h)];
    let v: Vec<f64> = corners.iter().map(|(o, n)| relative_improvement(*o, *n, higher_is_better)).collect();
    (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub mae: f64,
    pub err_std: f64,
    pub r: f64,
    pub trials: usize,
}

/// Mean metrics per (feature kind, scenario).
pub fn aggregate(rows: &[MetricRow]) -> BTreeMap<(String, String), Cell> {
    let mut acc: BTreeMap<(String, String), Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        acc.entry((r.features.name().to_string(), r.scenario.clone())).or_default().push(r);
    }
    acc.into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            let cell = Cell {
                mae: v.iter().map(|r| r.mae).sum::<f64>() / n,
                err_std: v.iter().map(|r| r.err_std).sum::<f64>() / n,
                r: v.iter().map(|r| r.r).sum::<f64>() / n,
                trials: v.len(),
            };
            (k, cell)
        })
        .collect()
}

/// One value of a comparison table, for the tidy CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    pub table: String,
    pub row: String,
    pub column: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub markdown: String,
    pub entries: Vec<TableEntry>,
}

const METRICS: [(&str, bool); 3] = [("MAE (%)", false), ("Std (%)", false), ("Pearson r", true)];

fn pick(c: &Cell, i: usize) -> f64 {
    [c.mae, c.err_std, c.r][i]
}

fn fmt(v: Option<f64>, mark: &mut bool) -> String {
    match v {
        Some(x) => format!("{:.2}", x),
        None => {
            *mark = true;
            "[^missing]".to_string()
        }
    }
}

/// Feature comparison on clean data, then each feature kind across noise scenarios.
pub fn build_report(rows: &[MetricRow]) -> Report {
    let cells = aggregate(rows);
    let get = |k: &str, s: &str| cells.get(&(k.to_string(), s.to_string())).copied();
    let mut md = String::new();
    let mut entries = Vec::new();
    let mut missing = false;

    let _ = writeln!(md, "## EPR vs RoR (clean data)\n");
    let _ = writeln!(md, "| Metric | RoR | EPR | Improvement |");
    let _ = writeln!(md, "|---|---|---|---|");
    let (ror, epr) = (get("ror", "none"), get("epr", "none"));
    for (i, (name, higher)) in METRICS.iter().enumerate() {
        let a = ror.map(|c| pick(&c, i));
        let b = epr.map(|c| pick(&c, i));
        let imp = a.zip(b).map(|(a, b)| relative_improvement(a, b, *higher));
        let imp_s = match imp {
            Some(v) => format!("{:.2}%", v),
            None => {
                missing = true;
                "[^missing]".to_string()
            }
        };
        let _ = writeln!(md, "| {} | {} | {} | {} |", name, fmt(a, &mut missing), fmt(b, &mut missing), imp_s);
        for (col, v) in [("ror", a), ("epr", b), ("improvement_pct", imp)] {
            entries.push(TableEntry { table: "features".into(), row: name.to_string(), column: col.into(), value: v });
        }
    }

    let scenarios = ["none", "shot", "combined"];
    let _ = writeln!(md, "\n## Clean vs noisy data\n");
    let _ = writeln!(md, "| Features | Metric | Clean | Shot noise | Shot + measurement noise |");
    let _ = writeln!(md, "|---|---|---|---|---|");
    for kind in FeatureKind::ALL {
        for (i, (name, _)) in METRICS.iter().enumerate() {
            let vals: Vec<Option<f64>> = scenarios.iter().map(|s| get(kind.name(), s).map(|c| pick(&c, i))).collect();
            let shown: Vec<String> = vals.iter().map(|v| fmt(*v, &mut missing)).collect();
            let _ = writeln!(md, "| {} | {} | {} |", kind.name().to_uppercase(), name, shown.join(" | "));
            for (s, v) in scenarios.iter().zip(&vals) {
                entries.push(TableEntry {
                    table: "noise".into(),
                    row: format!("{} {}", kind.name(), name),
                    column: s.to_string(),
                    value: *v,
                });
            }
        }
    }
    if missing {
        let _ = writeln!(md, "\n[^missing]: No metrics were supplied for this cell.");
    }
    Report { markdown: md, entries }
}

pub fn write_report(dir: &Path, report: &Report) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let md = dir.join("report.md");
    std::fs::write(&md, &report.markdown).map_err(|e| Error::io(&md, e))?;
    let csv_path = dir.join("comparison.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for e in &report.entries {
        w.serialize(e)?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))
}
