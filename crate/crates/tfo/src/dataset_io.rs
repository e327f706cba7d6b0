//! Feature datasets as CSV.
//!
//! Columns: `d_m, hb_m, s_m, hb_f, s_f`, then `epr_w{1,2}_r{1..5}`, then
//! optionally `ror_r{1..5}` and the raw intensities `i1_w*_r*` (systole) and
//! `i2_w*_r*` (diastole). Noise injection needs the intensities.

use std::path::Path;

use tfo_core::features::{Features, EPR_DIM, NUM_SELECTED, ROR_DIM};
use tfo_core::replay::{FeatureRow, Labels};
use tfo_core::tissue::Hemodynamics;

use crate::error::{bail, Error, Result};

const LABELS: [&str; 5] = ["d_m", "hb_m", "s_m", "hb_f", "s_f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Columns {
    pub ror: bool,
    pub intensities: bool,
}

impl Columns {
    pub const ALL: Columns = Columns { ror: true, intensities: true };
}

/// Rows read back from CSV. Columns that were absent are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<FeatureRow>,
    pub columns: Columns,
}

fn per_detector(prefix: &str) -> Vec<String> {
    (0..EPR_DIM).map(|k| format!("{}_w{}_r{}", prefix, k / NUM_SELECTED + 1, k % NUM_SELECTED + 1)).collect()
}

fn ror_names() -> Vec<String> {
    (0..ROR_DIM).map(|r| format!("ror_r{}", r + 1)).collect()
}

pub fn header(columns: Columns) -> Vec<String> {
    let mut h: Vec<String> = LABELS.iter().map(|s| s.to_string()).collect();
    h.extend(per_detector("epr"));
    if columns.ror {
        h.extend(ror_names());
    }
    if columns.intensities {
        h.extend(per_detector("i1"));
        h.extend(per_detector("i2"));
    }
    h
}

pub fn write_dataset(path: &Path, rows: &[FeatureRow], columns: Columns) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    w.write_record(header(columns))?;
    for row in rows {
        let h = row.labels.hemo;
        let mut rec: Vec<f64> = vec![row.labels.d_m, h.hb_m, h.s_m, h.hb_f, h.s_f];
        rec.extend(row.features.epr);
        if columns.ror {
            rec.extend(row.features.ror);
        }
        if columns.intensities {
            rec.extend(row.i1);
            rec.extend(row.i2);
        }
        w.write_record(rec.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {}", path.display(), e)))?;
    let head: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let find = |name: &str| head.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::Data(format!("{}: missing column {}", path.display(), name)));
    let label_idx = LABELS.iter().map(|n| need(n)).collect::<Result<Vec<_>>>()?;
    let epr_idx = per_detector("epr").iter().map(|n| need(n)).collect::<Result<Vec<_>>>()?;
    let optional = |names: Vec<String>| -> Result<Option<Vec<usize>>> {
        let found: Vec<Option<usize>> = names.iter().map(|n| find(n)).collect();
        match found.iter().filter(|f| f.is_some()).count() {
            0 => Ok(None),
            n if n == names.len() => Ok(Some(found.into_iter().flatten().collect())),
            _ => bail!(Data, "{}: incomplete {} columns", path.display(), names[0]),
        }
    };
    let ror_idx = optional(ror_names())?;
    let i1_idx = optional(per_detector("i1"))?;
    let i2_idx = optional(per_detector("i2"))?;
    let columns = Columns { ror: ror_idx.is_some(), intensities: i1_idx.is_some() && i2_idx.is_some() };

    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<f64>().map_err(|_| Error::Data(format!("{}: row {}: bad number '{}'", path.display(), line + 2, s)))
        };
        let l: Vec<f64> = label_idx.iter().map(|&i| get(i)).collect::<Result<_>>()?;
        let hemo = Hemodynamics { hb_m: l[1], s_m: l[2], hb_f: l[3], s_f: l[4] };
        hemo.validate().map_err(|e| Error::Data(format!("{}: row {}: {}", path.display(), line + 2, e)))?;
        let fill = |idx: &Option<Vec<usize>>, out: &mut [f64]| -> Result<()> {
            match idx {
                Some(idx) => idx.iter().zip(out.iter_mut()).try_for_each(|(&i, o)| get(i).map(|v| *o = v)),
                None => {
                    out.fill(f64::NAN);
                    Ok(())
                }
            }
        };
        let mut epr = [0.0; EPR_DIM];
        fill(&Some(epr_idx.clone()), &mut epr)?;
        let mut ror = [0.0; ROR_DIM];
        fill(&ror_idx, &mut ror)?;
        let (mut i1, mut i2) = ([0.0; EPR_DIM], [0.0; EPR_DIM]);
        fill(&i1_idx, &mut i1)?;
        fill(&i2_idx, &mut i2)?;
        rows.push(FeatureRow { labels: Labels { d_m: l[0], hemo }, i1, i2, features: Features { epr, ror } });
    }
    if rows.is_empty() {
        bail!(Data, "{}: no rows", path.display());
    }
    Ok(Dataset { rows, columns })
}
