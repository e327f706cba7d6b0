//! Binary pathlength tables.
//!
//! Layout, little-endian:
//!
//! ```text
//! magic       8 bytes  "TFOPATH\0"
//! version     u32
//! model_hash  u64
//! wavelength  f64
//! n_launched  u64
//! seed        u64
//! num_rings   u32
//! sim_tally   num_rings x f64
//! num_rows    u64
//! rows        num_rows x (photon_index u64, detector i32, 4 x f64 pathlengths)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use tfo_core::tissue::{LayerKind, NUM_LAYERS};
use tfo_core::transport::{PathlengthTable, PhotonRecord, TableMeta};

use crate::error::{bail, Error, Result};

pub const MAGIC: [u8; 8] = *b"TFOPATH\0";
pub const VERSION: u32 = 1;

pub fn write_table(path: &Path, table: &PathlengthTable) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(&mut w, table).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn encode(w: &mut impl Write, table: &PathlengthTable) -> std::io::Result<()> {
    let meta = table.meta();
    w.write_all(&MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_u64::<LE>(meta.model_hash)?;
    w.write_f64::<LE>(meta.wavelength)?;
    w.write_u64::<LE>(meta.n_launched)?;
    w.write_u64::<LE>(meta.seed)?;
    w.write_u32::<LE>(table.num_rings() as u32)?;
    for v in table.sim_tally() {
        w.write_f64::<LE>(*v)?;
    }
    w.write_u64::<LE>(table.rows().len() as u64)?;
    for r in table.rows() {
        w.write_u64::<LE>(r.photon_index)?;
        w.write_i32::<LE>(r.detector.map_or(-1, |d| d as i32))?;
        for l in r.pathlengths {
            w.write_f64::<LE>(l)?;
        }
    }
    Ok(())
}

pub fn read_table(path: &Path) -> Result<PathlengthTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(&mut BufReader::new(file)).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {}", path.display(), m)),
        other => other,
    })
}

pub fn decode(r: &mut impl Read) -> Result<PathlengthTable> {
    let short = |e: std::io::Error| Error::Data(format!("truncated table ({})", e));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(short)?;
    if magic != MAGIC {
        bail!(Data, "not a pathlength table");
    }
    let version = r.read_u32::<LE>().map_err(short)?;
    if version != VERSION {
        bail!(Data, "table version {} is not supported", version);
    }
    let meta = TableMeta {
        model_hash: r.read_u64::<LE>().map_err(short)?,
        wavelength: r.read_f64::<LE>().map_err(short)?,
        n_launched: r.read_u64::<LE>().map_err(short)?,
        seed: r.read_u64::<LE>().map_err(short)?,
    };
    let num_rings = r.read_u32::<LE>().map_err(short)? as usize;
    let tally = (0..num_rings).map(|_| r.read_f64::<LE>()).collect::<std::io::Result<Vec<_>>>().map_err(short)?;
    let num_rows = r.read_u64::<LE>().map_err(short)?;
    if num_rows > meta.n_launched {
        bail!(Data, "{} rows for {} launched photons", num_rows, meta.n_launched);
    }
    let mut rows = Vec::with_capacity(num_rows as usize);
    for _ in 0..num_rows {
        let photon_index = r.read_u64::<LE>().map_err(short)?;
        let det = r.read_i32::<LE>().map_err(short)?;
        let mut pathlengths = [0.0; NUM_LAYERS];
        for l in pathlengths.iter_mut() {
            *l = r.read_f64::<LE>().map_err(short)?;
        }
        let detector = u32::try_from(det).ok();
        rows.push(PhotonRecord { photon_index, detector, pathlengths });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::Data(e.to_string()))? != 0 {
        bail!(Data, "trailing bytes after the last row");
    }
    Ok(PathlengthTable::from_parts(meta, num_rings, rows, tally)?)
}

/// Human-readable dump of the rows.
pub fn write_table_csv(path: &Path, table: &PathlengthTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["photon_index".to_string(), "detector".to_string()];
    header.extend(LayerKind::ORDER.iter().map(|k| format!("L_{}", k.name())));
    w.write_record(&header)?;
    for r in table.rows() {
        let mut rec = vec![r.photon_index.to_string(), r.detector.map_or(-1, |d| d as i64).to_string()];
        rec.extend(r.pathlengths.iter().map(|l| l.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PathlengthTable {
        let rows = vec![
            PhotonRecord { photon_index: 2, detector: Some(0), pathlengths: [1.0, 0.5, 0.25, 0.0] },
            PhotonRecord { photon_index: 7, detector: Some(1), pathlengths: [3.0, 2.0, 1.0, 4.5] },
        ];
        let meta = TableMeta { model_hash: 0xabcdef, wavelength: 735.0, n_launched: 10, seed: 4 };
        PathlengthTable::from_parts(meta, 2, rows, vec![0.1, 0.01]).unwrap()
    }

    #[test]
    fn binary_roundtrip() {
        let t = sample();
        let mut buf = Vec::new();
        encode(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 8 * 4 + 4 + 2 * 8 + 8 + 2 * 44);
        assert_eq!(decode(&mut buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn corrupt_input_is_a_data_error() {
        let mut buf = Vec::new();
        encode(&mut buf, &sample()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&mut bad.as_slice()), Err(Error::Data(_))));
        assert!(matches!(decode(&mut &buf[..buf.len() - 3]), Err(Error::Data(_))));
        let mut extra = buf.clone();
        extra.push(0);
        assert!(matches!(decode(&mut extra.as_slice()), Err(Error::Data(_))));
    }
}
