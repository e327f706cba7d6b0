//! Multi-channel waveforms, as CSV or binary.
//!
//! Binary layout, little-endian: `"TFOWAVE\0"`, version `u32`, `fs f64`,
//! `channels u32`, `samples u64`, then each channel's samples as `f64`.
//! CSV starts with a `# fs=<Hz>` line followed by a `ch1,ch2,...` header.
//! The format is picked from the file extension (`.csv` or anything else).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{bail, Error, Result};

pub const MAGIC: [u8; 8] = *b"TFOWAVE\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub fs: f64,
    pub channels: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn new(fs: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            bail!(Data, "sampling rate must be positive");
        }
        if channels.is_empty() || channels.iter().any(|c| c.len() != channels[0].len()) {
            bail!(Data, "waveform needs at least one channel, all of equal length");
        }
        Ok(Self { fs, channels })
    }

    pub fn samples(&self) -> usize {
        self.channels[0].len()
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn write_waveform(path: &Path, wave: &Waveform) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let res = if is_csv(path) { encode_csv(&mut w, wave) } else { encode(&mut w, wave) };
    res.and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_waveform(path: &Path) -> Result<Waveform> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let res = if is_csv(path) { decode_csv(&mut r) } else { decode(&mut r) };
    res.map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {}", path.display(), m)),
        other => other,
    })
}

pub fn encode(w: &mut impl Write, wave: &Waveform) -> std::io::Result<()> {
    w.write_all(&MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_f64::<LE>(wave.fs)?;
    w.write_u32::<LE>(wave.channels.len() as u32)?;
    w.write_u64::<LE>(wave.samples() as u64)?;
    for c in &wave.channels {
        for v in c {
            w.write_f64::<LE>(*v)?;
        }
    }
    Ok(())
}

pub fn decode(r: &mut impl Read) -> Result<Waveform> {
    let short = |e: std::io::Error| Error::Data(format!("truncated waveform ({})", e));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(short)?;
    if magic != MAGIC {
        bail!(Data, "not a waveform file");
    }
    let version = r.read_u32::<LE>().map_err(short)?;
    if version != VERSION {
        bail!(Data, "waveform version {} is not supported", version);
    }
    let fs = r.read_f64::<LE>().map_err(short)?;
    let n_ch = r.read_u32::<LE>().map_err(short)? as usize;
    let n = r.read_u64::<LE>().map_err(short)? as usize;
    let mut channels = Vec::with_capacity(n_ch);
    for _ in 0..n_ch {
        let mut c = vec![0.0; n];
        r.read_f64_into::<LE>(&mut c).map_err(short)?;
        channels.push(c);
    }
    Waveform::new(fs, channels)
}

pub fn encode_csv(w: &mut impl Write, wave: &Waveform) -> std::io::Result<()> {
    writeln!(w, "# fs={}", wave.fs)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record((1..=wave.channels.len()).map(|c| format!("ch{}", c)))?;
    for i in 0..wave.samples() {
        out.write_record(wave.channels.iter().map(|c| c[i].to_string()))?;
    }
    out.flush()
}

pub fn decode_csv(r: &mut impl BufRead) -> Result<Waveform> {
    let mut first = String::new();
    r.read_line(&mut first).map_err(|e| Error::Data(e.to_string()))?;
    let fs: f64 = first
        .trim()
        .strip_prefix("# fs=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Data("waveform CSV must start with '# fs=<Hz>'".into()))?;
    let mut reader = csv::Reader::from_reader(r);
    let n_ch = reader.headers()?.len();
    let mut channels = vec![Vec::new(); n_ch];
    for rec in reader.records() {
        let rec = rec?;
        for (c, field) in channels.iter_mut().zip(rec.iter()) {
            c.push(field.trim().parse::<f64>().map_err(|_| Error::Data(format!("bad number '{}'", field)))?);
        }
    }
    Waveform::new(fs, channels)
}
