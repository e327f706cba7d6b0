//! Trained-model files.
//!
//! Layout, little-endian: `"TFOMODL\0"`, version `u32`, a length-prefixed
//! JSON header (architecture, hyperparameters, feature kind), then
//! length-prefixed `f64` arrays: parameters, running means and variances per
//! hidden layer, and the feature and label scalers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};
use tfo_core::mlp::{Mlp, MlpConfig, Regressor, Standardizer};

use crate::config::FeatureKind;
use crate::error::{bail, Error, Result};

pub const MAGIC: [u8; 8] = *b"TFOMODL\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub features: FeatureKind,
    pub smooth: bool,
    pub widths: Vec<usize>,
    pub input_dim: usize,
    pub first_hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub init_std: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub seed: u64,
}

impl Header {
    pub fn new(cfg: &MlpConfig, features: FeatureKind, smooth: bool) -> Self {
        Self {
            features,
            smooth,
            widths: cfg.widths(),
            input_dim: cfg.input_dim,
            first_hidden: cfg.first_hidden,
            lr: cfg.lr,
            weight_decay: cfg.weight_decay,
            batch_size: cfg.batch_size,
            max_epochs: cfg.max_epochs,
            patience: cfg.patience,
            init_std: cfg.init_std,
            bn_momentum: cfg.bn_momentum,
            bn_eps: cfg.bn_eps,
            seed: cfg.seed,
        }
    }

    pub fn mlp_config(&self) -> MlpConfig {
        MlpConfig {
            input_dim: self.input_dim,
            first_hidden: self.first_hidden,
            lr: self.lr,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            init_std: self.init_std,
            bn_momentum: self.bn_momentum,
            bn_eps: self.bn_eps,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub model: Regressor,
}

fn write_array(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    w.write_u64::<LE>(v.len() as u64)?;
    v.iter().try_for_each(|x| w.write_f64::<LE>(*x))
}

fn read_array(r: &mut impl Read) -> std::io::Result<Vec<f64>> {
    let n = r.read_u64::<LE>()? as usize;
    if n > 1 << 28 {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "array too long"));
    }
    let mut v = vec![0.0; n];
    r.read_f64_into::<LE>(&mut v)?;
    Ok(v)
}

pub fn encode(w: &mut impl Write, ck: &Checkpoint) -> Result<()> {
    let io = |e: std::io::Error| Error::Data(e.to_string());
    let json = serde_json::to_vec(&ck.header)?;
    w.write_all(&MAGIC).map_err(io)?;
    w.write_u32::<LE>(VERSION).map_err(io)?;
    w.write_u64::<LE>(json.len() as u64).map_err(io)?;
    w.write_all(&json).map_err(io)?;
    let m = &ck.model;
    write_array(w, m.mlp.params()).map_err(io)?;
    let (mean, var) = m.mlp.running_stats();
    w.write_u32::<LE>(mean.len() as u32).map_err(io)?;
    for (a, b) in mean.iter().zip(var) {
        write_array(w, a).map_err(io)?;
        write_array(w, b).map_err(io)?;
    }
    for s in [&m.x_scale, &m.y_scale] {
        write_array(w, &s.mean).map_err(io)?;
        write_array(w, &s.std).map_err(io)?;
    }
    Ok(())
}

pub fn decode(r: &mut impl Read) -> Result<Checkpoint> {
    let short = |e: std::io::Error| Error::Data(format!("truncated model file ({})", e));
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(short)?;
    if magic != MAGIC {
        bail!(Data, "not a model file");
    }
    let version = r.read_u32::<LE>().map_err(short)?;
    if version != VERSION {
        bail!(Data, "model version {} is not supported", version);
    }
    let len = r.read_u64::<LE>().map_err(short)? as usize;
    if len > 1 << 20 {
        bail!(Data, "model header too long");
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(short)?;
    let header: Header = serde_json::from_slice(&json)?;
    let cfg = header.mlp_config();
    if cfg.widths() != header.widths {
        bail!(Data, "model header widths do not match its configuration");
    }
    let mut mlp = Mlp::new(&cfg)?;
    mlp.set_params(read_array(r).map_err(short)?)?;
    let layers = r.read_u32::<LE>().map_err(short)? as usize;
    let (mut mean, mut var) = (Vec::new(), Vec::new());
    for _ in 0..layers.min(64) {
        mean.push(read_array(r).map_err(short)?);
        var.push(read_array(r).map_err(short)?);
    }
    mlp.set_running_stats(mean, var)?;
    let mut scaler = || -> Result<Standardizer> {
        Ok(Standardizer { mean: read_array(r).map_err(short)?, std: read_array(r).map_err(short)? })
    };
    let x_scale = scaler()?;
    let y_scale = scaler()?;
    if x_scale.mean.len() != cfg.input_dim || x_scale.std.len() != cfg.input_dim || y_scale.mean.len() != 1 {
        bail!(Data, "scaler shapes do not match the model");
    }
    Ok(Checkpoint { header, model: Regressor { mlp, x_scale, y_scale } })
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode(&mut w, ck)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode(&mut BufReader::new(file))
}
