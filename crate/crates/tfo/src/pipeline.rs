//! End-to-end runs with a content-addressed stage cache.
//!
//! Every stage has a key: the SHA-256 of its own settings and the keys of the
//! stages it reads from. `manifest.json` in the output directory records each
//! stage's key and the SHA-256 of each file it wrote; a stage is skipped when
//! its key is unchanged and its files are present and intact. Every output
//! gets a `<file>.meta.json` sidecar with the seeds and hashes behind it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tfo_core::replay::{intensity_profile, SweepContext};
use tfo_core::tissue::{absorption_vector, Hemodynamics};

use crate::checkpoint::{self, Checkpoint, Header};
use crate::config::{Config, FeatureKind, NoiseScenario};
use crate::dataset_io::{read_dataset, write_dataset, Columns};
use crate::error::{bail, Error, Result};
use crate::experiment::random_split_trials;
use crate::parallel;
use crate::report::{build_report, read_metrics, write_metrics, write_report, MetricRow};
use crate::table_io::{read_table, write_table};

pub const MANIFEST: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub photon_seed: u64,
    pub noise_seed: u64,
    pub training_seeds: Vec<u64>,
    pub stages: BTreeMap<String, StageEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub key: String,
    /// Output path (relative to the run directory) to its SHA-256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Executed,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub status: Status,
    pub key: String,
}

/// What a run did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub stages: Vec<StageRecord>,
    pub photons_simulated: u64,
}

impl RunSummary {
    pub fn status(&self, name: &str) -> Option<Status> {
        self.stages.iter().find(|s| s.name == name).map(|s| s.status)
    }

    /// Names of the stages with the given status.
    pub fn with_status(&self, status: Status) -> Vec<&str> {
        self.stages.iter().filter(|s| s.status == status).map(|s| s.name.as_str()).collect()
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_hash(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    std::io::copy(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(h.finalize()))
}

/// Stage key: hash of the stage name, the tool version, and `inputs`.
pub fn stage_key(name: &str, inputs: &impl Serialize) -> String {
    let body = serde_json::to_vec(&(name, TOOL_VERSION, inputs)).expect("stage inputs serialize");
    sha256_hex(&body)
}

pub fn config_hash(cfg: &Config) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}

fn fmt_num(v: f64) -> String {
    format!("{}", v).replace('.', "p")
}

/// File name of the table for one geometry and wavelength.
pub fn table_file(d_m: f64, wavelength: f64) -> String {
    format!("dm{}_wl{}.tfop", fmt_num(d_m), fmt_num(wavelength))
}

pub fn table_name(d_m: f64, wavelength: f64) -> String {
    format!("tables/{}", table_file(d_m, wavelength))
}

pub fn dataset_name(scenario: NoiseScenario) -> String {
    match scenario {
        NoiseScenario::None => "datasets/clean.csv".into(),
        s => format!("datasets/noisy_{}.csv", scenario_name(s)),
    }
}

pub fn scenario_name(s: NoiseScenario) -> &'static str {
    match s {
        NoiseScenario::None => "none",
        NoiseScenario::Shot => "shot",
        NoiseScenario::Combined => "combined",
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub workers: Option<usize>,
}

struct Run<'a> {
    cfg: &'a Config,
    dir: PathBuf,
    manifest: Manifest,
    records: Vec<StageRecord>,
    photons: u64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    stage: &'a str,
    stage_key: &'a str,
    config_hash: &'a str,
    photon_seed: u64,
    noise_seed: u64,
    training_seeds: &'a [u64],
}

impl<'a> Run<'a> {
    fn open(cfg: &'a Config, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST);
        let mut manifest = if path.exists() {
            let text = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_slice::<Manifest>(&text).unwrap_or_else(|e| {
                log::warn!("{}: unreadable manifest ({}); starting fresh", path.display(), e);
                Manifest::default()
            })
        } else {
            Manifest::default()
        };
        manifest.tool_version = TOOL_VERSION.into();
        manifest.config_hash = config_hash(cfg);
        manifest.photon_seed = cfg.seed;
        manifest.noise_seed = cfg.noise.seed;
        manifest.training_seeds = cfg.training.seeds.clone();
        Ok(Self { cfg, dir: dir.to_path_buf(), manifest, records: Vec::new(), photons: 0 })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    fn fresh(&self, name: &str, key: &str) -> bool {
        let Some(entry) = self.manifest.stages.get(name) else { return false };
        entry.key == key
            && !entry.outputs.is_empty()
            && entry.outputs.iter().all(|(rel, h)| file_hash(&self.path(rel)).is_ok_and(|got| &got == h))
    }

    fn ensure_parent(&self, rel: &str) -> Result<()> {
        let p = self.path(rel);
        let parent = p.parent().expect("relative output path has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))
    }

    fn record(&mut self, name: &str, key: &str, outputs: &[String]) -> Result<()> {
        let mut entry = StageEntry { key: key.into(), outputs: BTreeMap::new() };
        for rel in outputs {
            let sidecar = Sidecar {
                stage: name,
                stage_key: key,
                config_hash: &self.manifest.config_hash,
                photon_seed: self.cfg.seed,
                noise_seed: self.cfg.noise.seed,
                training_seeds: &self.cfg.training.seeds,
            };
            let side = self.path(&format!("{}.meta.json", rel));
            std::fs::write(&side, serde_json::to_vec_pretty(&sidecar)?).map_err(|e| Error::io(&side, e))?;
            entry.outputs.insert(rel.clone(), file_hash(&self.path(rel))?);
        }
        self.manifest.stages.insert(name.into(), entry);
        self.records.push(StageRecord { name: name.into(), status: Status::Executed, key: key.into() });
        self.save()
    }

    fn cached(&mut self, name: &str, key: &str) {
        log::info!("stage {} is up to date", name);
        self.records.push(StageRecord { name: name.into(), status: Status::Cached, key: key.into() });
    }

    fn save(&self) -> Result<()> {
        let path = self.path(MANIFEST);
        let text = serde_json::to_vec_pretty(&self.manifest)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Run `body` unless the stage is fresh; `body` must write every output.
    fn stage(&mut self, name: &str, key: &str, outputs: &[String], body: impl FnOnce(&Self) -> Result<()>) -> Result<()> {
        if self.fresh(name, key) {
            self.cached(name, key);
            return Ok(());
        }
        log::info!("running stage {}", name);
        for o in outputs {
            self.ensure_parent(o)?;
        }
        body(self)?;
        self.record(name, key, outputs)
    }
}

/// Everything that decides one table.
#[derive(Serialize)]
struct SimulateInputs<'a> {
    photons: u64,
    seed: u64,
    wavelengths: &'a [f64],
    layers: &'a [crate::config::Layer],
    source: [f64; 2],
    lateral_half_width: f64,
    volume_depth: f64,
    path_cutoff: Option<f64>,
    rings: (f64, f64, usize, f64),
    d_m: f64,
    wavelength: f64,
}

impl<'a> SimulateInputs<'a> {
    fn new(cfg: &'a Config, d_m: f64, wavelength: f64) -> Self {
        let (g, d) = (&cfg.geometry, &cfg.detectors);
        Self {
            photons: cfg.photons,
            seed: cfg.seed,
            wavelengths: &cfg.wavelengths,
            layers: &cfg.layers,
            source: g.source,
            lateral_half_width: g.lateral_half_width,
            volume_depth: g.volume_depth,
            path_cutoff: g.path_cutoff,
            rings: (d.first_sdd, d.last_sdd, d.count, d.half_width),
            d_m,
            wavelength,
        }
    }
}

/// Run every stage, reusing cached results where possible.
pub fn run_pipeline(cfg: &Config, out_dir: &Path, opts: &Options) -> Result<RunSummary> {
    cfg.validate()?;
    parallel::with_workers(opts.workers, || run_stages(cfg, out_dir))?
}

fn run_stages(cfg: &Config, out_dir: &Path) -> Result<RunSummary> {
    let mut run = Run::open(cfg, out_dir)?;
    let d_ms = cfg.d_m_values();

    // Tables: independent, simulated in parallel and written straight to disk.
    let mut table_keys = Vec::new();
    let mut pending = Vec::new();
    for &d_m in &d_ms {
        for &wl in &cfg.wavelengths {
            let name = format!("simulate:{}", table_name(d_m, wl));
            let key = stage_key("simulate", &SimulateInputs::new(cfg, d_m, wl));
            table_keys.push(key.clone());
            if run.fresh(&name, &key) {
                run.cached(&name, &key);
            } else {
                run.ensure_parent(&table_name(d_m, wl))?;
                pending.push((name, key, d_m, wl));
            }
        }
    }
    let dir = run.dir.clone();
    let done: Vec<Result<()>> = pending
        .par_iter()
        .map(|(_, _, d_m, wl)| {
            log::info!("simulating d_m = {} mm at {} nm ({} photons)", d_m, wl, cfg.photons);
            let table = parallel::simulate(&cfg.model(*d_m)?, *wl, cfg.photons, cfg.seed)?;
            write_table(&dir.join(table_name(*d_m, *wl)), &table)
        })
        .collect();
    for ((name, key, d_m, wl), res) in pending.iter().zip(done) {
        res?;
        run.photons += cfg.photons;
        run.record(name, key, &[table_name(*d_m, *wl)])?;
    }

    // Sweep over every geometry, plus sensitivity plot data.
    let sweep_key = stage_key(
        "sweep",
        &(&table_keys, &cfg.extinction, &cfg.blood, &cfg.grid, &cfg.detectors.selected_sdd),
    );
    let clean = dataset_name(NoiseScenario::None);
    let sens = "plots/sensitivity.csv".to_string();
    run.stage("sweep", &sweep_key, &[clean.clone(), sens.clone()], |run| {
        let mut rows = Vec::new();
        let mut sens_rows = Vec::new();
        for &d_m in &d_ms {
            let model = cfg.model(d_m)?;
            let tables = cfg
                .wavelengths
                .iter()
                .map(|&wl| read_table(&run.path(&table_name(d_m, wl))))
                .collect::<Result<Vec<_>>>()?;
            let ctx = SweepContext::new(
                model.clone(),
                &tables.iter().collect::<Vec<_>>(),
                &cfg.selected_rings()?,
                cfg.extinction_table()?,
                cfg.blood_model(),
            )?;
            let out = parallel::sweep(&ctx, &cfg.hemo_grid())?;
            rows.extend(out.rows);
            sens_rows.extend(sensitivity_rows(cfg, &model, &tables)?);
        }
        write_dataset(&run.path(&clean), &rows, Columns::ALL)?;
        write_sensitivity(&run.path(&sens), &sens_rows)
    })?;

    // Noise.
    let scenario = cfg.noise.scenario;
    let data_key = match cfg.noise.core() {
        None => sweep_key.clone(),
        Some(_) => {
            let key = stage_key("noise", &(&sweep_key, &cfg.noise));
            let name = format!("noise:{}", scenario_name(scenario));
            let noisy = dataset_name(scenario);
            run.stage(&name, &key, &[noisy.clone()], |run| {
                let rows = read_dataset(&run.path(&clean))?.rows;
                let out = parallel::noise(&rows, &cfg.noise.core().expect("noise configured"))?;
                write_dataset(&run.path(&noisy), &out.rows, Columns::ALL)
            })?;
            key
        }
    };

    // Training: both feature kinds, one model per seed.
    let sc = scenario_name(scenario);
    let train_key = stage_key("train", &(&data_key, &cfg.training, &cfg.detectors.selected_sdd));
    let metrics_rel = format!("metrics/metrics_{}.csv", sc);
    let mut outputs = vec![metrics_rel.clone()];
    for kind in FeatureKind::ALL {
        outputs.push(format!("plots/predictions_{}_{}.csv", kind.name(), sc));
        for s in &cfg.training.seeds {
            outputs.push(format!("models/{}_{}_seed{}.bin", kind.name(), sc, s));
        }
    }
    run.stage(&format!("train:{}", sc), &train_key, &outputs, |run| {
        let rows = read_dataset(&run.path(&dataset_name(scenario)))?.rows;
        let sdd = cfg.selected_sdd()?;
        let mut metrics = Vec::new();
        for kind in FeatureKind::ALL {
            let trials = random_split_trials(&rows, kind, &cfg.training, &sdd)?;
            let mut preds = csv::Writer::from_path(run.path(&format!("plots/predictions_{}_{}.csv", kind.name(), sc)))?;
            preds.write_record(["seed", "d_m", "label", "prediction"])?;
            for t in &trials {
                let m = t.evaluation.metrics;
                metrics.push(MetricRow {
                    features: kind,
                    scenario: sc.into(),
                    seed: t.seed,
                    n_train: t.n_train,
                    n_val: m.n,
                    mae: m.mae,
                    err_std: m.err_std,
                    r: m.r,
                    p_value: t.evaluation.p_value,
                });
                for (i, y, p) in &t.predictions {
                    preds.write_record([t.seed.to_string(), rows[*i].labels.d_m.to_string(), y.to_string(), p.to_string()])?;
                }
                let header = Header::new(&cfg.training.mlp(kind.dim(), t.seed), kind, cfg.training.smooth);
                let path = run.path(&format!("models/{}_{}_seed{}.bin", kind.name(), sc, t.seed));
                checkpoint::save(&path, &Checkpoint { header, model: t.model.clone() })?;
            }
            preds.flush().map_err(|e| Error::Data(e.to_string()))?;
        }
        write_metrics(&run.path(&metrics_rel), &metrics)
    })?;

    // Report over every scenario trained so far in this directory.
    let metric_files = metric_files(&run.dir)?;
    let hashes = metric_files.iter().map(|p| file_hash(p)).collect::<Result<Vec<_>>>()?;
    let report_key = stage_key("report", &hashes);
    run.stage("report", &report_key, &["report/report.md".into(), "report/comparison.csv".into()], |run| {
        let mut rows = Vec::new();
        for p in &metric_files {
            rows.extend(read_metrics(p)?);
        }
        write_report(&run.path("report"), &build_report(&rows))
    })?;

    run.save()?;
    Ok(RunSummary { out_dir: run.dir.clone(), stages: run.records, photons_simulated: run.photons })
}

fn metric_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mdir = dir.join("metrics");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&mdir)
        .map_err(|e| Error::io(&mdir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!(Data, "no metric files in {}", mdir.display());
    }
    Ok(files)
}

/// One ring of one table at the reference hemodynamics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub d_m: f64,
    pub fetal_depth: f64,
    pub wavelength: f64,
    pub ring: usize,
    pub sdd: f64,
    pub photons: u64,
    pub intensity: f64,
    pub fetal_sensitive_intensity: f64,
    pub fetal_sensitivity: Option<f64>,
}

/// The middle value of each grid axis.
pub fn reference_hemodynamics(cfg: &Config) -> Hemodynamics {
    let g = cfg.hemo_grid();
    let mid = |v: &[f64]| v[v.len() / 2];
    Hemodynamics { hb_m: mid(&g.hb_m), s_m: mid(&g.s_m), hb_f: mid(&g.hb_f), s_f: mid(&g.s_f) }
}

pub fn sensitivity_rows(
    cfg: &Config,
    model: &tfo_core::tissue::TissueModel,
    tables: &[tfo_core::transport::PathlengthTable],
) -> Result<Vec<SensitivityRow>> {
    let hemo = reference_hemodynamics(cfg);
    let ext = cfg.extinction_table()?;
    let mut out = Vec::new();
    for (t, &wl) in tables.iter().zip(&cfg.wavelengths) {
        let mu = absorption_vector(model, &hemo, wl, &ext, &cfg.blood_model())?;
        let p = intensity_profile(t, &mu)?;
        for (r, ring) in model.rings().iter().enumerate() {
            out.push(SensitivityRow {
                d_m: model.d_m(),
                fetal_depth: model.fetal_depth(),
                wavelength: wl,
                ring: r,
                sdd: ring.sdd,
                photons: t.ring_counts()[r],
                intensity: p.intensity[r],
                fetal_sensitive_intensity: p.fetal_sensitive[r],
                fetal_sensitivity: p.sensitivity[r],
            });
        }
    }
    Ok(out)
}

fn write_sensitivity(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
