//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use tfo_core::dsp::{
    demodulate, extract_epr, synthesize, ChannelAmplitudes, DemodConfig, LockIn, PhysioParams, RateSeries,
    SynthConfig, FS_DEMOD,
};
use tfo_core::features::NUM_SELECTED;
use tfo_core::replay::SweepContext;

use crate::checkpoint::{self, Checkpoint, Header};
use crate::config::{Config, FeatureKind, NoiseScenario};
use crate::dataset_io::{read_dataset, write_dataset, Columns};
use crate::error::{bail, Error, Result};
use crate::experiment::{design, random_split_trial, summarize, temporal_trials, Trial};
use crate::metrics::evaluate_with_p;
use crate::parallel;
use crate::pipeline::{run_pipeline, scenario_name, table_file, Options};
use crate::report::{build_report, read_metrics, write_metrics, write_report, MetricRow};
use crate::table_io::{read_table, write_table, write_table_csv};
use crate::waveform_io::{read_waveform, write_waveform, Waveform};

#[derive(Debug, Parser)]
#[command(name = "tfo", version, about = "Transabdominal fetal oximetry simulation and estimation")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Experiment configuration (TOML); the built-in profile when omitted.
    #[arg(long, alias = "grid")]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<Config> {
        match &self.config {
            Some(p) => Config::load(p),
            None => Ok(Config::default_profile()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one pathlength table.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        wavelength: f64,
        /// Maternal wall thickness, mm (default: the first configured value).
        #[arg(long)]
        d_m: Option<f64>,
        #[arg(long)]
        photons: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the rows as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Replay tables over the hemodynamic grid into a feature dataset.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Directory holding `dm<d_m>_wl<nm>.tfop` tables for every configured geometry.
        #[arg(long)]
        tables: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Add photodetector noise to a dataset.
    Noise {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long = "in")]
        input: PathBuf,
        /// `shot` or `combined`.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// PPG waveform synthesis and extraction.
    Ppg {
        #[command(subcommand)]
        step: PpgStep,
    },
    /// Train an estimator on a dataset.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        data: PathBuf,
        /// `epr` or `ror`.
        #[arg(long)]
        features: Option<String>,
        /// `random` (per-geometry split) or `temporal` (needs `round` and `time` columns).
        #[arg(long, default_value = "random")]
        cv: String,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Score a trained model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Label for the metrics row.
        #[arg(long, default_value = "none")]
        scenario: String,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Comparison tables from metric files.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage, reusing cached results.
    Pipeline {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        photons: Option<u64>,
        #[arg(long)]
        scenario: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PpgStep {
    /// Raw multiplexed waveforms for one dataset row.
    Synth {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 240.0)]
        duration: f64,
        /// Fetal heart rate, Hz.
        #[arg(long, default_value_t = 2.3)]
        fhr: f64,
        #[arg(long, default_value_t = 1.4)]
        mhr: f64,
        #[arg(long, default_value_t = 0.25)]
        mrr: f64,
        /// Maternal pulsation amplitude as a fraction of DC.
        #[arg(long, default_value_t = 0.02)]
        maternal_ac: f64,
        /// Respiration amplitude as a fraction of DC.
        #[arg(long, default_value_t = 0.05)]
        resp_ac: f64,
        /// Baseband noise standard deviation as a fraction of each channel's DC.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split each raw channel into its two wavelengths at 80 Hz.
    Demod {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// EPR time series of each demodulated channel.
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        /// Fetal heart rate, Hz.
        #[arg(long)]
        fhr: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    let workers = cli.workers;
    parallel::with_workers(workers, move || dispatch(cli.command, workers))?
}

fn dispatch(cmd: Command, workers: Option<usize>) -> Result<()> {
    match cmd {
        Command::Simulate { config, wavelength, d_m, photons, seed, out, csv } => {
            let cfg = config.load()?;
            let d_m = d_m.unwrap_or(cfg.d_m_values()[0]);
            let table = parallel::simulate(
                &cfg.model(d_m)?,
                wavelength,
                photons.unwrap_or(cfg.photons),
                seed.unwrap_or(cfg.seed),
            )?;
            write_table(&out, &table)?;
            if let Some(c) = csv {
                write_table_csv(&c, &table)?;
            }
            println!("{} photons detected; ring counts {:?}", table.rows().len(), table.ring_counts());
        }
        Command::Sweep { config, tables, out } => {
            let cfg = config.load()?;
            let mut rows = Vec::new();
            for d_m in cfg.d_m_values() {
                let model = cfg.model(d_m)?;
                let t = cfg
                    .wavelengths
                    .iter()
                    .map(|&wl| read_table(&tables.join(table_file(d_m, wl))))
                    .collect::<Result<Vec<_>>>()?;
                let ctx = SweepContext::new(
                    model,
                    &t.iter().collect::<Vec<_>>(),
                    &cfg.selected_rings()?,
                    cfg.extinction_table()?,
                    cfg.blood_model(),
                )?;
                rows.extend(parallel::sweep(&ctx, &cfg.hemo_grid())?.rows);
            }
            write_dataset(&out, &rows, Columns::ALL)?;
            println!("{} rows written", rows.len());
        }
        Command::Noise { config, input, scenario, seed, out } => {
            let cfg = config.load()?;
            let scenario = NoiseScenario::parse(&scenario)?;
            let mut noise = cfg.noise;
            if let Some(s) = seed {
                noise.seed = s;
            }
            let Some(nc) = noise.core_for(scenario) else { bail!(Config, "choose the shot or combined scenario") };
            let data = read_dataset(&input)?;
            if !data.columns.intensities {
                bail!(Data, "{}: noise needs the intensity columns", input.display());
            }
            let noisy = parallel::noise(&data.rows, &nc)?;
            write_dataset(&out, &noisy.rows, Columns::ALL)?;
            println!("{} rows written, {} excluded", noisy.rows.len(), noisy.excluded);
        }
        Command::Ppg { step } => ppg(step)?,
        Command::Train { config, data, features, cv, folds, seed, out, metrics } => {
            let cfg = config.load()?;
            let kind = match features {
                Some(f) => FeatureKind::parse(&f)?,
                None => cfg.training.features,
            };
            let mut training = cfg.training.clone();
            if let Some(s) = seed {
                training.seeds = vec![s];
            }
            let sdd = cfg.selected_sdd()?;
            let rows = read_dataset(&data)?.rows;
            let trials: Vec<Trial> = match cv.as_str() {
                "random" => {
                    let d = design(&rows, kind, training.smooth.then_some(&sdd))?;
                    vec![random_split_trial(&d, kind, &training, training.seeds[0])?]
                }
                "temporal" => {
                    let (rounds, times) = read_rounds(&data)?;
                    temporal_trials(&rows, &rounds, &times, kind, &training, folds, &sdd)?
                }
                other => bail!(Config, "unknown cross-validation scheme '{}'", other),
            };
            for (i, t) in trials.iter().enumerate() {
                let path = if i == 0 { out.clone() } else { sibling(&out, &format!("fold{}", i + 1)) };
                let header = Header::new(&training.mlp(kind.dim(), t.seed), kind, training.smooth);
                checkpoint::save(&path, &Checkpoint { header, model: t.model.clone() })?;
            }
            let rows: Vec<MetricRow> = trials.iter().map(|t| metric_row(t, "none")).collect();
            if let Some(m) = metrics {
                write_metrics(&m, &rows)?;
            }
            let s = summarize(&trials);
            println!("{} model(s): MAE {:.3}%, std {:.3}%, r {:.4}", s.trials, s.mae, s.err_std, s.r);
        }
        Command::Evaluate { model, data, config, scenario, metrics } => {
            let cfg = config.load()?;
            let ck = checkpoint::load(&model)?;
            let rows = read_dataset(&data)?.rows;
            let sdd = cfg.selected_sdd()?;
            let d = design(&rows, ck.header.features, ck.header.smooth.then_some(&sdd))?;
            let pred = ck.model.predict(&d.samples.x)?;
            let e = evaluate_with_p(&pred, &d.samples.y)?;
            let m = e.metrics;
            let row = MetricRow {
                features: ck.header.features,
                scenario: scenario_name(NoiseScenario::parse(&scenario)?).into(),
                seed: ck.header.seed,
                n_train: 0,
                n_val: m.n,
                mae: m.mae,
                err_std: m.err_std,
                r: m.r,
                p_value: e.p_value,
            };
            if let Some(p) = metrics {
                write_metrics(&p, &[row])?;
            }
            println!("n {}: MAE {:.3}%, std {:.3}%, r {:.4}, p {:.3e}", m.n, m.mae, m.err_std, m.r, e.p_value);
        }
        Command::Report { metrics, out } => {
            let mut rows = Vec::new();
            for m in &metrics {
                rows.extend(read_metrics(m)?);
            }
            let rep = build_report(&rows);
            write_report(&out, &rep)?;
            print!("{}", rep.markdown);
        }
        Command::Pipeline { config, out, photons, scenario } => {
            let mut cfg = config.load()?;
            if let Some(p) = photons {
                cfg.photons = p;
            }
            if let Some(s) = scenario {
                cfg.noise.scenario = NoiseScenario::parse(&s)?;
            }
            let summary = run_pipeline(&cfg, &out, &Options { workers })?;
            for s in &summary.stages {
                println!("{:?}\t{}", s.status, s.name);
            }
            println!("{} photons simulated", summary.photons_simulated);
        }
    }
    Ok(())
}

fn metric_row(t: &Trial, scenario: &str) -> MetricRow {
    let m = t.evaluation.metrics;
    MetricRow {
        features: t.kind,
        scenario: scenario.into(),
        seed: t.seed,
        n_train: t.n_train,
        n_val: m.n,
        mae: m.mae,
        err_std: m.err_std,
        r: m.r,
        p_value: t.evaluation.p_value,
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{}_{}{}", stem, suffix, ext))
}

/// `round` and `time` columns of a dataset, for temporal cross-validation.
fn read_rounds(path: &Path) -> Result<(Vec<u64>, Vec<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let head = r.headers()?.clone();
    let col = |n: &str| {
        head.iter().position(|h| h.trim() == n).ok_or_else(|| Error::Data(format!("{}: temporal split needs a '{}' column", path.display(), n)))
    };
    let (ri, ti) = (col("round")?, col("time")?);
    let (mut rounds, mut times) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let bad = |s: &str| Error::Data(format!("{}: bad value '{}'", path.display(), s));
        let rs = rec.get(ri).unwrap_or("").trim();
        let ts = rec.get(ti).unwrap_or("").trim();
        rounds.push(rs.parse().map_err(|_| bad(rs))?);
        times.push(ts.parse().map_err(|_| bad(ts))?);
    }
    Ok((rounds, times))
}

fn ppg(step: PpgStep) -> Result<()> {
    match step {
        PpgStep::Synth { input, row, duration, fhr, mhr, mrr, maternal_ac, resp_ac, noise, seed, out } => {
            let data = read_dataset(&input)?;
            if !data.columns.intensities {
                bail!(Data, "{}: synthesis needs the intensity columns", input.display());
            }
            let Some(r) = data.rows.get(row) else { bail!(Data, "row {} out of range ({} rows)", row, data.rows.len()) };
            let channels: Vec<[ChannelAmplitudes; 2]> = (0..NUM_SELECTED)
                .map(|d| {
                    core::array::from_fn(|w| {
                        let k = w * NUM_SELECTED + d;
                        let dc = r.i1[k];
                        ChannelAmplitudes::from_intensities(dc, r.i2[k], maternal_ac * dc, resp_ac * dc)
                    })
                })
                .collect();
            // One shared noise level relative to the brightest channel's DC would
            // bury the far detectors, so scale the standard deviation per record.
            let dc_min = r.i1.iter().cloned().fold(f64::INFINITY, f64::min);
            let physio = PhysioParams { fhr: RateSeries::constant(fhr), mhr, mrr, phases: [0.0, 1.0, 2.0] };
            let cfg = SynthConfig { duration, noise_std: noise * dc_min, seed, ..SynthConfig::default() };
            let rec = synthesize(&channels, &physio, &cfg)?;
            write_waveform(&out, &Waveform::new(rec.fs_raw, rec.raw)?)?;
        }
        PpgStep::Demod { input, out } => {
            let raw = read_waveform(&input)?;
            let cfg = DemodConfig { fs_raw: raw.fs, ..DemodConfig::default() };
            let split = raw.channels.par_iter().map(|c| demodulate(c, &cfg)).collect::<tfo_core::Result<Vec<_>>>()?;
            let channels = split.into_iter().flat_map(|[a, b]| [a, b]).collect();
            write_waveform(&out, &Waveform::new(cfg.fs_out, channels)?)?;
        }
        PpgStep::Extract { input, fhr, out } => {
            let demod = read_waveform(&input)?;
            if (demod.fs - FS_DEMOD).abs() > 1e-9 {
                log::warn!("input rate {} Hz differs from the expected {} Hz", demod.fs, FS_DEMOD);
            }
            let lock = LockIn { fs: demod.fs, ..LockIn::default() };
            let rate = RateSeries::constant(fhr);
            let series = demod
                .channels
                .par_iter()
                .map(|c| extract_epr(c, &rate, &lock))
                .collect::<tfo_core::Result<Vec<_>>>()?;
            for (i, s) in series.iter().enumerate() {
                println!("channel {}: mean EPR {:.6}", i + 1, s.series.mean());
            }
            let n = series.iter().map(|s| s.series.epr.len()).min().unwrap_or(0);
            if n == 0 {
                bail!(Data, "record too short to extract an EPR series");
            }
            let channels = series.into_iter().map(|s| s.series.epr[..n].to_vec()).collect();
            write_waveform(&out, &Waveform::new(demod.fs, channels)?)?;
        }
    }
    Ok(())
}
