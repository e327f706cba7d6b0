//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N ... PASS|FAIL` line straight to stderr so the lines show up
//! even when output capture is on.

mod common;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Instant;

use tfo::config::{Axis, Config, FeatureKind, NoiseScenario};
use tfo::experiment::{random_split_trials, summarize};
use tfo::parallel;
use tfo::pipeline::{reference_hemodynamics, run_pipeline, sensitivity_rows, table_file, Options};
use tfo::table_io::{read_table, write_table};
use tfo::tfo_core::dsp::{
    demodulate, extract_epr, lock_in, synthesize, ChannelAmplitudes, DemodConfig, LockIn, PhysioParams, RateSeries,
    SynthConfig,
};
use tfo::tfo_core::features::{EPR_DIM, NUM_SELECTED};
use tfo::tfo_core::mlp::train::Verdict;
use tfo::tfo_core::mlp::{
    gradcheck, nudge_from_kinks, random_split, temporal_cv, train, EarlyStopping, Mlp, MlpConfig, Mode, Regressor,
    Samples,
};
use tfo::tfo_core::noise::{NoiseConfig, Scenario};
use tfo::tfo_core::replay::{replay_intensity, FeatureRow, SweepContext};
use tfo::tfo_core::rng::{Domain, RngStream};
use tfo::tfo_core::stats::spearman;
use tfo::tfo_core::tissue::{AbsorptionVector, Hemodynamics, NUM_LAYERS};
use tfo::tfo_core::transport::{PathlengthTable, Transport};

const DEPTHS: [f64; 3] = [4.0, 5.0, 6.0];
const FIXTURE_PHOTONS: u64 = 10_000_000;
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn verdict(n: u32, name: &str, start: Instant, result: Result<String, String>) {
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    let line = format!("criterion {n:>2} {name}: {tag} ({detail}; {secs:.1} s)\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(d) = result {
        panic!("criterion {n} failed: {d}");
    }
}

fn check(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Three shallow geometries at full photon count and a grid of about 2000 points.
fn fixture_config() -> Config {
    let mut cfg = Config::default_profile();
    cfg.photons = FIXTURE_PHOTONS;
    cfg.geometry.d_m = Axis::Values(DEPTHS.to_vec());
    cfg.grid.s_f = Axis::Range { start: 0.1, stop: 0.9, count: 25 };
    cfg.training.seeds = SEEDS.to_vec();
    cfg
}

struct Fixture {
    cfg: Config,
    /// `tables[depth][wavelength]`.
    tables: Vec<Vec<PathlengthTable>>,
    contexts: Vec<SweepContext>,
    clean: Vec<FeatureRow>,
    invalid: usize,
    seconds: f64,
}

/// Fixture tables are kept under the cargo target directory between runs,
/// keyed by model fingerprint, photon count, and seed. Delete `acceptance-tables` to rebuild them.
fn cached_table(cfg: &Config, d_m: f64, wl: f64) -> PathlengthTable {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-tables");
    std::fs::create_dir_all(&dir).unwrap();
    let model = cfg.model(d_m).unwrap();
    let path = dir.join(format!("{:016x}_{}_{}_{}", model.fingerprint(), cfg.photons, cfg.seed, table_file(d_m, wl)));
    if let Ok(t) = read_table(&path) {
        let m = t.meta();
        if m.model_hash == model.fingerprint() && m.n_launched == cfg.photons && m.seed == cfg.seed && m.wavelength == wl {
            return t;
        }
    }
    let t = parallel::simulate(&model, wl, cfg.photons, cfg.seed).unwrap();
    write_table(&path, &t).unwrap();
    t
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let start = Instant::now();
        let cfg = fixture_config();
        let mut tables = Vec::new();
        let mut contexts = Vec::new();
        let mut clean = Vec::new();
        let mut invalid = 0;
        for d_m in cfg.d_m_values() {
            let model = cfg.model(d_m).unwrap();
            let t: Vec<PathlengthTable> = cfg.wavelengths.iter().map(|&wl| cached_table(&cfg, d_m, wl)).collect();
            let ctx = SweepContext::new(
                model,
                &t.iter().collect::<Vec<_>>(),
                &cfg.selected_rings().unwrap(),
                cfg.extinction_table().unwrap(),
                cfg.blood_model(),
            )
            .unwrap();
            let out = parallel::sweep(&ctx, &cfg.hemo_grid()).unwrap();
            clean.extend(out.rows);
            invalid += out.invalid;
            tables.push(t);
            contexts.push(ctx);
        }
        Fixture { cfg, tables, contexts, clean, invalid, seconds: start.elapsed().as_secs_f64() }
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_mae(rows: &[FeatureRow], kind: FeatureKind, cfg: &Config) -> f64 {
    let trials = random_split_trials(rows, kind, &cfg.training, &cfg.selected_sdd().unwrap()).unwrap();
    assert_eq!(trials.len(), SEEDS.len());
    summarize(&trials).mae
}

#[test]
fn criterion_01_replay_matches_the_simulation_tally() {
    let start = Instant::now();
    let cfg = Config::default_profile();
    let model = cfg.model(4.0).unwrap();
    let table = parallel::simulate(&model, 735.0, 1_000_000, 7).unwrap();
    let mu = Transport::new(&model, 735.0).unwrap().generating_mu_a();
    let replay = replay_intensity(&table, &mu).unwrap();
    let mut worst: f64 = 0.0;
    for (r, t) in replay.iter().zip(table.sim_tally()) {
        if *t != 0.0 {
            worst = worst.max((r - t).abs() / t.abs());
        } else {
            worst = worst.max(r.abs());
        }
    }

    // A 100-row table against a straightforward recomputation.
    let small = PathlengthTable::from_parts(
        *table.meta(),
        table.num_rings(),
        table.rows()[..100].to_vec(),
        vec![0.0; table.num_rings()],
    )
    .unwrap();
    let mut rng = RngStream::new(5, Domain::Split, 1);
    let mut exact = true;
    for _ in 0..20 {
        let m: [f64; NUM_LAYERS] = std::array::from_fn(|_| 0.05 * rng.uniform());
        let got = replay_intensity(&small, &AbsorptionVector(m)).unwrap();
        let mut want = vec![0.0; table.num_rings()];
        for row in small.rows() {
            let l = row.pathlengths;
            let s = m[0] * l[0] + m[1] * l[1] + m[2] * l[2] + m[3] * l[3];
            want[row.detector.unwrap() as usize] += libm::exp(-s);
        }
        let n = small.meta().n_launched as f64;
        exact &= got.iter().zip(&want).all(|(g, w)| *g == w / n);
    }
    let secs = start.elapsed().as_secs();
    verdict(
        1,
        "replay correctness",
        start,
        check(
            worst <= 1e-12 && exact && secs < 60,
            format!("max relative tally deviation {worst:.2e}, 100-row recomputation exact: {exact}"),
        ),
    );
}

#[test]
fn criterion_02_beer_lambert_structure() {
    let start = Instant::now();
    let cfg = common::tiny_config();
    let tables: Vec<PathlengthTable> = [(4.0, 735.0, 1), (5.0, 850.0, 2), (4.0, 850.0, 3)]
        .iter()
        .map(|&(d, wl, seed)| parallel::simulate(&cfg.model(d).unwrap(), wl, 20_000, seed).unwrap())
        .collect();
    // Per table, ring, and layer: does any photon in the ring cross the layer?
    let visits: Vec<Vec<[f64; NUM_LAYERS]>> = tables
        .iter()
        .map(|t| {
            let mut v = vec![[0.0; NUM_LAYERS]; t.num_rings()];
            for row in t.rows() {
                for j in 0..NUM_LAYERS {
                    v[row.detector.unwrap() as usize][j] += row.pathlengths[j];
                }
            }
            v
        })
        .collect();
    let mut rng = RngStream::new(11, Domain::Split, 2);
    let slack = 1e-12;
    let (mut mono_bad, mut convex_bad, mut checks) = (0, 0, 0);
    for ray in 0..1000 {
        let t = &tables[ray % tables.len()];
        let a: [f64; NUM_LAYERS] = std::array::from_fn(|_| 0.05 * rng.uniform());
        let b: [f64; NUM_LAYERS] = std::array::from_fn(|_| 0.05 * rng.uniform());
        let m: [f64; NUM_LAYERS] = std::array::from_fn(|j| 0.5 * (a[j] + b[j]));
        let ia = replay_intensity(t, &AbsorptionVector(a)).unwrap();
        let ib = replay_intensity(t, &AbsorptionVector(b)).unwrap();
        let im = replay_intensity(t, &AbsorptionVector(m)).unwrap();
        for r in 0..t.num_rings() {
            if t.ring_counts()[r] == 0 {
                continue;
            }
            checks += 1;
            if im[r].ln() > 0.5 * (ia[r].ln() + ib[r].ln()) + slack {
                convex_bad += 1;
            }
        }
        for j in 0..NUM_LAYERS {
            let mut up = a;
            up[j] += 1e-3;
            let iu = replay_intensity(t, &AbsorptionVector(up)).unwrap();
            for r in 0..t.num_rings() {
                if t.ring_counts()[r] == 0 {
                    continue;
                }
                let crosses = visits[ray % tables.len()][r][j] > 1e-6;
                let ok = if crosses { iu[r] < ia[r] } else { iu[r] <= ia[r] * (1.0 + slack) };
                if !ok {
                    mono_bad += 1;
                }
            }
        }
    }
    verdict(
        2,
        "Beer-Lambert structure",
        start,
        check(
            mono_bad == 0 && convex_bad == 0,
            format!("1000 rays, {checks} ring checks: {mono_bad} monotonicity and {convex_bad} convexity violations"),
        ),
    );
}

#[test]
fn criterion_03_fetal_sensitivity_saturates_with_distance() {
    let f = fixture();
    let start = Instant::now();
    let d = 0;
    let model = f.contexts[d].model();
    let rows = sensitivity_rows(&f.cfg, model, &f.tables[d]).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for &wl in &f.cfg.wavelengths {
        let ring: Vec<_> = rows.iter().filter(|r| r.wavelength == wl && r.fetal_sensitivity.is_some()).collect();
        let sdd: Vec<f64> = ring.iter().map(|r| r.sdd).collect();
        let fs: Vec<f64> = ring.iter().map(|r| r.fetal_sensitivity.unwrap()).collect();
        let rho = spearman(&sdd, &fs).unwrap();
        let last = rows.iter().filter(|r| r.wavelength == wl).last().unwrap();
        let frac = last.fetal_sensitive_intensity / last.intensity;
        ok &= rho >= 0.95 && frac >= 0.99 && ring.len() == model.rings().len();
        details.push(format!("{wl} nm: Spearman {rho:.3}, fetal-sensitive fraction at {} mm {frac:.4}", last.sdd));
    }
    verdict(
        3,
        "sensitivity behavior",
        start,
        check(
            ok,
            format!("fetal depth {} mm, {} photons; {}", model.fetal_depth(), FIXTURE_PHOTONS, details.join("; ")),
        ),
    );
}

#[test]
fn criterion_04_epr_is_at_least_one() {
    let f = fixture();
    let start = Instant::now();
    let below = f.clean.iter().flat_map(|r| r.features.epr).filter(|e| !(*e >= 1.0)).count();
    let min = f.clean.iter().flat_map(|r| r.features.epr).fold(f64::INFINITY, f64::min);
    let expected = f.cfg.hemo_grid().len() * DEPTHS.len();
    verdict(
        4,
        "EPR sign",
        start,
        check(
            below == 0 && f.invalid == 0 && f.clean.len() == expected,
            format!("{} rows, {} features below 1, minimum EPR {min:.6}", f.clean.len(), below),
        ),
    );
}

#[test]
fn criterion_05_saturation_geometry_ambiguity() {
    let f = fixture();
    let start = Instant::now();
    let base = reference_hemodynamics(&f.cfg);
    let mut points = Vec::new();
    for (d, ctx) in f.contexts.iter().enumerate() {
        for s_f in [0.2, 0.4, 0.6] {
            let hemo = Hemodynamics { s_f, ..base };
            let row = ctx.point(&hemo).unwrap().expect("selected rings are lit");
            points.push((DEPTHS[d], s_f, row.features.epr));
        }
    }
    // Smallest single-ring gap relative to the 5-ring distance, over pairs
    // with different saturations.
    let mut best = (f64::INFINITY, String::new());
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.1 == b.1 {
                continue;
            }
            for w in 0..EPR_DIM / NUM_SELECTED {
                let ea = &a.2[w * NUM_SELECTED..(w + 1) * NUM_SELECTED];
                let eb = &b.2[w * NUM_SELECTED..(w + 1) * NUM_SELECTED];
                let full = ea.iter().zip(eb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                for r in 0..NUM_SELECTED {
                    let ratio = (ea[r] - eb[r]).abs() / full;
                    if ratio < best.0 {
                        best = (
                            ratio,
                            format!("d_m {} s_f {} vs d_m {} s_f {}, wavelength {} ring {}", a.0, a.1, b.0, b.1, w + 1, r + 1),
                        );
                    }
                }
            }
        }
    }
    verdict(
        5,
        "saturation-geometry ambiguity",
        start,
        check(best.0 < 0.1, format!("closest single-ring collision {:.4} of the 5-ring distance ({})", best.0, best.1)),
    );
}

#[test]
fn criterion_06_epr_features_beat_ratio_of_ratios() {
    let f = fixture();
    let start = Instant::now();
    let epr = mean_mae(&f.clean, FeatureKind::Epr, &f.cfg);
    let ror = mean_mae(&f.clean, FeatureKind::Ror, &f.cfg);
    verdict(
        6,
        "EPR vs RoR",
        start,
        check(
            epr <= ror && epr <= 10.0,
            format!(
                "{} rows, {} seeds: EPR MAE {epr:.3}%, RoR MAE {ror:.3}% (tables took {:.0} s)",
                f.clean.len(),
                SEEDS.len(),
                f.seconds
            ),
        ),
    );
}

#[test]
fn criterion_07_noise_model() {
    let start = Instant::now();
    const Q: f64 = 1.602_176_634e-19;
    const K: f64 = 1.380_649e-23;
    let base = NoiseConfig {
        bandwidth: 40.0,
        temperature: 300.0,
        resistance: 1e6,
        responsivity: 0.6,
        source_power: 1e-3,
        scenario: Scenario::ShotOnly,
        seed: 0,
    };
    let mut sigma_ok = true;
    let mut worst: f64 = 0.0;
    for scenario in [Scenario::ShotOnly, Scenario::ShotAndMeasurement] {
        let cfg = NoiseConfig { scenario, ..base };
        for (k, power) in [2e-6, 1e-9, 6e-13].into_iter().enumerate() {
            let gain = if scenario == Scenario::ShotOnly { 1.0 } else { 3.0 };
            let mut rng = RngStream::new(1, Domain::Noise, 1000 + k as u64);
            let draws: Vec<f64> = (0..100_000).map(|_| cfg.inject(power, gain, &mut rng) / gain - power).collect();
            let m = mean(&draws);
            let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
            let i = cfg.responsivity * power;
            let mut var = 2.0 * Q * i * cfg.bandwidth;
            if scenario == Scenario::ShotAndMeasurement {
                var += 4.0 * K * cfg.temperature * cfg.bandwidth / cfg.resistance;
            }
            let analytic = var.sqrt() / cfg.responsivity;
            let rel = (sd / analytic - 1.0).abs();
            worst = worst.max(rel);
            sigma_ok &= rel < 0.05;
        }
    }

    let f = fixture();
    let mut mae = Vec::new();
    let mut excluded = Vec::new();
    for scenario in [NoiseScenario::None, NoiseScenario::Shot, NoiseScenario::Combined] {
        let rows = match f.cfg.noise.core_for(scenario) {
            None => f.clean.clone(),
            Some(nc) => {
                let noisy = parallel::noise(&f.clean, &nc).unwrap();
                excluded.push(noisy.excluded);
                noisy.rows
            }
        };
        mae.push(mean_mae(&rows, FeatureKind::Epr, &f.cfg));
    }
    verdict(
        7,
        "noise model",
        start,
        check(
            sigma_ok && mae[2] >= mae[1] && mae[1] >= mae[0],
            format!(
                "worst sigma deviation {:.2}%; EPR MAE clean {:.3}%, shot {:.3}%, shot + measurement {:.3}% ({:?} rows excluded)",
                100.0 * worst,
                mae[0],
                mae[1],
                mae[2],
                excluded
            ),
        ),
    );
}

#[test]
fn criterion_08_dsp_roundtrip() {
    let start = Instant::now();
    // Channel intensities of a replayed sample across the five detectors.
    let cfg = common::tiny_config();
    let model = cfg.model(4.0).unwrap();
    let tables: Vec<PathlengthTable> =
        cfg.wavelengths.iter().map(|&wl| parallel::simulate(&model, wl, 200_000, 4).unwrap()).collect();
    let ctx = SweepContext::new(
        model,
        &tables.iter().collect::<Vec<_>>(),
        &cfg.selected_rings().unwrap(),
        cfg.extinction_table().unwrap(),
        cfg.blood_model(),
    )
    .unwrap();
    let row = ctx.point(&Hemodynamics::new(130.0, 0.95, 150.0, 0.5).unwrap()).unwrap().unwrap();
    let channels: Vec<[ChannelAmplitudes; 2]> = (0..NUM_SELECTED)
        .map(|d| {
            std::array::from_fn(|w| {
                let k = w * NUM_SELECTED + d;
                let dc = row.i1[k];
                ChannelAmplitudes::from_intensities(dc, row.i2[k], 0.02 * dc, 0.05 * dc)
            })
        })
        .collect();
    let fhr = RateSeries { fs: 0.1, hz: vec![2.2, 2.4, 2.6, 2.3, 2.1, 2.5, 2.4, 2.2, 2.3, 2.4, 2.5, 2.3, 2.2] };
    let physio = PhysioParams { fhr: fhr.clone(), mhr: 1.3, mrr: 0.25, phases: [0.4, 1.1, 2.0] };
    let rec = synthesize(&channels, &physio, &SynthConfig { duration: 120.0, ..SynthConfig::default() }).unwrap();
    let (mut epr_err, mut pulse_err): (f64, f64) = (0.0, 0.0);
    for (d, raw) in rec.raw.iter().enumerate() {
        for (w, x) in demodulate(raw, &DemodConfig::default()).unwrap().iter().enumerate() {
            let got = extract_epr(x, &fhr, &LockIn::default()).unwrap().series.mean();
            let want = row.features.epr[w * NUM_SELECTED + d];
            epr_err = epr_err.max((got / want - 1.0).abs());
            pulse_err = pulse_err.max(((got - 1.0) / (want - 1.0) - 1.0).abs());
        }
    }

    // Lock-in on a pure sine.
    let (a, f0, fs) = (0.013, 2.3, 80.0);
    let x: Vec<f64> =
        (0..(fs * 120.0) as usize).map(|i| 1.0 + a * (std::f64::consts::TAU * f0 * i as f64 / fs + 0.7).sin()).collect();
    let out = lock_in(&x, &RateSeries::constant(f0), &LockIn::default()).unwrap();
    let kept = &out.amplitude[out.settle..x.len() - out.settle];
    let sine_err = kept.iter().map(|v| (v / a - 1.0).abs()).fold(0.0, f64::max);

    // Crosstalk: light on one wavelength only.
    let on = ChannelAmplitudes { dc: 1.0, fetal_ac: 0.01, maternal_ac: 0.02, resp_ac: 0.01 };
    let off = ChannelAmplitudes::default();
    let mut crosstalk: f64 = 0.0;
    for pair in [[on, off], [off, on]] {
        let rec = synthesize(&[pair], &physio, &SynthConfig { duration: 60.0, ..SynthConfig::default() }).unwrap();
        let [w1, w2] = demodulate(&rec.raw[0], &DemodConfig::default()).unwrap();
        let (lit, dark) = if pair[0].dc > 0.0 { (w1, w2) } else { (w2, w1) };
        let edge = 160;
        let level = mean(&lit[edge..lit.len() - edge]);
        let leak = dark[edge..dark.len() - edge].iter().map(|v| v.abs()).fold(0.0, f64::max);
        crosstalk = crosstalk.max(leak / level);
    }
    verdict(
        8,
        "DSP roundtrip",
        start,
        check(
            epr_err < 0.02 && pulse_err < 0.1 && sine_err < 0.01 && crosstalk < 0.01,
            format!(
                "EPR error {:.4}% (of the pulsation {:.2}%), sine amplitude error {:.4}%, crosstalk {:.4}%",
                100.0 * epr_err,
                100.0 * pulse_err,
                100.0 * sine_err,
                100.0 * crosstalk
            ),
        ),
    );
}

#[test]
fn criterion_09_estimator() {
    let start = Instant::now();
    let mut rng = RngStream::new(3, Domain::Split, 9);
    let mut normals = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.normal()).collect() };

    // Gradient check on a batch-normalized network.
    let cfg = MlpConfig { first_hidden: 16, init_std: 0.5, seed: 4, ..MlpConfig::new(10) };
    let mut m = Mlp::new(&cfg).unwrap();
    let (x, y) = (normals(12 * 10), normals(12));
    let w = vec![1.0; 12];
    nudge_from_kinks(&mut m, &x, 12, Mode::Train, 1e-3);
    let mut grad_err: f64 = 0.0;
    for mode in [Mode::Eval, Mode::Train] {
        grad_err = grad_err.max(gradcheck(&m, &x, &y, &w, mode, None).unwrap().max_rel_error);
    }

    // Linear regression target.
    let x = normals(1000 * 10);
    let coef: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) / 5.0).collect();
    let y: Vec<f64> = x.chunks(10).map(|r| r.iter().zip(&coef).map(|(a, b)| a * b).sum()).collect();
    let range = y.iter().cloned().fold(f64::MIN, f64::max) - y.iter().cloned().fold(f64::MAX, f64::min);
    let data = Samples::new(10, x, y).unwrap();
    let (tr, va) = random_split(1000, 0.8, 2).unwrap();
    let val = data.select(&va);
    let (model, _) = Regressor::fit(&MlpConfig { seed: 11, ..MlpConfig::new(10) }, &data.select(&tr), &val).unwrap();
    let pred = model.predict(&val.x).unwrap();
    let lin_mae = pred.iter().zip(&val.y).map(|(p, t)| (p - t).abs()).sum::<f64>() / val.len() as f64 / range;

    // Early stopping: patience 25 from a best first epoch stops at epoch 26.
    let mut s = EarlyStopping::new(25);
    let mut stopped = None;
    let mut first = s.observe(1, 1.0) == Verdict::Improved;
    for epoch in 2..=300 {
        if s.observe(epoch, 1.0 + epoch as f64) == Verdict::Stop {
            stopped = Some(epoch);
            break;
        }
    }
    first &= s.best_epoch == 1;
    let cfg = MlpConfig { first_hidden: 8, max_epochs: 200, patience: 5, seed: 2, ..MlpConfig::new(4) };
    let noise = Samples::new(4, normals(120 * 4), normals(120)).unwrap();
    let (tr, va) = random_split(120, 0.8, 3).unwrap();
    let mut net = Mlp::new(&cfg).unwrap();
    let h = train(&mut net, &cfg, &noise.select(&tr), &noise.select(&va)).unwrap();
    let best = h.epochs.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
    let restored = tfo::tfo_core::mlp::train::evaluate_loss(&net, &noise.select(&va)).unwrap().0;
    let stopping_ok = first
        && stopped == Some(26)
        && h.epochs.len() < cfg.max_epochs
        && h.epochs.len() == h.best_epoch + cfg.patience
        && restored == best;

    // Folds partition every round.
    let sizes = [7usize, 12, 30, 5];
    let rounds: Vec<u64> = sizes.iter().enumerate().flat_map(|(r, &n)| vec![r as u64; n]).collect();
    let times: Vec<f64> = (0..rounds.len()).map(|i| ((i * 37) % 101) as f64).collect();
    let cv = temporal_cv(&rounds, &times, 5).unwrap();
    let mut seen = vec![0usize; rounds.len()];
    let mut folds_ok = cv.folds.len() == 5 && cv.excluded_rounds.is_empty();
    for fold in &cv.folds {
        let mut all: Vec<usize> = fold.train.iter().chain(&fold.val).copied().collect();
        all.sort();
        folds_ok &= all == (0..rounds.len()).collect::<Vec<_>>();
        for &i in &fold.val {
            seen[i] += 1;
        }
        let mut per_round: BTreeMap<u64, f64> = BTreeMap::new();
        for (i, w) in fold.train.iter().zip(&fold.train_weights) {
            *per_round.entry(rounds[*i]).or_default() += w;
        }
        folds_ok &= per_round.values().all(|w| (w - 1.0).abs() < 1e-12);
    }
    folds_ok &= seen.iter().all(|&c| c == 1);

    verdict(
        9,
        "estimator",
        start,
        check(
            grad_err < 1e-4 && lin_mae < 0.01 && stopping_ok && folds_ok,
            format!(
                "gradcheck {grad_err:.2e}, linear MAE {:.3}% of range, early stopping {stopping_ok}, folds {folds_ok}",
                100.0 * lin_mae
            ),
        ),
    );
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let mut cfg = common::tiny_config();
    cfg.noise.scenario = NoiseScenario::Combined;
    cfg.training.seeds = vec![0, 1];
    let runs: Vec<_> = [Some(1), Some(1), Some(3), None]
        .into_iter()
        .map(|workers| {
            let dir = tempfile::tempdir().unwrap();
            run_pipeline(&cfg, dir.path(), &Options { workers }).unwrap();
            snapshot(dir.path())
        })
        .collect();
    let files = runs[0].len();
    let pipeline_same = runs.iter().all(|r| *r == runs[0]);

    let ch = ChannelAmplitudes { dc: 1.0, fetal_ac: 0.01, maternal_ac: 0.02, resp_ac: 0.01 };
    let physio = PhysioParams { fhr: RateSeries::constant(2.2), mhr: 1.3, mrr: 0.25, phases: [0.0, 1.0, 2.0] };
    let dsp = || {
        let rec = synthesize(&[[ch, ch]], &physio, &SynthConfig { duration: 100.0, noise_std: 0.01, seed: 5, ..SynthConfig::default() })
            .unwrap();
        let [x, _] = demodulate(&rec.raw[0], &DemodConfig::default()).unwrap();
        extract_epr(&x, &physio.fhr, &LockIn::default()).unwrap()
    };
    let dsp_same = dsp() == dsp();
    verdict(
        10,
        "determinism",
        start,
        check(
            pipeline_same && dsp_same,
            format!("{files} pipeline files identical over 2 reruns and 1/3/default workers: {pipeline_same}; DSP chain: {dsp_same}"),
        ),
    );
}
