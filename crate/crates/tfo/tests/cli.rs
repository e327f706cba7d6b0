mod common;

use std::ffi::OsString;
use std::path::Path;
use std::process::Output;

use common::tfo_bin;
use tfo::pipeline::table_file;

macro_rules! argv {
    ($($a:expr),* $(,)?) => { vec![$(OsString::from($a)),*] };
}

fn run(args: &[OsString]) -> Output {
    let out = tfo_bin().args(args).env("RUST_LOG", "warn").output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn code(args: &[OsString]) -> i32 {
    run(args).status.code().unwrap()
}

#[test]
fn exit_codes_distinguish_usage_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&argv!["--help"]), 0);
    assert_eq!(code(&argv!["no-such-command"]), 2);
    assert_eq!(code(&argv!["simulate", "--wavelength", "735"]), 2);

    let bad = d.join("bad.toml");
    std::fs::write(&bad, "format_version = 99\n").unwrap();
    assert_eq!(code(&argv!["pipeline", "--config", &bad, "--out", d]), 2);
    assert_eq!(code(&argv!["pipeline", "--config", "/nonexistent.toml", "--out", d]), 2);
    assert_eq!(code(&argv!["noise", "--in", "x.csv", "--scenario", "loud", "--out", "y.csv"]), 2);

    let garbage = d.join("data.csv");
    std::fs::write(&garbage, "not,a,dataset\n1,2,3\n").unwrap();
    assert_eq!(code(&argv!["train", "--data", &garbage, "--out", d.join("m.bin")]), 3);
    assert_eq!(code(&argv!["evaluate", "--model", "/nonexistent.bin", "--data", &garbage]), 3);
}

#[test]
fn stage_commands_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let cfg = common::tiny_config();
    let config = p("tiny.toml");
    std::fs::write(&config, cfg.to_toml()).unwrap();
    std::fs::create_dir(p("tables")).unwrap();

    for d_m in cfg.d_m_values() {
        for wl in &cfg.wavelengths {
            let out = p("tables").join(table_file(d_m, *wl));
            let args = argv!["simulate", "--config", &config, "--wavelength", wl.to_string(), "--d-m", d_m.to_string(), "--out", out];
            assert_eq!(code(&args), 0);
        }
    }
    assert_eq!(code(&argv!["sweep", "--config", &config, "--tables", p("tables"), "--out", p("clean.csv")]), 0);
    let noise = argv!["noise", "--config", &config, "--in", p("clean.csv"), "--scenario", "combined", "--out", p("noisy.csv")];
    assert_eq!(code(&noise), 0);

    for kind in ["epr", "ror"] {
        let train = argv![
            "train", "--config", &config, "--data", p("clean.csv"), "--features", kind,
            "--out", p(&format!("{kind}.bin")), "--metrics", p(&format!("m_{kind}.csv")),
        ];
        assert_eq!(code(&train), 0);
    }
    let eval = argv![
        "evaluate", "--config", &config, "--model", p("epr.bin"), "--data", p("noisy.csv"),
        "--scenario", "combined", "--metrics", p("m_noisy.csv"),
    ];
    assert_eq!(code(&eval), 0);

    let report = run(&argv!["report", "--metrics", p("m_epr.csv"), p("m_ror.csv"), p("m_noisy.csv"), "--out", p("report")]);
    assert!(report.status.success());
    let md = std::fs::read_to_string(p("report/report.md")).unwrap();
    assert!(md.contains("| MAE (%) |"));
    assert!(p("report/comparison.csv").is_file());
}

#[test]
fn temporal_cross_validation_saves_one_model_per_fold() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let config = p("tiny.toml");
    std::fs::write(&config, common::tiny_config().to_toml()).unwrap();
    assert_eq!(code(&argv!["pipeline", "--config", &config, "--out", p("run")]), 0);

    let clean = std::fs::read_to_string(p("run/datasets/clean.csv")).unwrap();
    let mut lines = clean.lines();
    let mut text = format!("{},round,time\n", lines.next().unwrap());
    for (i, l) in lines.enumerate() {
        text += &format!("{},{},{}\n", l, i % 3, i);
    }
    std::fs::write(p("rounds.csv"), text).unwrap();
    let args = argv![
        "train", "--config", &config, "--data", p("rounds.csv"), "--cv", "temporal", "--folds", "3",
        "--out", p("t.bin"), "--metrics", p("t.csv"),
    ];
    assert_eq!(code(&args), 0);
    for f in ["t.bin", "t_fold2.bin", "t_fold3.bin"] {
        assert!(p(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_to_string(p("t.csv")).unwrap().lines().count(), 4);

    let missing = argv!["train", "--config", &config, "--data", p("run/datasets/clean.csv"), "--cv", "temporal", "--out", p("u.bin")];
    assert_eq!(code(&missing), 3);
}

#[test]
fn ppg_commands_recover_the_dataset_epr() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    let config = p("tiny.toml");
    std::fs::write(&config, common::tiny_config().to_toml()).unwrap();
    assert_eq!(code(&argv!["pipeline", "--config", &config, "--out", p("run")]), 0);
    let data = p("run/datasets/clean.csv");
    let row = tfo::dataset_io::read_dataset(&data).unwrap().rows[5];

    assert_eq!(code(&argv!["ppg", "synth", "--in", &data, "--row", "5", "--duration", "150", "--out", p("raw.bin")]), 0);
    assert_eq!(code(&argv!["ppg", "demod", "--in", p("raw.bin"), "--out", p("demod.bin")]), 0);
    assert_eq!(code(&argv!["ppg", "extract", "--in", p("demod.bin"), "--fhr", "2.3", "--out", p("epr.csv")]), 0);

    let raw = tfo::waveform_io::read_waveform(&p("raw.bin")).unwrap();
    assert_eq!((raw.fs, raw.channels.len(), raw.samples()), (8000.0, 5, 1_200_000));
    let demod = tfo::waveform_io::read_waveform(&p("demod.bin")).unwrap();
    assert_eq!((demod.fs, demod.channels.len()), (80.0, 10));
    let epr = tfo::waveform_io::read_waveform(&p("epr.csv")).unwrap();
    assert_eq!(epr.channels.len(), 10);
    // Demodulated channel 2d + w is detector d at wavelength w.
    for d in 0..5 {
        for w in 0..2 {
            let series = &epr.channels[2 * d + w];
            let mean = series.iter().sum::<f64>() / series.len() as f64;
            let want = row.features.epr[w * 5 + d];
            assert!(((mean - 1.0) / (want - 1.0) - 1.0).abs() < 0.1, "detector {d} wavelength {w}: {mean} vs {want}");
        }
    }
}

#[test]
fn smoke_profile_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml");
    let out = run(&argv!["pipeline", "--config", config, "--photons", "200000", "--out", dir.path()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("800000 photons simulated"), "{stdout}");
    let metrics = tfo::report::read_metrics(&dir.path().join("metrics/metrics_combined.csv")).unwrap();
    assert_eq!(metrics.len(), 2);
    assert!(metrics.iter().all(|m| m.mae.is_finite() && m.n_val > 0));
    let md = std::fs::read_to_string(dir.path().join("report/report.md")).unwrap();
    assert!(md.contains("Shot + measurement noise"));
}
