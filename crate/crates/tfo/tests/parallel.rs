mod common;

use tfo::parallel;
use tfo::tfo_core::noise::apply_noise;
use tfo::tfo_core::replay::{sweep, SweepContext};
use tfo::tfo_core::transport::simulate;

#[test]
fn simulation_matches_the_serial_driver_for_any_worker_count() {
    let cfg = common::tiny_config();
    let model = cfg.model(5.0).unwrap();
    let serial = simulate(&model, 850.0, 9_000, 11).unwrap();
    for w in [1, 2, 3] {
        let par = parallel::with_workers(Some(w), || parallel::simulate(&model, 850.0, 9_000, 11)).unwrap().unwrap();
        assert_eq!(par, serial, "{w} workers");
    }
}

#[test]
fn sweep_and_noise_match_the_serial_drivers() {
    let mut cfg = common::tiny_config();
    cfg.grid.s_f = tfo::config::Axis::Range { start: 0.1, stop: 0.9, count: 81 };
    cfg.grid.hb_m = tfo::config::Axis::Values(vec![110.0, 130.0, 150.0]);
    cfg.grid.s_m = tfo::config::Axis::Values(vec![0.9, 0.95, 1.0]);
    let model = cfg.model(4.0).unwrap();
    let tables: Vec<_> = cfg.wavelengths.iter().map(|&wl| simulate(&model, wl, 20_000, 2).unwrap()).collect();
    let ctx = SweepContext::new(
        model,
        &tables.iter().collect::<Vec<_>>(),
        &cfg.selected_rings().unwrap(),
        cfg.extinction_table().unwrap(),
        cfg.blood_model(),
    )
    .unwrap();
    let grid = cfg.hemo_grid();
    let serial = sweep(&ctx, &grid).unwrap();
    // Large enough to take the parallel noise path.
    assert!(serial.rows.len() >= 1024, "{}", serial.rows.len());
    let nc = cfg.noise.core_for(tfo::config::NoiseScenario::Combined).unwrap();
    let serial_noisy = apply_noise(&serial.rows, &nc).unwrap();
    for w in [1, 3] {
        let (rows, noisy) = parallel::with_workers(Some(w), || {
            let rows = parallel::sweep(&ctx, &grid).unwrap();
            let noisy = parallel::noise(&rows.rows, &nc).unwrap();
            (rows, noisy)
        })
        .unwrap();
        assert_eq!(rows.rows.len(), serial.rows.len());
        assert_eq!(rows.invalid, serial.invalid);
        for (a, b) in rows.rows.iter().zip(&serial.rows) {
            assert_eq!(a.labels, b.labels);
            assert_eq!(a.features.epr, b.features.epr);
            assert_eq!(a.i1, b.i1);
        }
        assert_eq!(noisy.excluded, serial_noisy.excluded);
        for (a, b) in noisy.rows.iter().zip(&serial_noisy.rows) {
            assert_eq!(a.features.epr, b.features.epr);
        }
    }
}
