#![allow(dead_code)]

use tfo::config::{Axis, Config, NoiseScenario};

/// Two shallow geometries, short rings, a small grid, and brief training.
pub fn tiny_config() -> Config {
    let mut cfg = Config::default_profile();
    cfg.photons = 50_000;
    cfg.geometry.d_m = Axis::Values(vec![4.0, 5.0]);
    cfg.geometry.lateral_half_width = 60.0;
    cfg.geometry.volume_depth = 40.0;
    cfg.detectors.first_sdd = 10.0;
    cfg.detectors.last_sdd = 40.0;
    cfg.detectors.count = 7;
    cfg.detectors.selected_sdd = vec![10.0, 15.0, 20.0, 30.0, 40.0];
    cfg.grid.hb_m = Axis::Values(vec![110.0, 150.0]);
    cfg.grid.s_m = Axis::Values(vec![0.95]);
    cfg.grid.hb_f = Axis::Values(vec![120.0, 180.0]);
    cfg.grid.s_f = Axis::Range { start: 0.1, stop: 0.9, count: 9 };
    cfg.noise.scenario = NoiseScenario::None;
    cfg.training.first_hidden = 16;
    cfg.training.max_epochs = 20;
    cfg.training.patience = 5;
    cfg
}

pub fn tfo_bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_tfo"))
}
