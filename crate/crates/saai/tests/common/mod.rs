#![allow(dead_code)]

use saai::config::SimulationConfig;
use saai_core::forest::{generate_scene, simulate_flight, Condition};
use saai_core::geometry::CameraIntrinsics;
use saai_core::Frame;

/// Small flight over the target: `count` frames, `spacing` meters apart,
/// `px`-square camera.
pub fn config(seed: u64, density: f64, count: usize, spacing: f64, px: u32) -> SimulationConfig {
    let mut cfg = SimulationConfig::default();
    cfg.scene.seed = seed;
    cfg.scene.density = density;
    cfg.scene.condition = Condition::Cloudy;
    cfg.camera.width = px;
    cfg.camera.height = px;
    cfg.flight.count = count;
    cfg.flight.spacing = spacing;
    cfg
}

pub fn flight(cfg: &SimulationConfig) -> (Vec<Frame>, CameraIntrinsics) {
    let intr = cfg.camera.intrinsics().unwrap();
    let scene = generate_scene(&cfg.scene).unwrap();
    (simulate_flight(&scene, &intr, &cfg.path()).unwrap(), intr)
}
