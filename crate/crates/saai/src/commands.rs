//! The work behind each `saai` subcommand.

use std::io::Write;
use std::path::Path;

use saai_core::forest::{generate_scene, render_ground_truth, simulate_flight, GroundTruth};
use saai_core::geometry::{CameraIntrinsics, FocalPlaneSpec};
use saai_core::metrics::{
    compare_conditions, evaluate as evaluate_detection, summarize, CellSummary, EvalResult, SweepProtocol, SweepRow,
};
use saai_core::Frame;
use serde::{Deserialize, Serialize};

use crate::config::SimulationConfig;
use crate::dataset::{self, Manifest};
use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline, PipelineConfig, PipelineOutput, PipelineStats};
use crate::process::{self, default_plane, Echo, ParamUpdate, Params};

/// Copy of the configuration written next to a simulated dataset.
pub const CONFIG_TOML: &str = "simulation.toml";

/// Generates the scene, renders the flight and writes dataset plus truth.
pub fn simulate(config: &SimulationConfig, out: &Path) -> Result<(Manifest, GroundTruth)> {
    config.validate()?;
    let intr = config.camera.intrinsics()?;
    let scene = generate_scene(&config.scene)?;
    let frames = simulate_flight(&scene, &intr, &config.path())?;
    let truth = render_ground_truth(&scene, &config.truth_plane()?)?;
    let manifest = dataset::write_dataset(&frames, &intr, out)?;
    dataset::write_ground_truth(out, &truth)?;
    let path = out.join(CONFIG_TOML);
    std::fs::write(&path, config.to_toml()).map_err(Error::io(&path))?;
    Ok((manifest, truth))
}

/// Plane of a dataset: the truth grid when present, otherwise the plane
/// under the mean camera position.
pub fn dataset_plane(dir: &Path, frames: &[Frame], intr: &CameraIntrinsics) -> Result<FocalPlaneSpec> {
    if dir.join(dataset::TRUTH_META).is_file() {
        Ok(dataset::read_ground_truth(dir)?.plane)
    } else {
        default_plane(frames, intr)
    }
}

/// Renders the last `window_size` frames of a dataset (all of them by
/// default) and writes `raw.png`, `display.png` and `params.json`.
pub fn process(dataset_dir: &Path, update: &ParamUpdate, out: &Path) -> Result<Echo> {
    let ds = dataset::read_dataset(dataset_dir)?;
    let plane = dataset_plane(dataset_dir, &ds.frames, &ds.intrinsics)?;
    let params = Params::for_plane(&plane, ds.frames.len()).apply(update);
    let rendered = process::render_window(&ds.frames, &ds.intrinsics, &params, &plane)?;
    process::write_outputs(out, &rendered, &params, &plane)
}

/// Scores a `process` output directory against a dataset's ground truth.
pub fn evaluate(results: &Path, dataset_dir: &Path) -> Result<EvalResult> {
    let (raw, echo) = process::read_outputs(results)?;
    let truth = dataset::read_ground_truth(dataset_dir)?;
    let (a, b) = (&echo.plane, &truth.plane);
    if (a.grid_width, a.grid_height, a.grid_resolution, a.grid_origin)
        != (b.grid_width, b.grid_height, b.grid_resolution, b.grid_origin)
    {
        return Err(Error::Invalid("result grid differs from the ground-truth grid".into()));
    }
    Ok(evaluate_detection(&raw, &truth)?)
}

pub const SWEEP_HEADER: &str = "method\tdensity\tcondition\tseed\tvisibility\tprecision\ttp_intensity\tfp_intensity";

pub fn sweep_line(r: &SweepRow) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
        r.method.name(),
        r.density,
        r.condition.name(),
        r.seed,
        r.eval.target_visibility,
        r.eval.precision,
        r.eval.tp_intensity,
        r.eval.fp_intensity
    )
}

/// Runs the protocol, streaming one TSV line per row to `table`.
pub fn sweep(protocol: &SweepProtocol, table: &mut dyn Write) -> Result<Vec<CellSummary>> {
    let path = Path::new("<table>");
    writeln!(table, "{SWEEP_HEADER}").map_err(Error::io(path))?;
    let mut failed = None;
    let rows = compare_conditions(protocol, |r| {
        if failed.is_none() {
            if let Err(e) = writeln!(table, "{}", sweep_line(r)).and_then(|_| table.flush()) {
                failed = Some(e);
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(Error::io(path)(e));
    }
    Ok(summarize(&rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub stats: PipelineStats,
    pub width: u32,
    pub height: u32,
    /// Source rate in frames per second; `None` when unpaced.
    pub cadence_hz: Option<f64>,
    pub p95_budget_ms: f64,
    pub within_budget: bool,
}

pub const P95_BUDGET_MS: f64 = 100.0;

/// Streams `frames` through the pipeline; `sink` sees every output.
pub fn bench<I>(
    frames: I,
    intrinsics: &CameraIntrinsics,
    config: &PipelineConfig,
    sink: impl FnMut(&PipelineOutput),
) -> Result<BenchReport>
where
    I: Iterator<Item = Result<Frame>> + Send,
{
    let stats = run_pipeline(frames, intrinsics, config, None, sink)?;
    Ok(BenchReport {
        within_budget: stats.end_to_end.p95_ms <= P95_BUDGET_MS,
        stats,
        width: intrinsics.width,
        height: intrinsics.height,
        cadence_hz: config.cadence_hz,
        p95_budget_ms: P95_BUDGET_MS,
    })
}
