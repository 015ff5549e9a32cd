use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use saai::commands::{self, CONFIG_TOML};
use saai::config::SimulationConfig;
use saai::dataset;
use saai::pipeline::{Execution, PipelineConfig};
use saai::process::{ParamUpdate, Params};
use saai::service::{self, ServiceConfig};
use saai::{Error, Result};
use saai_core::forest::{generate_scene, simulate_flight};
use saai_core::metrics::SweepProtocol;
use saai_core::window::Mode;

/// Synthetic aperture anomaly imaging tools.
#[derive(Parser)]
#[command(name = "saai", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a simulated flight into a dataset directory with ground truth.
    Simulate {
        /// TOML simulation config; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `scene.seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate a dataset window and write raw.png, display.png, params.json.
    Process {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Score a process output against the dataset's ground truth (JSON).
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Both methods over densities, conditions and seeds as a TSV table.
    Sweep {
        /// TOML protocol; every field optional.
        #[arg(long)]
        protocol: Option<PathBuf>,
        /// Runs seeds 0..N instead of the protocol's list.
        #[arg(long)]
        seeds: Option<u64>,
        /// Comma-separated densities in trees per hectare.
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
        /// Table destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-cell mean and spread as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Stream a dataset or simulated flight through the pipeline; prints stats JSON.
    Bench {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        dataset: Option<PathBuf>,
        /// Simulation config rendered in memory before the run.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Minimum flight distance between selected frames, meters.
        #[arg(long, default_value_t = 0.5)]
        sampling_distance: f64,
        #[arg(long, default_value_t = 8)]
        queue: usize,
        /// Source frames per second; 0 streams as fast as possible.
        #[arg(long, default_value_t = 10.0)]
        cadence: f64,
        /// Run all stages on one thread.
        #[arg(long)]
        serial: bool,
        /// Write the last window's raw values as 16-bit PNG.
        #[arg(long)]
        last_raw: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// HTTP tuning service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 1)]
        max_sessions: usize,
        /// Default replay rate, frames per second.
        #[arg(long, default_value_t = 10.0)]
        cadence: f64,
        /// Default window size of new sessions.
        #[arg(long, default_value_t = 30)]
        window: usize,
    },
}

/// Visualization parameters. Angles in radians.
#[derive(Args, Clone, Copy, Default)]
struct ParamArgs {
    /// thermal_integral, ad_on_integral or saai.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Focal distance below the reference altitude, meters.
    #[arg(long = "FP", allow_hyphen_values = true)]
    fp: Option<f64>,
    /// Focal-plane pitch.
    #[arg(long = "P_i", allow_hyphen_values = true)]
    pitch: Option<f64>,
    /// Focal-plane roll.
    #[arg(long = "R_o", allow_hyphen_values = true)]
    roll: Option<f64>,
    /// Compass correction, counter-clockwise positive.
    #[arg(long = "CC", allow_hyphen_values = true)]
    cc: Option<f64>,
    /// Display contrast gain.
    #[arg(long = "C_n")]
    contrast: Option<f64>,
    /// RX threshold percentile.
    #[arg(long = "R_x")]
    rx: Option<f64>,
    /// Frames per integral.
    #[arg(long)]
    window: Option<usize>,
    /// RX covariance regularization.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ParamArgs {
    fn update(&self) -> ParamUpdate {
        ParamUpdate {
            focal_distance: self.fp,
            pitch: self.pitch,
            roll: self.roll,
            compass_correction: self.cc,
            contrast: self.contrast,
            rx_threshold: self.rx,
            mode: self.mode,
            window_size: self.window,
            epsilon: self.epsilon,
            rx_channels: None,
        }
    }
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| format!("unknown mode `{s}`; use thermal_integral, ad_on_integral or saai"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, out } => {
            let mut cfg = match config {
                Some(p) => SimulationConfig::load(&p)?,
                None => SimulationConfig::default(),
            };
            if let Some(s) = seed {
                cfg.scene.seed = s;
            }
            let (manifest, truth) = commands::simulate(&cfg, &out)?;
            eprintln!(
                "wrote {} frames and a {}-cell footprint to {} ({CONFIG_TOML} holds the config)",
                manifest.records.len(),
                truth.footprint_area,
                out.display()
            );
        }
        Command::Process { dataset, out, params } => {
            let echo = commands::process(&dataset, &params.update(), &out)?;
            println!("{}", json(&echo));
        }
        Command::Evaluate { results, dataset } => {
            println!("{}", json(&commands::evaluate(&results, &dataset)?));
        }
        Command::Sweep {
            protocol,
            seeds,
            densities,
            out,
            summary,
        } => {
            let mut p = match protocol {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|source| Error::Io {
                        path: path.clone(),
                        source,
                    })?;
                    toml::from_str::<SweepProtocol>(&text).map_err(|e| Error::Config {
                        path,
                        message: e.to_string(),
                    })?
                }
                None => SweepProtocol::default(),
            };
            if let Some(n) = seeds {
                p.seeds = (0..n).collect();
            }
            if let Some(d) = densities {
                p.densities = d;
            }
            let cells = match &out {
                Some(path) => {
                    let file = fs::File::create(path).map_err(|source| Error::Io {
                        path: path.clone(),
                        source,
                    })?;
                    commands::sweep(&p, &mut std::io::BufWriter::new(file))?
                }
                None => commands::sweep(&p, &mut std::io::stdout().lock())?,
            };
            if let Some(path) = summary {
                write_file(&path, &json(&cells))?;
            }
        }
        Command::Bench {
            dataset,
            config,
            sampling_distance,
            queue,
            cadence,
            serial,
            last_raw,
            params,
        } => {
            let cadence = (cadence > 0.0).then_some(cadence);
            let mut last = None;
            let keep = |o: &saai::pipeline::PipelineOutput| last = Some(o.window.display.clone());
            let report = if let Some(dir) = dataset {
                let (header, frames) = dataset::stream_dataset(&dir)?;
                let first = dataset::read_dataset(&dir)?;
                let plane = commands::dataset_plane(&dir, &first.frames, &header.intrinsics)?;
                let pc = pipeline_config(&params, &plane, sampling_distance, queue, serial, cadence)?;
                commands::bench(frames, &header.intrinsics, &pc, keep)?
            } else {
                let cfg = SimulationConfig::load(config.as_deref().expect("clap requires one source"))?;
                let intr = cfg.camera.intrinsics()?;
                let scene = generate_scene(&cfg.scene)?;
                let frames = simulate_flight(&scene, &intr, &cfg.path())?;
                let pc = pipeline_config(&params, &cfg.truth_plane()?, sampling_distance, queue, serial, cadence)?;
                commands::bench(frames.into_iter().map(Ok), &intr, &pc, keep)?
            };
            if let (Some(path), Some(raster)) = (last_raw, last) {
                saai::imageio::write_gray16(&path, &raster)?;
            }
            println!("{}", json(&report));
        }
        Command::Serve {
            addr,
            max_sessions,
            cadence,
            window,
        } => {
            let config = ServiceConfig {
                max_sessions,
                cadence_hz: cadence,
                window_size: window,
            };
            let rt = tokio::runtime::Runtime::new().map_err(|source| Error::Io {
                path: PathBuf::from("<runtime>"),
                source,
            })?;
            rt.block_on(service::serve(addr, config)).map_err(|source| Error::Io {
                path: PathBuf::from(addr.to_string()),
                source,
            })?;
        }
    }
    Ok(())
}

/// Bench parameters: contrast 1 so the kept raster is the raw window.
fn pipeline_config(
    args: &ParamArgs,
    plane: &saai_core::geometry::FocalPlaneSpec,
    sampling_distance: f64,
    queue: usize,
    serial: bool,
    cadence_hz: Option<f64>,
) -> Result<PipelineConfig> {
    let params = Params::for_plane(plane, 30).apply(&args.update());
    params.validate().map_err(|e| Error::Invalid(e.to_string()))?;
    let mut visual = params.visual(plane);
    visual.contrast = 1.0;
    let mut pc = PipelineConfig::new(visual);
    pc.window_size = params.window_size;
    pc.sampling_distance = sampling_distance;
    pc.queue_capacity = queue;
    pc.cadence_hz = cadence_hz;
    pc.execution = if serial { Execution::Serial } else { Execution::Parallel };
    Ok(pc)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::FAILURE
        }
    }
}
