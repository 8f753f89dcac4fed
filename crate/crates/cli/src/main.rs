//! `semmap`: simulate scenarios, run the mapper on logs, evaluate and export.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semmap::commands::{
    cmd_eval, cmd_export, cmd_run, cmd_simulate, load_config, CommandError, EvalInputs, ExportRequest, ScenarioSource,
};
use semmap::eval::Stage;
use semmap::pipeline::Fate;
use semmap::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "semmap", version, about = "Semantic landmark mapping with pose-graph drift correction")]
#[command(after_help = "Log verbosity is read from SEMMAP_LOG (error, warn, info, debug, trace).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate ground truth, odometry, detections and a registry.
    Simulate {
        /// Scenario TOML file.
        #[arg(long, conflicts_with = "preset")]
        scenario: Option<PathBuf>,
        /// Built-in scenario: desk, desk-clean, desk-drift, walking or loop.
        #[arg(long)]
        preset: Option<String>,
        /// Seed for a preset.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the mapping loop on a detection log and an odometry trajectory.
    Run {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        odometry: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score an estimated trajectory and optionally a landmark map.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Trajectory to report the improvement against, e.g. raw odometry.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Timing trace written by `run`.
        #[arg(long)]
        timings: Option<PathBuf>,
        /// Write the aligned trajectories as CSV.
        #[arg(long)]
        aligned_csv: Option<PathBuf>,
    },
    /// Write the effective config, a preset scenario or a graph snapshot.
    Export {
        #[command(subcommand)]
        what: ExportWhat,
        /// Output file; standard output when absent.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ExportWhat {
    /// The pipeline config after file and flag overrides.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// A preset as an editable scenario file.
    Scenario {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-emit a g2o snapshot, optionally after optimizing it.
    Graph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        optimize: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Pipeline config file plus one override flag per field.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Pipeline config TOML; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long, help_heading = "Tracker")]
    sigma_iou: Option<f64>,
    #[arg(long, help_heading = "Tracker")]
    min_tracklet_size: Option<usize>,
    /// Seconds.
    #[arg(long, help_heading = "Tracker")]
    max_gap: Option<f64>,
    #[arg(long, help_heading = "Tracker")]
    min_confidence: Option<f64>,
    /// Meters.
    #[arg(long, help_heading = "Tracker")]
    min_distance: Option<f64>,
    /// Meters.
    #[arg(long, help_heading = "Tracker")]
    max_distance: Option<f64>,

    /// Isotropic pixel noise of box centers.
    #[arg(long, help_heading = "Localization", conflicts_with = "noise_covariance")]
    noise_sigma: Option<f64>,
    /// Full 2x2 pixel covariance as `a,b,c,d`, row-major.
    #[arg(long, help_heading = "Localization", value_delimiter = ',', num_args = 4)]
    noise_covariance: Option<Vec<f64>>,
    #[arg(long, help_heading = "Localization")]
    mc_samples: Option<usize>,
    /// Meters.
    #[arg(long, help_heading = "Localization")]
    mc_step_sigma: Option<f64>,
    #[arg(long, help_heading = "Localization")]
    mc_burn_in: Option<usize>,
    #[arg(long, help_heading = "Localization")]
    mc_min_parallax_deg: Option<f64>,
    /// Meters.
    #[arg(long, help_heading = "Localization")]
    mad_threshold: Option<f64>,
    #[arg(long, help_heading = "Localization")]
    cuboid_grid: Option<usize>,
    #[arg(long, help_heading = "Localization")]
    cuboid_slices: Option<usize>,

    #[arg(long, help_heading = "Association")]
    u: Option<f64>,
    #[arg(long, help_heading = "Association")]
    merge_overlap_ratio: Option<f64>,
    /// Seconds.
    #[arg(long, help_heading = "Association")]
    min_reobservation_interval: Option<f64>,
    #[arg(long, help_heading = "Association")]
    cloud_cap: Option<usize>,

    #[arg(long, help_heading = "Solver")]
    max_iterations: Option<usize>,
    #[arg(long, help_heading = "Solver")]
    relative_tolerance: Option<f64>,
    #[arg(long, help_heading = "Solver")]
    gradient_tolerance: Option<f64>,
    #[arg(long, help_heading = "Solver")]
    initial_lambda: Option<f64>,
    /// Pixels; 0 disables the robust loss.
    #[arg(long, help_heading = "Solver")]
    huber_px: Option<f64>,
    /// Meters per step.
    #[arg(long, help_heading = "Solver")]
    odometry_sigma_t: Option<f64>,
    /// Radians per step.
    #[arg(long, help_heading = "Solver")]
    odometry_sigma_r: Option<f64>,
    #[arg(long, help_heading = "Solver")]
    optimize_every: Option<usize>,

    #[arg(long, help_heading = "Camera")]
    fx: Option<f64>,
    #[arg(long, help_heading = "Camera")]
    fy: Option<f64>,
    #[arg(long, help_heading = "Camera")]
    cx: Option<f64>,
    #[arg(long, help_heading = "Camera")]
    cy: Option<f64>,
    #[arg(long, help_heading = "Camera")]
    width: Option<u32>,
    #[arg(long, help_heading = "Camera")]
    height: Option<u32>,

    #[arg(long, help_heading = "Execution")]
    instrumentation: Option<bool>,
    #[arg(long, help_heading = "Execution")]
    threaded: Option<bool>,
    #[arg(long, help_heading = "Execution")]
    seed: Option<u64>,
}

fn set<T: Copy>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, CommandError> {
        let mut c = load_config(self.config.as_deref())?;
        set(&mut c.tracker.sigma_iou, self.sigma_iou);
        set(&mut c.tracker.min_tracklet_size, self.min_tracklet_size);
        set(&mut c.tracker.max_gap, self.max_gap);
        set(&mut c.tracker.min_confidence, self.min_confidence);
        set(&mut c.tracker.min_distance, self.min_distance);
        set(&mut c.tracker.max_distance, self.max_distance);
        if let Some(s) = self.noise_sigma {
            c.noise = semmap::candidate::NoiseModel::isotropic(s);
        }
        if let Some(v) = &self.noise_covariance {
            c.noise.covariance = [[v[0], v[1]], [v[2], v[3]]];
        }
        set(&mut c.mc.n_samples, self.mc_samples);
        set(&mut c.mc.step_sigma, self.mc_step_sigma);
        set(&mut c.mc.burn_in, self.mc_burn_in);
        set(&mut c.mc.min_parallax_deg, self.mc_min_parallax_deg);
        set(&mut c.mad_threshold, self.mad_threshold);
        set(&mut c.cuboid.grid, self.cuboid_grid);
        set(&mut c.cuboid.slices, self.cuboid_slices);
        set(&mut c.association.u, self.u);
        set(&mut c.association.merge_overlap_ratio, self.merge_overlap_ratio);
        set(&mut c.association.min_reobservation_interval, self.min_reobservation_interval);
        set(&mut c.association.cloud_cap, self.cloud_cap);
        set(&mut c.solver.max_iterations, self.max_iterations);
        set(&mut c.solver.relative_tolerance, self.relative_tolerance);
        set(&mut c.solver.gradient_tolerance, self.gradient_tolerance);
        set(&mut c.solver.initial_lambda, self.initial_lambda);
        set(&mut c.solver.huber_px, self.huber_px);
        set(&mut c.odometry_sigma_t, self.odometry_sigma_t);
        set(&mut c.odometry_sigma_r, self.odometry_sigma_r);
        set(&mut c.optimize_every, self.optimize_every);
        set(&mut c.camera.fx, self.fx);
        set(&mut c.camera.fy, self.fy);
        set(&mut c.camera.cx, self.cx);
        set(&mut c.camera.cy, self.cy);
        set(&mut c.camera.width, self.width);
        set(&mut c.camera.height, self.height);
        set(&mut c.instrumentation, self.instrumentation);
        set(&mut c.threaded, self.threaded);
        set(&mut c.seed, self.seed);
        c.validate().map_err(|source| CommandError::Config {
            path: self.config.clone().unwrap_or_else(|| PathBuf::from("<flags>")),
            source,
        })?;
        Ok(c)
    }
}

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn json(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn execute(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Simulate { scenario, preset, seed, out } => {
            let source = match (scenario, preset) {
                (Some(path), None) => ScenarioSource::File(path),
                (None, Some(name)) => ScenarioSource::Preset { name, seed },
                _ => return Err(CommandError::Usage("give either --scenario or --preset".into())),
            };
            let r = cmd_simulate(&source, &out)?;
            say!("{} frames, {} detections, config_hash {}", r.frames, r.detections, r.config_hash);
            for f in r.files {
                say!("{}", f.display());
            }
        }
        Command::Run {
            detections,
            odometry,
            config,
            out,
        } => {
            let cfg = config.resolve()?;
            let (manifest, output) = cmd_run(&detections, &odometry, config.config.as_deref(), &cfg, &out)?;
            let rejected = output
                .candidates
                .iter()
                .filter(|c| matches!(c.fate, Fate::Rejected { .. }))
                .count();
            say!(
                "{} poses, {} landmarks, {} candidates ({} rejected), {} observation factors",
                output.trajectory.len(),
                output.map.len(),
                output.candidates.len(),
                rejected,
                output.graph.observations().len()
            );
            if cfg.instrumentation {
                let t = semmap::eval::timing_report(&output.trace);
                let frame = t.get(Stage::Frame);
                say!("mean frame latency {:.2} ms (max {:.2} ms)", frame.mean_ms, frame.max_ms);
            }
            say!("config_hash {}", manifest.config_hash);
            for f in &manifest.outputs {
                say!("{}", f.display());
            }
        }
        Command::Eval {
            estimate,
            ground_truth,
            map,
            registry,
            baseline,
            timings,
            aligned_csv,
        } => {
            let report = cmd_eval(&EvalInputs {
                estimate,
                ground_truth,
                map,
                registry,
                baseline,
                timings,
                aligned_csv,
            })?;
            for n in &report.notices {
                log::warn!("{n}");
            }
            say!("{}", json(&report));
        }
        Command::Export { what, out } => {
            let (request, config) = match what {
                ExportWhat::Config { config } => (ExportRequest::Config, config),
                ExportWhat::Scenario { preset, seed } => (ExportRequest::Scenario { name: preset, seed }, ConfigArgs::default()),
                ExportWhat::Graph { input, optimize, config } => (ExportRequest::Graph { input, optimize }, config),
            };
            let text = cmd_export(&request, &config.resolve()?)?;
            match out {
                Some(path) => semmap::io::write_text(&path, &text).map_err(CommandError::Io)?,
                None => {
                    use std::io::Write as _;
                    let _ = std::io::stdout().write_all(text.as_bytes());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEMMAP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
