//! File-level entry points behind the command-line tool.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{config_hash, line_column, ConfigError, PipelineConfig};
use crate::eval::{aligned_csv, aligned_error, improvement_percent, score_landmarks, timing_report, EvalError, LandmarkScore, StageSample, StageTimings, MATCH_WINDOW};
use crate::io::{
    parse_detections, parse_registry, read_text, read_tum, write_detections, write_g2o, write_ply, write_registry, write_text,
    write_tum, IoError, MapDocument,
};
use crate::pipeline::{group_detections, run, Fate, PipelineError, RunOutput};
use crate::simulator::{ground_truth_bundle, preset, Scenario, SimError, PRESETS};

pub const GROUND_TRUTH_FILE: &str = "groundtruth.tum";
pub const ODOMETRY_FILE: &str = "odometry.tum";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const REGISTRY_FILE: &str = "registry.json";
pub const TRAJECTORY_FILE: &str = "trajectory.tum";
pub const MAP_FILE: &str = "map.json";
pub const CLOUD_FILE: &str = "map.ply";
pub const GRAPH_FILE: &str = "graph.g2o";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";
pub const TIMINGS_FILE: &str = "timings.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: IoError,
    },
    #[error(transparent)]
    Io(IoError),
    #[error(transparent)]
    Scenario(#[from] SimError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl CommandError {
    /// Process exit status: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 1,
            CommandError::Pipeline(PipelineError::Numerical { .. }) => 3,
            CommandError::Eval(EvalError::DegenerateConfiguration) => 3,
            _ => 2,
        }
    }
}

fn with_path(path: &Path) -> impl FnOnce(IoError) -> CommandError + '_ {
    move |source| match source {
        IoError::Io { .. } => CommandError::Io(source),
        _ => CommandError::Format {
            path: path.to_path_buf(),
            source,
        },
    }
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CommandError> {
    let path = dir.join(name);
    write_text(&path, text).map_err(CommandError::Io)?;
    Ok(path)
}

fn ensure_dir(dir: &Path) -> Result<(), CommandError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CommandError::Io(IoError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn hash_comment(hash: &str) -> Vec<String> {
    vec![format!("config_hash {hash}")]
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let s: Scenario = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    s.world.validate().and_then(|_| s.noise.validate()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(s)
}

pub fn scenario_toml(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario serializes")
}

/// Where a scenario comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    Preset { name: String, seed: u64 },
}

pub fn load_scenario(source: &ScenarioSource) -> Result<(Scenario, String), CommandError> {
    match source {
        ScenarioSource::File(path) => {
            let text = read_text(path).map_err(CommandError::Io)?;
            let s = parse_scenario(&text).map_err(|source| CommandError::Config {
                path: path.clone(),
                source,
            })?;
            Ok((s, text))
        }
        ScenarioSource::Preset { name, seed } => {
            let s = preset(name, *seed).ok_or_else(|| {
                CommandError::Usage(format!("unknown preset `{name}`; expected one of {}", PRESETS.join(", ")))
            })?;
            let text = scenario_toml(&s);
            Ok((s, text))
        }
    }
}

/// Paths written by [`cmd_simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub files: Vec<PathBuf>,
    pub config_hash: String,
    pub frames: usize,
    pub detections: usize,
}

/// Writes ground truth, drifted odometry, the detection log and the object
/// registry for a scenario.
pub fn cmd_simulate(source: &ScenarioSource, out_dir: &Path) -> Result<SimulateOutput, CommandError> {
    let (scenario, text) = load_scenario(source)?;
    let hash = config_hash(&text);
    let bundle = ground_truth_bundle(&scenario.world, &scenario.noise)?;
    ensure_dir(out_dir)?;
    let comments = hash_comment(&hash);
    let detections: Vec<_> = bundle.frames.iter().flat_map(|f| f.detections.iter()).collect();
    let files = vec![
        write(out_dir, GROUND_TRUTH_FILE, &write_tum(&bundle.ground_truth, &comments))?,
        write(out_dir, ODOMETRY_FILE, &write_tum(&bundle.odometry, &comments))?,
        write(out_dir, DETECTIONS_FILE, &write_detections(detections.iter().copied(), &comments))?,
        write(out_dir, REGISTRY_FILE, &write_registry(&bundle.registry, &hash))?,
    ];
    Ok(SimulateOutput {
        files,
        config_hash: hash,
        frames: bundle.frames.len(),
        detections: detections.len(),
    })
}

/// Reads a pipeline config file, or the defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, CommandError> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = read_text(p).map_err(CommandError::Io)?;
            PipelineConfig::from_toml_str(&text).map_err(|source| CommandError::Config {
                path: p.to_path_buf(),
                source,
            })
        }
    }
}

/// Hash of the canonical serialization of an effective config.
pub fn effective_hash(cfg: &PipelineConfig) -> String {
    config_hash(&cfg.to_toml_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInputs {
    pub detections: PathBuf,
    pub odometry: PathBuf,
    pub config: Option<PathBuf>,
}

/// Record of one `run` invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub inputs: RunInputs,
    pub config_hash: String,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    /// Per-stage timing trace.
    pub timings: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingDocument {
    pub config_hash: String,
    pub report: StageTimings,
    pub trace: Vec<StageSample>,
}

#[derive(Debug, Clone, Serialize)]
struct CandidateLine<'a> {
    frame_id: u64,
    tracklet_id: u64,
    class_id: u32,
    measurements: usize,
    observed: bool,
    #[serde(flatten)]
    fate: &'a Fate,
}

fn candidates_jsonl(out: &RunOutput) -> String {
    out.candidates
        .iter()
        .map(|c| {
            serde_json::to_string(&CandidateLine {
                frame_id: c.frame_id,
                tracklet_id: c.tracklet.id,
                class_id: c.tracklet.class_id,
                measurements: c.tracklet.len(),
                observed: c.observed,
                fate: &c.fate,
            })
            .expect("record serializes")
                + "\n"
        })
        .collect()
}

/// Runs the mapping loop on logged inputs and writes the corrected
/// trajectory, the map, the graph and the timing trace to `out_dir`.
pub fn cmd_run(
    detections: &Path,
    odometry: &Path,
    config_path: Option<&Path>,
    cfg: &PipelineConfig,
    out_dir: &Path,
) -> Result<(RunManifest, RunOutput), CommandError> {
    cfg.validate().map_err(|source| CommandError::Config {
        path: config_path.map(Path::to_path_buf).unwrap_or_default(),
        source,
    })?;
    let odo = read_tum(odometry).map_err(with_path(odometry))?;
    let dets = parse_detections(&read_text(detections).map_err(CommandError::Io)?).map_err(with_path(detections))?;
    let frames = group_detections(&dets, &odo, MATCH_WINDOW)?;
    let out = run(&frames, &odo, cfg)?;

    let hash = effective_hash(cfg);
    let comments = hash_comment(&hash);
    ensure_dir(out_dir)?;
    let timings = TimingDocument {
        config_hash: hash.clone(),
        report: timing_report(&out.trace),
        trace: out.trace.clone(),
    };
    let outputs = vec![
        write(out_dir, TRAJECTORY_FILE, &write_tum(&out.trajectory, &comments))?,
        write(out_dir, MAP_FILE, &MapDocument::from_map(&out.map, &hash).to_json())?,
        write(out_dir, CLOUD_FILE, &write_ply(&out.map, &hash))?,
        write(out_dir, GRAPH_FILE, &write_g2o(&out.graph, &comments))?,
        write(out_dir, CANDIDATES_FILE, &candidates_jsonl(&out))?,
    ];
    let timings_path = write(
        out_dir,
        TIMINGS_FILE,
        &(serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n"),
    )?;
    let manifest = RunManifest {
        inputs: RunInputs {
            detections: detections.to_path_buf(),
            odometry: odometry.to_path_buf(),
            config: config_path.map(Path::to_path_buf),
        },
        config_hash: hash,
        seed: cfg.seed,
        outputs,
        timings: timings_path,
    };
    write(
        out_dir,
        MANIFEST_FILE,
        &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"),
    )?;
    Ok((manifest, out))
}

/// Inputs of [`cmd_eval`]; only the two trajectories are required.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalInputs {
    pub estimate: PathBuf,
    pub ground_truth: PathBuf,
    pub map: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    /// Trajectory to compare against, such as raw odometry.
    pub baseline: Option<PathBuf>,
    pub timings: Option<PathBuf>,
    /// Where to write the aligned-trajectory CSV.
    pub aligned_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Meters.
    pub ate_rmse: f64,
    pub matched_poses: usize,
    pub unmatched_poses: usize,
    pub baseline_ate_rmse: Option<f64>,
    /// Reduction of ATE against the baseline, percent.
    pub improvement_percent: Option<f64>,
    pub landmarks: Option<LandmarkScore>,
    pub timings: Option<StageTimings>,
    pub notices: Vec<String>,
}

pub fn cmd_eval(inputs: &EvalInputs) -> Result<EvalReport, CommandError> {
    let est = read_tum(&inputs.estimate).map_err(with_path(&inputs.estimate))?;
    let gt = read_tum(&inputs.ground_truth).map_err(with_path(&inputs.ground_truth))?;
    let err = aligned_error(&est, &gt)?;
    let mut notices = Vec::new();
    if err.unmatched > 0 {
        notices.push(format!("{} estimated pose(s) had no ground truth within {MATCH_WINDOW} s", err.unmatched));
    }
    if let Some(path) = &inputs.aligned_csv {
        write_text(path, &aligned_csv(&est, &gt, &err.s)).map_err(CommandError::Io)?;
    }
    let baseline_ate_rmse = match &inputs.baseline {
        Some(p) => Some(aligned_error(&read_tum(p).map_err(with_path(p))?, &gt)?.rmse),
        None => None,
    };
    let landmarks = match (&inputs.map, &inputs.registry) {
        (Some(map), Some(reg)) => {
            let doc = MapDocument::parse(&read_text(map).map_err(CommandError::Io)?).map_err(with_path(map))?;
            let registry = parse_registry(&read_text(reg).map_err(CommandError::Io)?).map_err(with_path(reg))?;
            let score = score_landmarks(&doc.mapped_objects(), &registry);
            if score.empty_map {
                notices.push("landmark map is empty; precision reported as 1".into());
            }
            Some(score)
        }
        (Some(_), None) => {
            notices.push("no registry given; landmark scoring skipped".into());
            None
        }
        (None, _) => None,
    };
    let timings = match &inputs.timings {
        Some(p) => {
            let doc: TimingDocument = serde_json::from_str(&read_text(p).map_err(CommandError::Io)?).map_err(|e| CommandError::Format {
                path: p.clone(),
                source: IoError::Document(e.to_string()),
            })?;
            if doc.report.no_data {
                notices.push("timing trace is empty".into());
            }
            Some(doc.report)
        }
        None => None,
    };
    Ok(EvalReport {
        ate_rmse: err.rmse,
        matched_poses: err.per_frame_errors.len(),
        unmatched_poses: err.unmatched,
        improvement_percent: baseline_ate_rmse.map(|b| improvement_percent(b, err.rmse)),
        baseline_ate_rmse,
        landmarks,
        timings,
        notices,
    })
}

/// Auxiliary artifacts produced by `export`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExportRequest {
    /// Effective pipeline config as TOML.
    Config,
    /// A preset scenario as an editable TOML file.
    Scenario { name: String, seed: u64 },
    /// Graph snapshot re-emitted from a g2o file, after optional optimization.
    Graph { input: PathBuf, optimize: bool },
}

pub fn cmd_export(request: &ExportRequest, cfg: &PipelineConfig) -> Result<String, CommandError> {
    match request {
        ExportRequest::Config => Ok(cfg.to_toml_string()),
        ExportRequest::Scenario { name, seed } => {
            let (s, _) = load_scenario(&ScenarioSource::Preset {
                name: name.clone(),
                seed: *seed,
            })?;
            Ok(scenario_toml(&s))
        }
        ExportRequest::Graph { input, optimize } => {
            let mut g = crate::io::parse_g2o(&read_text(input).map_err(CommandError::Io)?).map_err(with_path(input))?;
            if *optimize {
                g.optimize(&cfg.solver).map_err(|source| {
                    CommandError::Pipeline(PipelineError::Numerical { frame: 0, source })
                })?;
            }
            Ok(write_g2o(&g, &hash_comment(&effective_hash(cfg))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_parse_errors_have_positions() {
        let text = scenario_toml(&preset("walking", 0).unwrap());
        assert_eq!(parse_scenario(&text).unwrap(), preset("walking", 0).unwrap());
        let broken = text.replacen("duration =", "duration = =", 1);
        match parse_scenario(&broken) {
            Err(ConfigError::Parse { line, column, .. }) => assert!(line > 1 && column > 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CommandError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CommandError::Eval(EvalError::TooFewMatches(0)).exit_code(), 2);
        assert_eq!(CommandError::Eval(EvalError::DegenerateConfiguration).exit_code(), 3);
        let numerical = PipelineError::Numerical {
            frame: 3,
            source: crate::posegraph::GraphError::SingularSystem,
        };
        assert_eq!(CommandError::Pipeline(numerical).exit_code(), 3);
    }

    #[test]
    fn unknown_preset_is_a_usage_error() {
        let err = load_scenario(&ScenarioSource::Preset {
            name: "nope".into(),
            seed: 0,
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn exported_config_reloads() {
        let mut cfg = PipelineConfig::default();
        cfg.seed = 9;
        let text = cmd_export(&ExportRequest::Config, &cfg).unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
