//! The online mapping loop.
//!
//! Work is split in two stages connected by an ordered queue. The front end
//! ingests detections, tracks them and proposes localized candidates using the
//! raw odometry only. The back end keeps the pose graph and the landmark map:
//! it moves each candidate into the corrected frame, associates it, appends
//! observation factors, optimizes and merges. Because the front end never reads
//! back-end state, running the stages on one thread or two gives the same bits.

use std::sync::mpsc;
use std::time::Instant;

use nalgebra::Matrix6;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{Alias, AssocDecision, LandmarkMap};
use crate::candidate::{propose, Candidate, Proposal, ProposalSettings};
use crate::config::PipelineConfig;
use crate::eval::{Stage, StageSample};
use crate::geometry::{Pose, StampedPose, Trajectory};
use crate::posegraph::{
    apply_correction, diagonal_information, prior_information, Graph, GraphError, ObservationFactor, SolveReport,
};
use crate::tracker::{Measurement, Tracker, TrackerError, Tracklet};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("detection at t={timestamp} matches no odometry pose")]
    TimestampMismatch { timestamp: f64 },
    #[error("odometry trajectory is empty")]
    EmptyOdometry,
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("optimization failed at frame {frame}: {source}")]
    Numerical {
        frame: u64,
        #[source]
        source: GraphError,
    },
    #[error("graph update failed at frame {frame}: {source}")]
    Graph {
        frame: u64,
        #[source]
        source: GraphError,
    },
    #[error("front end stopped unexpectedly")]
    WorkerLost,
}

/// Detections of one frame. `frame_id` indexes the odometry trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub frame_id: u64,
    pub timestamp: f64,
    pub detections: Vec<Measurement<f64>>,
}

/// Assigns every detection to the odometry pose nearest in time, within
/// `window` seconds, and rewrites its `frame_id` to that pose index.
pub fn group_detections(
    detections: &[Measurement<f64>],
    odometry: &Trajectory<f64>,
    window: f64,
) -> Result<Vec<FrameInput>, PipelineError> {
    if odometry.is_empty() {
        return Err(PipelineError::EmptyOdometry);
    }
    let times: Vec<f64> = odometry.timestamps().collect();
    let mut frames: Vec<FrameInput> = times
        .iter()
        .enumerate()
        .map(|(i, &timestamp)| FrameInput {
            frame_id: i as u64,
            timestamp,
            detections: Vec::new(),
        })
        .collect();
    for m in detections {
        let i = times.partition_point(|&t| t < m.timestamp);
        let best = [i.checked_sub(1), (i < times.len()).then_some(i)]
            .into_iter()
            .flatten()
            .min_by(|&a, &b| (times[a] - m.timestamp).abs().total_cmp(&(times[b] - m.timestamp).abs()))
            .filter(|&j| (times[j] - m.timestamp).abs() <= window)
            .ok_or(PipelineError::TimestampMismatch { timestamp: m.timestamp })?;
        let mut m = *m;
        m.frame_id = best as u64;
        m.timestamp = times[best];
        frames[best].detections.push(m);
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    Accepted(Box<Candidate<f64>>),
    Rejected(f64),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
struct Proposed {
    tracklet: Tracklet<f64>,
    outcome: Outcome,
}

/// Result of the front end for one frame.
#[derive(Debug)]
struct FrontOutput {
    frame_id: u64,
    timestamp: f64,
    proposals: Vec<Proposed>,
    samples: Vec<StageSample>,
    ms: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct FrontEnd<'a> {
    cfg: &'a PipelineConfig,
    odometry: &'a Trajectory<f64>,
    tracker: Tracker<f64>,
}

impl<'a> FrontEnd<'a> {
    fn new(cfg: &'a PipelineConfig, odometry: &'a Trajectory<f64>) -> Self {
        Self {
            cfg,
            odometry,
            tracker: Tracker::new(),
        }
    }

    fn process(&mut self, frame: &FrameInput) -> Result<FrontOutput, PipelineError> {
        let start = Instant::now();
        let mut samples = Vec::new();
        let admitted: Vec<Measurement<f64>> = frame
            .detections
            .iter()
            .filter(|m| self.cfg.tracker.admits(m))
            .copied()
            .collect();
        let step = self.tracker.step(&admitted, frame.timestamp, &self.cfg.tracker)?;
        samples.push(StageSample {
            stage: Stage::Ingest,
            ms: ms_since(start),
        });

        let mc = self.cfg.effective_mc();
        let settings = ProposalSettings {
            mad_threshold: self.cfg.mad_threshold,
            noise: &self.cfg.noise,
            mc: &mc,
        };
        let mut proposals = Vec::with_capacity(step.promoted.len());
        for tracklet in step.promoted {
            let t0 = Instant::now();
            let poses: Vec<Pose<f64>> = tracklet
                .measurements
                .iter()
                .map(|m| self.odometry.poses[m.frame_id as usize].pose)
                .collect();
            let outcome = match propose(tracklet.clone(), poses, &self.cfg.camera, &self.cfg.cuboid, &settings) {
                Ok(Proposal::Accepted(c)) => Outcome::Accepted(c),
                Ok(Proposal::Rejected { mad, .. }) => Outcome::Rejected(mad.magnitude),
                Err(e) => Outcome::Failed(e.to_string()),
            };
            samples.push(StageSample {
                stage: Stage::Proposal,
                ms: ms_since(t0),
            });
            proposals.push(Proposed { tracklet, outcome });
        }
        Ok(FrontOutput {
            frame_id: frame.frame_id,
            timestamp: frame.timestamp,
            proposals,
            samples,
            ms: ms_since(start),
        })
    }
}

/// What happened to one promoted tracklet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Fate {
    /// Centroid spread too large; carries the MAD magnitude in meters.
    Rejected { mad: f64 },
    /// Cloud extraction or localization failed.
    Failed { reason: String },
    NewLandmark { landmark_id: u64 },
    Matched { landmark_id: u64, gated: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub frame_id: u64,
    pub tracklet: Tracklet<f64>,
    pub fate: Fate,
    /// Whether observation factors were appended for it.
    pub observed: bool,
}

/// One optimize, correct and merge cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionEvent {
    pub frame_id: u64,
    pub report: SolveReport<f64>,
    pub landmarks_before_merge: usize,
    pub aliases: Vec<Alias>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Corrected camera trajectory.
    pub trajectory: Trajectory<f64>,
    pub graph: Graph<f64>,
    pub map: LandmarkMap<f64>,
    pub candidates: Vec<CandidateRecord>,
    pub corrections: Vec<CorrectionEvent>,
    pub trace: Vec<StageSample>,
}

impl RunOutput {
    /// Largest landmark count seen before any merge.
    pub fn peak_landmarks(&self) -> usize {
        self.corrections
            .iter()
            .map(|c| c.landmarks_before_merge)
            .max()
            .unwrap_or(0)
            .max(self.map.len())
    }
}

/// Moves a candidate built on raw odometry into the frame of the current
/// estimate, using the correction at its last measurement.
fn to_estimate_frame(c: &mut Candidate<f64>, correction: &Pose<f64>) {
    for p in &mut c.poses {
        *p = correction.compose(p);
    }
    for cloud in &mut c.clouds {
        for q in &mut cloud.points {
            *q = correction.transform_point(q);
        }
    }
    for q in &mut c.per_measurement_centroids {
        *q = correction.transform_point(q);
    }
    c.map_centroid = correction.transform_point(&c.map_centroid);
}

struct BackEnd<'a> {
    cfg: &'a PipelineConfig,
    odometry: &'a Trajectory<f64>,
    odometry_information: Matrix6<f64>,
    graph: Graph<f64>,
    map: LandmarkMap<f64>,
    candidates: Vec<CandidateRecord>,
    corrections: Vec<CorrectionEvent>,
    trace: Vec<StageSample>,
    frames_since_optimize: usize,
    pending_observations: bool,
}

impl<'a> BackEnd<'a> {
    fn new(cfg: &'a PipelineConfig, odometry: &'a Trajectory<f64>) -> Self {
        Self {
            cfg,
            odometry,
            odometry_information: diagonal_information(cfg.odometry_sigma_t, cfg.odometry_sigma_r),
            graph: Graph::new(),
            map: LandmarkMap::new(),
            candidates: Vec::new(),
            corrections: Vec::new(),
            trace: Vec::new(),
            frames_since_optimize: 0,
            pending_observations: false,
        }
    }

    fn odom(&self, frame_id: u64) -> &Pose<f64> {
        &self.odometry.poses[frame_id as usize].pose
    }

    fn add_pose(&mut self, frame_id: u64) -> Result<(), PipelineError> {
        if frame_id == 0 || self.graph.poses().is_empty() {
            let p = *self.odom(frame_id);
            self.graph.set_pose(frame_id, p);
            self.graph.set_prior(frame_id, p, prior_information());
            return Ok(());
        }
        let rel = self.odom(frame_id - 1).between(self.odom(frame_id));
        self.graph
            .add_odometry(frame_id - 1, frame_id, rel, self.odometry_information)
            .map_err(|source| PipelineError::Graph { frame: frame_id, source })
    }

    fn process(&mut self, front: FrontOutput) -> Result<(), PipelineError> {
        let start = Instant::now();
        let now = front.timestamp;
        self.add_pose(front.frame_id)?;
        let mut samples = front.samples;
        let mut new_observations = false;
        for p in front.proposals {
            let fate_and_obs = match p.outcome {
                Outcome::Rejected(mad) => (Fate::Rejected { mad }, false),
                Outcome::Failed(reason) => (Fate::Failed { reason }, false),
                Outcome::Accepted(mut cand) => {
                    let t0 = Instant::now();
                    let last = cand.tracklet.latest().frame_id;
                    let correction = self.graph.pose(last).expect("pose added").compose(&self.odom(last).inverse());
                    to_estimate_frame(&mut cand, &correction);
                    let integration = self.map.integrate(&cand, now, &self.cfg.association);
                    samples.push(StageSample {
                        stage: if integration.gated > 1 {
                            Stage::AssociationPath2
                        } else {
                            Stage::AssociationPath1
                        },
                        ms: ms_since(t0),
                    });
                    let t1 = Instant::now();
                    let (fate, landmark_id) = match integration.decision {
                        AssocDecision::NewLandmark(id) => (Fate::NewLandmark { landmark_id: id }, id),
                        AssocDecision::Matched { landmark_id, .. } => (
                            Fate::Matched {
                                landmark_id,
                                gated: integration.gated,
                            },
                            landmark_id,
                        ),
                    };
                    if integration.emit_observation {
                        self.observe(&cand, landmark_id, front.frame_id)?;
                        new_observations = true;
                    }
                    samples.push(StageSample {
                        stage: Stage::Update,
                        ms: ms_since(t1),
                    });
                    (fate, integration.emit_observation)
                }
            };
            self.candidates.push(CandidateRecord {
                frame_id: front.frame_id,
                tracklet: p.tracklet,
                fate: fate_and_obs.0,
                observed: fate_and_obs.1,
            });
        }

        self.frames_since_optimize += 1;
        self.pending_observations |= new_observations;
        if new_observations || self.frames_since_optimize >= self.cfg.optimize_every {
            let t0 = Instant::now();
            self.correct(front.frame_id)?;
            samples.push(StageSample {
                stage: Stage::Optimize,
                ms: ms_since(t0),
            });
        }
        if self.cfg.instrumentation {
            samples.push(StageSample {
                stage: Stage::Frame,
                ms: front.ms + ms_since(start),
            });
            self.trace.extend(samples);
        }
        Ok(())
    }

    fn observe(&mut self, cand: &Candidate<f64>, landmark_id: u64, frame: u64) -> Result<(), PipelineError> {
        let initial = self.map.get(landmark_id).expect("integrated landmark exists").centroid;
        let information = self.cfg.noise.information();
        for m in &cand.tracklet.measurements {
            let f = ObservationFactor {
                pose_id: m.frame_id,
                landmark_id,
                pixel: m.bbox.center(),
                information,
                intrinsics: self.cfg.camera,
            };
            self.graph
                .add_observation(f, &initial)
                .map_err(|source| PipelineError::Graph { frame, source })?;
        }
        Ok(())
    }

    /// Optimize, write landmark estimates back and merge overlapping landmarks.
    fn correct(&mut self, frame_id: u64) -> Result<(), PipelineError> {
        self.frames_since_optimize = 0;
        if self.graph.observations().is_empty() {
            return Ok(());
        }
        self.pending_observations = false;
        let report = self
            .graph
            .optimize(&self.cfg.solver)
            .map_err(|source| PipelineError::Numerical { frame: frame_id, source })?;
        apply_correction(&self.graph, &mut self.map);
        let landmarks_before_merge = self.map.len();
        let aliases = self.map.merge_overlapping(&self.cfg.association);
        for a in &aliases {
            self.graph.remap_landmark(a.old_id, a.kept_id);
        }
        if !aliases.is_empty() {
            log::debug!("frame {frame_id}: merged {} landmark(s)", aliases.len());
            // The merged centroid is a weighted mean; keep graph and map in step.
            for a in &aliases {
                if let Some(lm) = self.map.get(a.kept_id) {
                    self.graph.set_landmark(a.kept_id, lm.centroid);
                }
            }
        }
        self.corrections.push(CorrectionEvent {
            frame_id,
            report,
            landmarks_before_merge,
            aliases,
        });
        Ok(())
    }

    fn finish(mut self) -> Result<RunOutput, PipelineError> {
        let last = self.graph.poses().keys().next_back().copied().unwrap_or(0);
        if self.pending_observations || self.frames_since_optimize > 0 {
            self.correct(last)?;
        }
        let trajectory = Trajectory::new(
            self.graph
                .poses()
                .iter()
                .map(|(id, pose)| StampedPose {
                    timestamp: self.odometry.poses[*id as usize].timestamp,
                    pose: *pose,
                })
                .collect(),
        );
        Ok(RunOutput {
            trajectory,
            graph: self.graph,
            map: self.map,
            candidates: self.candidates,
            corrections: self.corrections,
            trace: self.trace,
        })
    }
}

/// Runs the whole loop over `frames`, which must be in frame order and index
/// `odometry`.
pub fn run(frames: &[FrameInput], odometry: &Trajectory<f64>, cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    if odometry.is_empty() {
        return Err(PipelineError::EmptyOdometry);
    }
    if cfg.threaded {
        return run_threaded(frames, odometry, cfg);
    }
    let mut front = FrontEnd::new(cfg, odometry);
    let mut back = BackEnd::new(cfg, odometry);
    for f in frames {
        back.process(front.process(f)?)?;
    }
    back.finish()
}

fn run_threaded(frames: &[FrameInput], odometry: &Trajectory<f64>, cfg: &PipelineConfig) -> Result<RunOutput, PipelineError> {
    let (tx, rx) = mpsc::sync_channel::<Result<FrontOutput, PipelineError>>(64);
    std::thread::scope(|s| {
        s.spawn(move || {
            let mut front = FrontEnd::new(cfg, odometry);
            for f in frames {
                let out = front.process(f);
                let failed = out.is_err();
                if tx.send(out).is_err() || failed {
                    break;
                }
            }
        });
        let mut back = BackEnd::new(cfg, odometry);
        for _ in frames {
            let out = rx.recv().map_err(|_| PipelineError::WorkerLost)??;
            back.process(out)?;
        }
        drop(rx);
        back.finish()
    })
}
