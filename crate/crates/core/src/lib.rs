//! Semantic landmark mapping from 2D object detections and camera odometry.
//!
//! Detections are tracked into tracklets, validated and localized in 3D,
//! associated against a landmark map, and fed back into a pose graph that
//! corrects odometry drift. A deterministic simulator and trajectory metrics
//! close the loop for testing.
//!
//! The numeric core is generic over `f32`/`f64` through [`scalar::Real`];
//! the aliases below fix the scalar to `f64`, which the pipeline uses.

pub mod association;
pub mod candidate;
pub mod commands;
pub mod config;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod posegraph;
pub mod scalar;
pub mod simulator;
pub mod tracker;

pub type Pose = geometry::Pose<f64>;
pub type Pixel = geometry::Pixel<f64>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type PointCloud = geometry::PointCloud<f64>;
pub type Trajectory = geometry::Trajectory<f64>;
pub type StampedPose = geometry::StampedPose<f64>;
pub type BoundingBox = tracker::BoundingBox<f64>;
pub type Measurement = tracker::Measurement<f64>;
pub type Tracklet = tracker::Tracklet<f64>;
pub type TrackerConfig = tracker::TrackerConfig<f64>;
pub type Candidate = candidate::Candidate<f64>;
pub type Landmark = association::Landmark<f64>;
pub type LandmarkMap = association::LandmarkMap<f64>;
pub type AssocConfig = association::AssocConfig<f64>;
pub type Graph = posegraph::Graph<f64>;
pub type LmConfig = posegraph::LmConfig<f64>;
pub type SolveReport = posegraph::SolveReport<f64>;

pub use config::PipelineConfig;
