//! Pipeline configuration and its TOML form.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::association::AssocConfig;
use crate::candidate::{CuboidSource, McConfig, NoiseModel};
use crate::geometry::CameraIntrinsics;
use crate::posegraph::LmConfig;
use crate::tracker::TrackerConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Every tunable of the mapping pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig<f64>,
    /// Pixel noise of box centers, used by localization and by the pose graph.
    pub noise: NoiseModel<f64>,
    /// Random-walk settings; its `seed` is replaced by the top-level `seed`.
    pub mc: McConfig<f64>,
    pub association: AssocConfig<f64>,
    pub solver: LmConfig<f64>,
    /// Meters.
    pub mad_threshold: f64,
    pub cuboid: CuboidSource,
    pub camera: CameraIntrinsics<f64>,
    /// Odometry noise per step, meters and radians.
    pub odometry_sigma_t: f64,
    pub odometry_sigma_r: f64,
    /// Frames between scheduled optimizations.
    pub optimize_every: usize,
    /// Record per-stage timings.
    pub instrumentation: bool,
    /// Run tracking and mapping on two threads.
    pub threaded: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tracker: TrackerConfig::default(),
            noise: NoiseModel::default(),
            mc: McConfig::default(),
            association: AssocConfig::default(),
            solver: LmConfig::default(),
            mad_threshold: 0.15,
            cuboid: CuboidSource::default(),
            camera: CameraIntrinsics {
                fx: 525.0,
                fy: 525.0,
                cx: 319.5,
                cy: 239.5,
                width: 640,
                height: 480,
            },
            odometry_sigma_t: 0.005,
            odometry_sigma_r: 0.1f64.to_radians(),
            optimize_every: 10,
            instrumentation: true,
            threaded: false,
            seed: 0,
        }
    }
}

/// 1-based line and column of byte offset `at` in `text`.
pub fn line_column(text: &str, at: usize) -> (usize, usize) {
    let before = &text[..at.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            ConfigError::Parse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.tracker.sigma_iou > 0.0 && self.tracker.sigma_iou <= 1.0) {
            return bad("tracker.sigma_iou must lie in (0, 1]");
        }
        if self.tracker.min_distance > self.tracker.max_distance {
            return bad("tracker distance bounds are reversed");
        }
        if !(self.association.u > 0.0) {
            return bad("association.u must be positive");
        }
        if !self.noise.is_valid() {
            return bad("noise covariance must be symmetric positive definite");
        }
        if !(self.mad_threshold > 0.0) {
            return bad("mad_threshold must be positive");
        }
        if !(self.odometry_sigma_t > 0.0 && self.odometry_sigma_r > 0.0) {
            return bad("odometry sigmas must be positive");
        }
        if self.optimize_every == 0 {
            return bad("optimize_every must be at least 1");
        }
        self.camera
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Localization settings with the pipeline seed applied.
    pub fn effective_mc(&self) -> McConfig<f64> {
        McConfig {
            seed: self.seed,
            ..self.mc
        }
    }
}

/// Hex SHA-256 of the config text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_configuration() {
        let c = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(c.tracker.sigma_iou, 0.2);
        assert_eq!(c.tracker.min_tracklet_size, 5);
        assert_eq!(c.tracker.max_gap, 0.5);
        assert_eq!(c.tracker.min_confidence, 0.4);
        assert_eq!((c.tracker.min_distance, c.tracker.max_distance), (0.2, 25.0));
        assert_eq!(c.association.u, 10.0);
        assert_eq!(c.association.min_reobservation_interval, 2.0);
        assert_eq!(c.mad_threshold, 0.15);
        assert_eq!(c.optimize_every, 10);
    }

    #[test]
    fn round_trip() {
        let mut c = PipelineConfig::default();
        c.seed = 42;
        c.association.u = 7.5;
        c.solver.huber_px = 0.0;
        let back = PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_override() {
        let c = PipelineConfig::from_toml_str("seed = 3\n[tracker]\nsigma_iou = 0.3\n").unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.tracker.sigma_iou, 0.3);
        assert_eq!(c.tracker.min_tracklet_size, 5);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = PipelineConfig::from_toml_str("seed = 1\n[tracker]\nsigma_iou = = 2\n").unwrap_err();
        match err {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            PipelineConfig::from_toml_str("bogus = 1\n"),
            Err(ConfigError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            PipelineConfig::from_toml_str("[association]\nu = -1.0\n"),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            config_hash(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(config_hash("seed = 1\n"), config_hash("seed = 1\n"));
        assert_ne!(config_hash("seed = 1\n"), config_hash("seed = 2\n"));
    }

    #[test]
    fn line_column_examples() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
