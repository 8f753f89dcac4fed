//! Text formats: TUM trajectories, detection logs, registries, landmark maps,
//! PLY clouds and g2o-style graph snapshots.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back parses to the same bits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Matrix6, Point3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::{Alias, LandmarkMap};
use crate::eval::MappedObject;
use crate::geometry::{CameraIntrinsics, Pixel, Pose, StampedPose, Trajectory};
use crate::posegraph::{prior_information, Graph, ObservationFactor};
use crate::simulator::RegistryObject;
use crate::tracker::{BoundingBox, Measurement};

/// Largest deviation of a quaternion norm from 1 that is silently repaired.
pub const QUATERNION_TOLERANCE: f64 = 1e-3;
/// Offset added to landmark ids to form graph vertex ids.
pub const LANDMARK_VERTEX_OFFSET: u64 = 1_000_000;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {0}: malformed record")]
    MalformedLine(usize),
    #[error("line {0}: quaternion is not unit length")]
    NonUnitQuaternion(usize),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error("invalid document: {0}")]
    Document(String),
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn comment_block(comments: &[String]) -> String {
    comments.iter().map(|c| format!("# {c}\n")).collect()
}

/// `timestamp tx ty tz qx qy qz qw` per line, preceded by `#` comments.
pub fn write_tum(traj: &Trajectory<f64>, comments: &[String]) -> String {
    let mut out = comment_block(comments);
    for p in &traj.poses {
        let t = p.pose.translation();
        let q = p.pose.rotation().coords;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            p.timestamp, t.x, t.y, t.z, q.x, q.y, q.z, q.w
        );
    }
    out
}

pub fn parse_tum(text: &str) -> Result<Trajectory<f64>, IoError> {
    let mut poses = Vec::new();
    for (no, line) in content_lines(text) {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| IoError::MalformedLine(no))?;
        if v.len() != 8 || v.iter().any(|x| !x.is_finite()) {
            return Err(IoError::MalformedLine(no));
        }
        let q = Quaternion::new(v[7], v[4], v[5], v[6]);
        let norm = q.norm();
        if (norm - 1.0).abs() > QUATERNION_TOLERANCE {
            return Err(IoError::NonUnitQuaternion(no));
        }
        let rotation = if norm == 1.0 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        poses.push(StampedPose {
            timestamp: v[0],
            pose: Pose::new(rotation, Vector3::new(v[1], v[2], v[3])),
        });
    }
    if poses.is_empty() {
        log::warn!("trajectory has no poses");
    }
    Ok(Trajectory::new(poses))
}

pub fn read_tum(path: &Path) -> Result<Trajectory<f64>, IoError> {
    parse_tum(&read_text(path)?)
}

/// One line of a detection log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub timestamp: f64,
    pub frame_id: u64,
    pub class_id: u32,
    pub confidence: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub depth_hint: f64,
}

impl From<&Measurement<f64>> for DetectionRecord {
    fn from(m: &Measurement<f64>) -> Self {
        Self {
            timestamp: m.timestamp,
            frame_id: m.frame_id,
            class_id: m.class_id,
            confidence: m.confidence,
            x_min: m.bbox.x_min,
            y_min: m.bbox.y_min,
            x_max: m.bbox.x_max,
            y_max: m.bbox.y_max,
            depth_hint: m.depth_hint,
        }
    }
}

/// JSON object per line; `#` lines are comments.
pub fn write_detections<'a, I: IntoIterator<Item = &'a Measurement<f64>>>(detections: I, comments: &[String]) -> String {
    let mut out = comment_block(comments);
    for m in detections {
        out.push_str(&serde_json::to_string(&DetectionRecord::from(m)).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_detections(text: &str) -> Result<Vec<Measurement<f64>>, IoError> {
    content_lines(text)
        .map(|(no, line)| {
            let r: DetectionRecord = serde_json::from_str(line).map_err(|e| IoError::BadRecord {
                line: no,
                message: e.to_string(),
            })?;
            let bbox = BoundingBox::new(r.x_min, r.y_min, r.x_max, r.y_max).map_err(|e| IoError::BadRecord {
                line: no,
                message: e.to_string(),
            })?;
            Ok(Measurement {
                timestamp: r.timestamp,
                frame_id: r.frame_id,
                class_id: r.class_id,
                confidence: r.confidence,
                bbox,
                depth_hint: r.depth_hint,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryDocument {
    pub config_hash: String,
    pub objects: Vec<RegistryObject>,
}

pub fn write_registry(objects: &[RegistryObject], config_hash: &str) -> String {
    let doc = RegistryDocument {
        config_hash: config_hash.to_string(),
        objects: objects.to_vec(),
    };
    serde_json::to_string_pretty(&doc).expect("registry serializes") + "\n"
}

pub fn parse_registry(text: &str) -> Result<Vec<RegistryObject>, IoError> {
    serde_json::from_str::<RegistryDocument>(text)
        .map(|d| d.objects)
        .map_err(|e| IoError::Document(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapEntry {
    pub id: u64,
    pub class_id: u32,
    pub centroid: [f64; 3],
    /// Meters.
    pub size: f64,
    pub n_fused: usize,
    pub cloud_points: usize,
}

/// Landmark map document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub config_hash: String,
    pub landmarks: Vec<MapEntry>,
    pub aliases: Vec<Alias>,
}

impl MapDocument {
    pub fn from_map(map: &LandmarkMap<f64>, config_hash: &str) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            landmarks: map
                .iter()
                .map(|l| MapEntry {
                    id: l.id,
                    class_id: l.class_id,
                    centroid: l.centroid.coords.into(),
                    size: l.size,
                    n_fused: l.n_fused,
                    cloud_points: l.cloud.len(),
                })
                .collect(),
            aliases: map.aliases().to_vec(),
        }
    }

    pub fn mapped_objects(&self) -> Vec<MappedObject> {
        self.landmarks
            .iter()
            .map(|l| MappedObject {
                id: l.id,
                class_id: l.class_id,
                centroid: l.centroid,
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes") + "\n"
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|e| IoError::Document(e.to_string()))
    }
}

/// ASCII PLY of all landmark clouds with a per-vertex landmark id.
pub fn write_ply(map: &LandmarkMap<f64>, config_hash: &str) -> String {
    let n: usize = map.iter().map(|l| l.cloud.len()).sum();
    let mut out = String::new();
    let _ = write!(
        out,
        "ply\nformat ascii 1.0\ncomment config_hash {config_hash}\nelement vertex {n}\n\
         property double x\nproperty double y\nproperty double z\nproperty uint landmark\nend_header\n"
    );
    for l in map.iter() {
        for p in &l.cloud.points {
            let _ = writeln!(out, "{} {} {} {}", p.x, p.y, p.z, l.id);
        }
    }
    out
}

/// Number of vertices declared in a PLY header.
pub fn ply_vertex_count(text: &str) -> Option<usize> {
    text.lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .and_then(|n| n.trim().parse().ok())
}

fn upper_triangle<const N: usize>(m: &nalgebra::SMatrix<f64, N, N>) -> Vec<f64> {
    let mut v = Vec::with_capacity(N * (N + 1) / 2);
    for i in 0..N {
        for j in i..N {
            v.push(m[(i, j)]);
        }
    }
    v
}

fn from_upper_triangle<const N: usize>(v: &[f64]) -> nalgebra::SMatrix<f64, N, N> {
    let mut m = nalgebra::SMatrix::<f64, N, N>::zeros();
    let mut k = 0;
    for i in 0..N {
        for j in i..N {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn pose_fields(p: &Pose<f64>) -> String {
    let t = p.translation();
    let q = p.rotation().coords;
    join(&[t.x, t.y, t.z, q.x, q.y, q.z, q.w])
}

/// g2o-style snapshot; see the repository README for the record grammar.
pub fn write_g2o(graph: &Graph<f64>, comments: &[String]) -> String {
    let mut out = comment_block(comments);
    for (id, p) in graph.poses() {
        let _ = writeln!(out, "VERTEX_SE3:QUAT {id} {}", pose_fields(p));
    }
    for (id, x) in graph.landmarks() {
        let _ = writeln!(out, "VERTEX_TRACKXYZ {} {}", id + LANDMARK_VERTEX_OFFSET, join(&[x.x, x.y, x.z]));
    }
    for f in graph.odometry() {
        let _ = writeln!(
            out,
            "EDGE_SE3:QUAT {} {} {} {}",
            f.from,
            f.to,
            pose_fields(&f.relative),
            join(&upper_triangle(&f.information))
        );
    }
    for f in graph.observations() {
        let k = &f.intrinsics;
        let _ = writeln!(
            out,
            "EDGE_PROJECT_XYZ2UV {} {} {} {} {} {}",
            f.pose_id,
            f.landmark_id + LANDMARK_VERTEX_OFFSET,
            join(&[f.pixel.u, f.pixel.v, k.fx, k.fy, k.cx, k.cy]),
            k.width,
            k.height,
            join(&upper_triangle(&f.information))
        );
    }
    if let Some(p) = graph.prior() {
        let _ = writeln!(out, "FIX {}", p.pose_id);
    }
    out
}

/// Reads a snapshot written by [`write_g2o`]. `FIX` becomes a prior at the
/// vertex estimate.
pub fn parse_g2o(text: &str) -> Result<Graph<f64>, IoError> {
    let mut g = Graph::new();
    let mut fixed = Vec::new();
    for (no, line) in content_lines(text) {
        let mut it = line.split_whitespace();
        let tag = it.next().ok_or(IoError::MalformedLine(no))?;
        let rest: Vec<&str> = it.collect();
        let ints = |i: usize| -> Result<u64, IoError> {
            rest.get(i).and_then(|s| s.parse().ok()).ok_or(IoError::MalformedLine(no))
        };
        let floats = |from: usize, n: usize| -> Result<Vec<f64>, IoError> {
            if rest.len() < from + n {
                return Err(IoError::MalformedLine(no));
            }
            rest[from..from + n]
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| IoError::MalformedLine(no)))
                .collect()
        };
        let pose_at = |from: usize| -> Result<Pose<f64>, IoError> {
            let v = floats(from, 7)?;
            let q = Quaternion::new(v[6], v[3], v[4], v[5]);
            if (q.norm() - 1.0).abs() > QUATERNION_TOLERANCE {
                return Err(IoError::NonUnitQuaternion(no));
            }
            Ok(Pose::new(UnitQuaternion::new_unchecked(q), Vector3::new(v[0], v[1], v[2])))
        };
        let landmark_id = |v: u64| v.checked_sub(LANDMARK_VERTEX_OFFSET).ok_or(IoError::MalformedLine(no));
        let expect_len = |n: usize| if rest.len() == n { Ok(()) } else { Err(IoError::MalformedLine(no)) };
        match tag {
            "VERTEX_SE3:QUAT" => {
                expect_len(8)?;
                g.set_pose(ints(0)?, pose_at(1)?);
            }
            "VERTEX_TRACKXYZ" => {
                expect_len(4)?;
                let v = floats(1, 3)?;
                g.set_landmark(landmark_id(ints(0)?)?, Point3::new(v[0], v[1], v[2]));
            }
            "EDGE_SE3:QUAT" => {
                expect_len(2 + 7 + 21)?;
                let info: Matrix6<f64> = from_upper_triangle(&floats(9, 21)?);
                g.add_odometry(ints(0)?, ints(1)?, pose_at(2)?, info)
                    .map_err(|e| IoError::BadRecord {
                        line: no,
                        message: e.to_string(),
                    })?;
            }
            "EDGE_PROJECT_XYZ2UV" => {
                expect_len(2 + 6 + 2 + 3)?;
                let v = floats(2, 6)?;
                let (w, h) = (ints(8)?, ints(9)?);
                let info: Matrix2<f64> = from_upper_triangle(&floats(10, 3)?);
                let lm = landmark_id(ints(1)?)?;
                let init = g.landmark(lm).copied().ok_or(IoError::BadRecord {
                    line: no,
                    message: format!("landmark {lm} has no vertex"),
                })?;
                let f = ObservationFactor {
                    pose_id: ints(0)?,
                    landmark_id: lm,
                    pixel: Pixel::new(v[0], v[1]),
                    information: info,
                    intrinsics: CameraIntrinsics {
                        fx: v[2],
                        fy: v[3],
                        cx: v[4],
                        cy: v[5],
                        width: w as u32,
                        height: h as u32,
                    },
                };
                g.add_observation(f, &init).map_err(|e| IoError::BadRecord {
                    line: no,
                    message: e.to_string(),
                })?;
            }
            "FIX" => {
                expect_len(1)?;
                fixed.push((no, ints(0)?));
            }
            _ => return Err(IoError::MalformedLine(no)),
        }
    }
    for (no, id) in fixed {
        let pose = *g.pose(id).ok_or(IoError::BadRecord {
            line: no,
            message: format!("pose {id} has no vertex"),
        })?;
        g.set_prior(id, pose, prior_information());
    }
    Ok(g)
}
