//! Synthetic scenes: box-shaped objects, a moving pinhole camera, noisy
//! detections and drifting odometry.
//!
//! The world is z-up. Randomness is keyed by `(seed, frame_id)` for the
//! detections and by `seed` alone for odometry, so frames can be rendered in
//! any order and still give identical output.

use nalgebra::{Point3, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Pixel, Pose, StampedPose, Trajectory};
use crate::tracker::{BoundingBox, Measurement, TrackerConfig};

/// RNG stream reserved for odometry noise.
const ODOMETRY_STREAM: u64 = u64::MAX;
/// Confidence reported for true detections.
const TRUE_CONFIDENCE: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("no object stays visible for {0} consecutive frames")]
    IllPosedScenario(usize),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    #[default]
    Static,
    /// Constant velocity, m/s.
    Linear { velocity: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub class_id: u32,
    /// Position at t = 0.
    pub center: [f64; 3],
    /// Full side lengths along x, y, z.
    pub extent: [f64; 3],
    #[serde(default)]
    pub motion: Motion,
}

impl ObjectSpec {
    pub fn center_at(&self, t: f64) -> Point3<f64> {
        let c = Point3::from(self.center);
        match self.motion {
            Motion::Static => c,
            Motion::Linear { velocity } => c + Vector3::from(velocity) * t,
        }
    }

    pub fn speed(&self) -> f64 {
        match self.motion {
            Motion::Static => 0.0,
            Motion::Linear { velocity } => Vector3::from(velocity).norm(),
        }
    }

    fn corners_at(&self, t: f64) -> [Point3<f64>; 8] {
        let c = self.center_at(t);
        let h = Vector3::from(self.extent) * 0.5;
        let mut out = [c; 8];
        for (i, p) in out.iter_mut().enumerate() {
            let s = |bit: usize| if i & bit == 0 { -1.0 } else { 1.0 };
            *p = c + Vector3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Look {
    /// Keep a fixed world point centered.
    At { point: [f64; 3] },
    /// Face away from the orbit center, aiming at this height.
    Outward { height: f64 },
    /// Face the direction of travel.
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySpec {
    /// Circle around `center` at `height` above it, `turns` over the whole run.
    Orbit {
        center: [f64; 3],
        radius: f64,
        height: f64,
        turns: f64,
        #[serde(default)]
        phase: f64,
        look: Look,
    },
    /// Polyline traversed at constant speed; the camera stops at the last point.
    Waypoints {
        points: Vec<[f64; 3]>,
        speed: f64,
        look: Look,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    pub objects: Vec<ObjectSpec>,
    pub trajectory: TrajectorySpec,
    pub camera: CameraIntrinsics<f64>,
    /// Seconds.
    pub duration: f64,
    /// Hz.
    pub frame_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoiseSpec {
    /// Pixels.
    pub box_center_sigma: f64,
    /// Pixels.
    pub box_size_sigma: f64,
    /// Probability of one false positive per frame.
    pub false_positive_rate: f64,
    pub missed_detection_rate: f64,
    /// Probability that a box loses part of one side, as by an occluder.
    pub truncation_rate: f64,
    /// Meters.
    pub depth_sigma: f64,
    /// Meters per step.
    pub odom_translation_sigma: f64,
    /// Radians per step.
    pub odom_rotation_sigma: f64,
    /// Constant heading error added to every step, radians per step.
    pub odom_yaw_bias: f64,
    pub seed: u64,
}

impl Default for SensorNoiseSpec {
    fn default() -> Self {
        Self {
            box_center_sigma: 0.0,
            box_size_sigma: 0.0,
            false_positive_rate: 0.0,
            missed_detection_rate: 0.0,
            truncation_rate: 0.0,
            depth_sigma: 0.0,
            odom_translation_sigma: 0.0,
            odom_rotation_sigma: 0.0,
            odom_yaw_bias: 0.0,
            seed: 0,
        }
    }
}

impl SensorNoiseSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let rates = [
            self.false_positive_rate,
            self.missed_detection_rate,
            self.truncation_rate,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(SimError::Invalid("rates must lie in [0, 1]".into()));
        }
        let sigmas = [
            self.box_center_sigma,
            self.box_size_sigma,
            self.depth_sigma,
            self.odom_translation_sigma,
            self.odom_rotation_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(SimError::Invalid("sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// World and sensor settings stored together in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub world: WorldSpec,
    pub noise: SensorNoiseSpec,
}

impl WorldSpec {
    pub fn frame_count(&self) -> usize {
        (self.duration * self.frame_rate).round().max(0.0) as usize
    }

    pub fn timestamp(&self, frame_id: u64) -> f64 {
        frame_id as f64 / self.frame_rate
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration > 0.0) || !(self.frame_rate > 0.0) {
            return Err(SimError::Invalid("duration and frame rate must be positive".into()));
        }
        if self.objects.iter().any(|o| o.extent.iter().any(|e| !(*e > 0.0))) {
            return Err(SimError::Invalid("object extents must be positive".into()));
        }
        self.camera
            .validate()
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        if let TrajectorySpec::Waypoints { points, speed, .. } = &self.trajectory {
            if points.is_empty() || !(*speed > 0.0) {
                return Err(SimError::Invalid("waypoint paths need points and a positive speed".into()));
            }
        }
        Ok(())
    }

    /// Ground-truth camera-to-world pose at time `t`.
    pub fn camera_pose(&self, t: f64) -> Pose<f64> {
        let up = Vector3::z();
        match &self.trajectory {
            TrajectorySpec::Orbit {
                center,
                radius,
                height,
                turns,
                phase,
                look,
            } => {
                let c = Point3::from(*center);
                let phi = phase + std::f64::consts::TAU * turns * t / self.duration;
                let radial = Vector3::new(phi.cos(), phi.sin(), 0.0);
                let eye = c + radial * *radius + Vector3::z() * *height;
                let tangent = Vector3::new(-phi.sin(), phi.cos(), 0.0) * turns.signum();
                let target = match look {
                    Look::At { point } => Point3::from(*point),
                    Look::Outward { height: h } => {
                        let mut p = c + radial * (2.0 * radius);
                        p.z = *h;
                        p
                    }
                    Look::Forward => eye + tangent,
                };
                Pose::look_at(&eye, &target, &up)
            }
            TrajectorySpec::Waypoints { points, speed, look } => {
                let (eye, dir) = along_polyline(points, speed * t);
                let target = match look {
                    Look::At { point } => Point3::from(*point),
                    Look::Outward { height } => Point3::new(2.0 * eye.x, 2.0 * eye.y, *height),
                    Look::Forward => eye + dir,
                };
                Pose::look_at(&eye, &target, &up)
            }
        }
    }

    /// Ground-truth trajectory at every frame.
    pub fn ground_truth(&self) -> Trajectory<f64> {
        Trajectory::new(
            (0..self.frame_count() as u64)
                .map(|k| {
                    let timestamp = self.timestamp(k);
                    StampedPose {
                        timestamp,
                        pose: self.camera_pose(timestamp),
                    }
                })
                .collect(),
        )
    }

    /// Exact image box of object `i` at time `t`, or `None` when any part is
    /// behind the camera or outside the image.
    pub fn true_box(&self, i: usize, pose: &Pose<f64>, t: f64) -> Option<(BoundingBox<f64>, f64)> {
        let obj = &self.objects[i];
        let k = &self.camera;
        let mut lo = Vector3::new(f64::INFINITY, f64::INFINITY, 0.0);
        let mut hi = Vector3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
        for corner in obj.corners_at(t) {
            let pc = pose.inverse_transform_point(&corner);
            if pc.z <= 1e-3 {
                return None;
            }
            let px = k.project_camera(&pc);
            lo.x = lo.x.min(px.u);
            lo.y = lo.y.min(px.v);
            hi.x = hi.x.max(px.u);
            hi.y = hi.y.max(px.v);
        }
        let pc = pose.inverse_transform_point(&obj.center_at(t));
        let c = k.project_camera(&pc);
        let b = BoundingBox::from_center(c, hi.x - lo.x, hi.y - lo.y).ok()?;
        let inside = b.x_min >= 0.0 && b.y_min >= 0.0 && b.x_max <= k.width as f64 && b.y_max <= k.height as f64;
        inside.then_some((b, pc.z))
    }

    fn class_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.objects.iter().map(|o| o.class_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

fn along_polyline(points: &[[f64; 3]], mut s: f64) -> (Point3<f64>, Vector3<f64>) {
    let mut dir = Vector3::x();
    for w in points.windows(2) {
        let (a, b) = (Point3::from(w[0]), Point3::from(w[1]));
        let seg = b - a;
        let len = seg.norm();
        if len <= 0.0 {
            continue;
        }
        dir = seg / len;
        if s <= len {
            return (a + dir * s, dir);
        }
        s -= len;
    }
    (Point3::from(*points.last().expect("validated nonempty")), dir)
}

/// Where a rendered detection came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Object(usize),
    FalsePositive,
}

fn frame_rng(seed: u64, frame_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame_id);
    rng
}

fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * sigma
}

/// Noisy detections of frame `frame_id`, in object order with any false
/// positive last.
pub fn render_detections(
    world: &WorldSpec,
    noise: &SensorNoiseSpec,
    frame_id: u64,
) -> (Vec<Measurement<f64>>, Vec<Origin>) {
    let t = world.timestamp(frame_id);
    let pose = world.camera_pose(t);
    let k = &world.camera;
    let mut rng = frame_rng(noise.seed, frame_id);
    let mut out = Vec::new();
    let mut origins = Vec::new();
    for (i, obj) in world.objects.iter().enumerate() {
        // Draw every variate so the stream position does not depend on visibility.
        let miss = rng.random::<f64>() < noise.missed_detection_rate;
        let (du, dv) = (normal(&mut rng, noise.box_center_sigma), normal(&mut rng, noise.box_center_sigma));
        let (dw, dh) = (normal(&mut rng, noise.box_size_sigma), normal(&mut rng, noise.box_size_sigma));
        let dz = normal(&mut rng, noise.depth_sigma);
        let truncate = rng.random::<f64>() < noise.truncation_rate;
        let side = rng.random_range(0..4u8);
        let cut = rng.random_range(0.1..0.4);
        if miss {
            continue;
        }
        let Some((b, depth)) = world.true_box(i, &pose, t) else {
            continue;
        };
        let c = b.center();
        let w = (b.width() + dw).max(2.0);
        let h = (b.height() + dh).max(2.0);
        let Ok(mut bbox) = BoundingBox::from_center(Pixel::new(c.u + du, c.v + dv), w, h) else {
            continue;
        };
        if truncate {
            match side {
                0 => bbox.x_min += cut * w,
                1 => bbox.x_max -= cut * w,
                2 => bbox.y_min += cut * h,
                _ => bbox.y_max -= cut * h,
            }
        }
        let Some(bbox) = bbox.clamped(k.width, k.height) else {
            continue;
        };
        out.push(Measurement {
            timestamp: t,
            frame_id,
            class_id: obj.class_id,
            confidence: TRUE_CONFIDENCE,
            bbox,
            depth_hint: depth + dz,
        });
        origins.push(Origin::Object(i));
    }
    let fp = rng.random::<f64>() < noise.false_positive_rate;
    let classes = world.class_ids();
    let class_id = if classes.is_empty() {
        0
    } else {
        classes[rng.random_range(0..classes.len())]
    };
    let (w, h) = (rng.random_range(20.0..120.0), rng.random_range(20.0..120.0));
    let (u, v) = (rng.random_range(0.0..k.width as f64), rng.random_range(0.0..k.height as f64));
    let confidence = rng.random_range(0.4..1.0);
    let depth = rng.random_range(0.5..5.0);
    if fp {
        if let Some(bbox) = BoundingBox::from_center(Pixel::new(u, v), w, h)
            .ok()
            .and_then(|b| b.clamped(k.width, k.height))
        {
            out.push(Measurement {
                timestamp: t,
                frame_id,
                class_id,
                confidence,
                bbox,
                depth_hint: depth,
            });
            origins.push(Origin::FalsePositive);
        }
    }
    (out, origins)
}

/// Integrates ground-truth relative motion with tangent-space noise; the
/// first pose is exact.
pub fn drift_odometry(gt: &[Pose<f64>], noise: &SensorNoiseSpec) -> Vec<Pose<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(ODOMETRY_STREAM);
    let Some(first) = gt.first() else {
        return Vec::new();
    };
    if noise.odom_translation_sigma == 0.0 && noise.odom_rotation_sigma == 0.0 && noise.odom_yaw_bias == 0.0 {
        return gt.to_vec();
    }
    let mut out = Vec::with_capacity(gt.len());
    out.push(*first);
    for w in gt.windows(2) {
        let rel = w[0].between(&w[1]);
        let mut d = Vector6::zeros();
        for i in 0..3 {
            d[i] = normal(&mut rng, noise.odom_translation_sigma);
        }
        for i in 3..6 {
            d[i] = normal(&mut rng, noise.odom_rotation_sigma);
        }
        // Camera y points down in the world, so a turn about −y is a left yaw.
        let bias = UnitQuaternion::from_scaled_axis(Vector3::new(0.0, -noise.odom_yaw_bias, 0.0));
        let r = rel.retract(&d);
        let noisy = Pose::new(bias * r.rotation(), *r.translation());
        let last = *out.last().expect("nonempty");
        out.push(last.compose(&noisy));
    }
    out
}

/// Ground-truth record of one simulated object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistryObject {
    pub id: usize,
    pub class_id: u32,
    /// Position at t = 0.
    pub center: [f64; 3],
    /// Position at the end of the run.
    pub end_center: [f64; 3],
    pub extent: [f64; 3],
    pub dynamic: bool,
    /// m/s.
    pub speed: f64,
}

impl RegistryObject {
    pub fn max_extent(&self) -> f64 {
        self.extent.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub detections: Vec<Measurement<f64>>,
    pub origins: Vec<Origin>,
}

/// Everything the pipeline and the evaluator need for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub ground_truth: Trajectory<f64>,
    pub odometry: Trajectory<f64>,
    pub frames: Vec<SimFrame>,
    pub registry: Vec<RegistryObject>,
}

impl Bundle {
    /// Origin of a logged detection, found by frame and exact box.
    pub fn origin_of(&self, m: &Measurement<f64>) -> Option<Origin> {
        let frame = self.frames.get(m.frame_id as usize)?;
        frame
            .detections
            .iter()
            .position(|d| d.bbox == m.bbox && d.class_id == m.class_id)
            .map(|i| frame.origins[i])
    }
}

/// Longest run of consecutive frames in which some object is fully visible
/// within the tracker's range bounds.
pub fn longest_visible_run(world: &WorldSpec, cfg: &TrackerConfig<f64>) -> usize {
    let n = world.frame_count() as u64;
    let mut best = 0;
    for i in 0..world.objects.len() {
        let mut run = 0;
        for k in 0..n {
            let t = world.timestamp(k);
            let ok = world
                .true_box(i, &world.camera_pose(t), t)
                .is_some_and(|(_, z)| z >= cfg.min_distance && z <= cfg.max_distance);
            run = if ok { run + 1 } else { 0 };
            best = best.max(run);
        }
    }
    best
}

pub fn ground_truth_bundle(world: &WorldSpec, noise: &SensorNoiseSpec) -> Result<Bundle, SimError> {
    world.validate()?;
    noise.validate()?;
    let cfg = TrackerConfig::default();
    if longest_visible_run(world, &cfg) < cfg.min_tracklet_size {
        return Err(SimError::IllPosedScenario(cfg.min_tracklet_size));
    }
    let ground_truth = world.ground_truth();
    let gt_poses: Vec<Pose<f64>> = ground_truth.poses.iter().map(|p| p.pose).collect();
    let odometry = Trajectory::new(
        drift_odometry(&gt_poses, noise)
            .into_iter()
            .zip(ground_truth.timestamps())
            .map(|(pose, timestamp)| StampedPose { timestamp, pose })
            .collect(),
    );
    let frames = (0..world.frame_count() as u64)
        .map(|k| {
            let (detections, origins) = render_detections(world, noise, k);
            SimFrame {
                frame_id: k,
                timestamp: world.timestamp(k),
                detections,
                origins,
            }
        })
        .collect();
    let registry = world
        .objects
        .iter()
        .enumerate()
        .map(|(id, o)| RegistryObject {
            id,
            class_id: o.class_id,
            center: o.center,
            end_center: o.center_at(world.duration).coords.into(),
            extent: o.extent,
            dynamic: !matches!(o.motion, Motion::Static),
            speed: o.speed(),
        })
        .collect();
    Ok(Bundle {
        ground_truth,
        odometry,
        frames,
        registry,
    })
}

/// Names accepted by [`preset`].
pub const PRESETS: [&str; 5] = ["desk", "desk-clean", "desk-drift", "walking", "loop"];

fn tum_camera() -> CameraIntrinsics<f64> {
    CameraIntrinsics {
        fx: 525.0,
        fy: 525.0,
        cx: 319.5,
        cy: 239.5,
        width: 640,
        height: 480,
    }
}

fn obj(class_id: u32, center: [f64; 3], extent: [f64; 3]) -> ObjectSpec {
    ObjectSpec {
        class_id,
        center,
        extent,
        motion: Motion::Static,
    }
}

fn desk_world() -> WorldSpec {
    WorldSpec {
        objects: vec![
            obj(1, [0.3, 0.2, 0.06], [0.08, 0.08, 0.12]),
            obj(2, [-0.4, 0.3, 0.03], [0.25, 0.18, 0.06]),
            obj(3, [0.0, -0.5, 0.25], [0.5, 0.1, 0.35]),
            obj(4, [0.0, 0.0, 0.025], [0.45, 0.15, 0.05]),
            obj(5, [0.5, -0.3, 0.125], [0.07, 0.07, 0.25]),
            obj(6, [-0.6, -0.4, 0.2], [0.25, 0.25, 0.4]),
            obj(1, [-0.7, 0.5, 0.06], [0.08, 0.08, 0.12]),
            obj(2, [0.6, 0.6, 0.03], [0.25, 0.18, 0.06]),
        ],
        trajectory: TrajectorySpec::Orbit {
            center: [0.0, 0.0, 0.0],
            radius: 2.0,
            height: 1.0,
            turns: 2.0,
            phase: 0.0,
            look: Look::At { point: [0.0, 0.0, 0.1] },
        },
        camera: tum_camera(),
        duration: 120.0,
        frame_rate: 5.0,
    }
}

fn detector_noise(seed: u64) -> SensorNoiseSpec {
    SensorNoiseSpec {
        box_center_sigma: 1.0,
        box_size_sigma: 1.0,
        false_positive_rate: 0.05,
        missed_detection_rate: 0.05,
        truncation_rate: 0.0,
        depth_sigma: 0.01,
        seed,
        ..SensorNoiseSpec::default()
    }
}

fn walking_world() -> WorldSpec {
    let person = |x: f64, y: f64, vx: f64, vy: f64| ObjectSpec {
        class_id: 9,
        center: [x, y, 0.85],
        extent: [0.6, 0.4, 1.7],
        motion: Motion::Linear { velocity: [vx, vy, 0.0] },
    };
    let mut world = desk_world();
    world.objects.truncate(6);
    world.objects.push(person(-3.0, 0.6, 0.6, 0.0));
    world.objects.push(person(0.8, -4.0, 0.0, 0.8));
    world.objects.push(person(3.0, -0.3, -1.0, 0.0));
    world.trajectory = TrajectorySpec::Orbit {
        center: [0.0, 0.0, 0.0],
        radius: 3.5,
        height: 1.0,
        turns: 0.1,
        phase: -0.5 * std::f64::consts::FRAC_PI_2,
        look: Look::At { point: [0.0, 0.0, 0.5] },
    };
    world.duration = 10.0;
    world.frame_rate = 3.0;
    world
}

fn loop_world() -> WorldSpec {
    let mut objects = Vec::new();
    // Closing region at angle 0: two large pieces and a small one.
    objects.push(obj(10, [6.0, -1.2, 0.75], [0.6, 1.8, 1.5]));
    objects.push(obj(11, [6.0, 1.4, 0.5], [0.8, 1.6, 1.0]));
    objects.push(obj(1, [5.2, 0.1, 0.4], [0.3, 0.3, 0.3]));
    // Objects along the rest of the loop, seen on a single pass.
    for (i, angle) in [60.0f64, 120.0, 180.0, 240.0, 300.0].iter().enumerate() {
        let a = angle.to_radians();
        objects.push(obj(20 + i as u32, [5.5 * a.cos(), 5.5 * a.sin(), 0.5], [0.6, 0.6, 1.0]));
    }
    WorldSpec {
        objects,
        trajectory: TrajectorySpec::Orbit {
            center: [0.0, 0.0, 0.0],
            radius: 2.0,
            height: 1.2,
            turns: 1.15,
            phase: -0.35,
            look: Look::Outward { height: 0.6 },
        },
        camera: tum_camera(),
        duration: 90.0,
        frame_rate: 5.0,
    }
}

/// Built-in scenario by name; see [`PRESETS`].
pub fn preset(name: &str, seed: u64) -> Option<Scenario> {
    let scenario = match name {
        "desk" => Scenario {
            world: desk_world(),
            noise: detector_noise(seed),
        },
        "desk-clean" => Scenario {
            world: desk_world(),
            noise: SensorNoiseSpec {
                seed,
                ..SensorNoiseSpec::default()
            },
        },
        "desk-drift" => Scenario {
            world: desk_world(),
            noise: SensorNoiseSpec {
                odom_translation_sigma: 0.005,
                odom_rotation_sigma: 0.1f64.to_radians(),
                ..detector_noise(seed)
            },
        },
        "walking" => Scenario {
            world: walking_world(),
            noise: SensorNoiseSpec {
                odom_translation_sigma: 0.002,
                odom_rotation_sigma: 0.05f64.to_radians(),
                ..detector_noise(seed)
            },
        },
        "loop" => Scenario {
            world: loop_world(),
            noise: SensorNoiseSpec {
                odom_translation_sigma: 0.002,
                odom_rotation_sigma: 0.02f64.to_radians(),
                odom_yaw_bias: 0.06f64.to_radians(),
                ..detector_noise(seed)
            },
        },
        _ => return None,
    };
    Some(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single_cube() -> WorldSpec {
        WorldSpec {
            objects: vec![obj(1, [0.0, 0.0, 0.0], [0.2, 0.2, 0.2])],
            trajectory: TrajectorySpec::Waypoints {
                points: vec![[0.0, -2.0, 0.0], [0.1, -2.0, 0.0]],
                speed: 0.01,
                look: Look::At { point: [0.0, 0.0, 0.0] },
            },
            camera: tum_camera(),
            duration: 2.0,
            frame_rate: 5.0,
        }
    }

    #[test]
    fn zero_noise_cube_is_centered_on_its_projection() {
        let w = single_cube();
        let (d, o) = render_detections(&w, &SensorNoiseSpec::default(), 0);
        assert_eq!(d.len(), 1);
        assert_eq!(o, vec![Origin::Object(0)]);
        let pose = w.camera_pose(0.0);
        let px = crate::geometry::project(&Point3::origin(), &pose, &w.camera).unwrap();
        let c = d[0].bbox.center();
        assert_relative_eq!(c.u, px.u, epsilon = 1e-9);
        assert_relative_eq!(c.v, px.v, epsilon = 1e-9);
        assert_relative_eq!(d[0].depth_hint, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn always_missing_renders_nothing() {
        let noise = SensorNoiseSpec {
            missed_detection_rate: 1.0,
            ..SensorNoiseSpec::default()
        };
        for k in 0..10 {
            assert!(render_detections(&single_cube(), &noise, k).0.is_empty());
        }
    }

    #[test]
    fn false_positive_count_within_binomial_bound() {
        let mut w = single_cube();
        w.duration = 200.0;
        let noise = SensorNoiseSpec {
            false_positive_rate: 0.5,
            seed: 17,
            ..SensorNoiseSpec::default()
        };
        let n = 1000u64;
        let count = (0..n)
            .map(|k| {
                render_detections(&w, &noise, k)
                    .1
                    .iter()
                    .filter(|o| **o == Origin::FalsePositive)
                    .count()
            })
            .sum::<usize>() as f64;
        let (mean, sd) = (n as f64 * 0.5, (n as f64 * 0.25).sqrt());
        assert!((count - mean).abs() <= 3.0 * sd, "{count}");
    }

    #[test]
    fn zero_noise_odometry_is_exact() {
        let gt: Vec<_> = desk_world().ground_truth().poses.iter().map(|p| p.pose).collect();
        let odo = drift_odometry(&gt, &SensorNoiseSpec::default());
        assert_eq!(odo, gt);
    }

    #[test]
    fn odometry_drift_grows_with_path_length() {
        let gt: Vec<Pose<f64>> = (0..401)
            .map(|i| Pose::from_translation(Vector3::new(0.05 * i as f64, 0.0, 0.0)))
            .collect();
        let lengths = [25usize, 100, 400];
        let mut mean_err = [0.0; 3];
        for seed in 0..10 {
            let noise = SensorNoiseSpec {
                odom_translation_sigma: 0.01,
                seed,
                ..SensorNoiseSpec::default()
            };
            let odo = drift_odometry(&gt, &noise);
            for (j, n) in lengths.iter().enumerate() {
                let sq: f64 = (0..=*n)
                    .map(|i| (odo[i].translation() - gt[i].translation()).norm_squared())
                    .sum();
                mean_err[j] += (sq / (*n + 1) as f64).sqrt() / 10.0;
            }
        }
        assert!(mean_err[0] < mean_err[1] && mean_err[1] < mean_err[2], "{mean_err:?}");
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let s = preset("desk-drift", 3).unwrap();
        let a = ground_truth_bundle(&s.world, &s.noise).unwrap();
        let b = ground_truth_bundle(&s.world, &s.noise).unwrap();
        assert_eq!(a, b);
        let c = ground_truth_bundle(&s.world, &SensorNoiseSpec { seed: 4, ..s.noise }).unwrap();
        assert_ne!(a.odometry, c.odometry);
    }

    #[test]
    fn presets_generate() {
        for name in PRESETS {
            let s = preset(name, 0).unwrap();
            let b = ground_truth_bundle(&s.world, &s.noise).unwrap();
            assert_eq!(b.registry.len(), s.world.objects.len());
            assert_eq!(b.frames.len(), s.world.frame_count());
        }
        assert_eq!(preset("desk", 0).unwrap().world.objects.len(), 8);
        assert!(preset("nope", 0).is_none());
    }

    #[test]
    fn walking_people_cross_the_view() {
        let s = preset("walking", 0).unwrap();
        let b = ground_truth_bundle(&s.world, &s.noise).unwrap();
        let dynamic: Vec<usize> = b.registry.iter().filter(|r| r.dynamic).map(|r| r.id).collect();
        assert!(!dynamic.is_empty());
        assert!(b.registry.iter().filter(|r| r.dynamic).all(|r| r.speed >= 0.5));
        let seen = b
            .frames
            .iter()
            .flat_map(|f| f.origins.iter())
            .filter(|o| matches!(o, Origin::Object(i) if dynamic.contains(i)))
            .count();
        assert!(seen >= 5, "{seen}");
    }

    #[test]
    fn ill_posed_scenario_is_rejected() {
        let mut w = single_cube();
        w.objects[0].center = [0.0, 10.0, 0.0];
        w.trajectory = TrajectorySpec::Waypoints {
            points: vec![[0.0, 0.0, 0.0]],
            speed: 1.0,
            look: Look::At { point: [0.0, -1.0, 0.0] },
        };
        let err = ground_truth_bundle(&w, &SensorNoiseSpec::default()).unwrap_err();
        assert_eq!(err, SimError::IllPosedScenario(5));
    }

    #[test]
    fn scenario_round_trips_through_toml() {
        for name in PRESETS {
            let s = preset(name, 9).unwrap();
            let text = toml::to_string(&s).unwrap();
            let back: Scenario = toml::from_str(&text).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn origin_lookup_finds_detections() {
        let s = preset("desk", 1).unwrap();
        let b = ground_truth_bundle(&s.world, &s.noise).unwrap();
        let f = b.frames.iter().find(|f| !f.detections.is_empty()).unwrap();
        assert_eq!(b.origin_of(&f.detections[0]), Some(f.origins[0]));
    }
}
