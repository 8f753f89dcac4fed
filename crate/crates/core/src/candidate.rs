//! Landmark candidates: cloud extraction, stability check and 3D localization.
//!
//! A promoted tracklet is turned into one world-frame cloud per measurement.
//! The spread of the per-measurement cloud centroids (mean absolute
//! deviation) rejects moving or flickering objects. Survivors are localized
//! by maximizing the Gaussian reprojection likelihood of the box centers,
//! starting from a midpoint triangulation and refining with a seeded random
//! walk.

use nalgebra::{Matrix2, Matrix3, Point3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    backproject, centroid, mean_point, project, CameraIntrinsics, GeometryError, Pixel,
    PointCloud, Pose, Trajectory,
};
use crate::scalar::{lit, Real};
use crate::tracker::{Measurement, Tracklet};

/// Smallest size reported for a candidate, meters.
pub const MIN_SIZE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CandidateError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no pose brackets measurement time {0}")]
    MissingPose(f64),
    #[error("at least two measurements are required, got {0}")]
    TooFewMeasurements(usize),
    #[error("pose count {poses} does not match measurement count {measurements}")]
    PoseCountMismatch { poses: usize, measurements: usize },
}

/// Source of range samples inside a detection: `(pixel, camera-frame depth)`.
pub trait DepthSource<T: Real> {
    fn samples(
        &self,
        m: &Measurement<T>,
        pose: &Pose<T>,
        k: &CameraIntrinsics<T>,
    ) -> Vec<(Pixel<T>, T)>;
}

/// Depth source for logged detections: a solid pixel grid over the box,
/// swept through the cuboid depth range around the logged depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuboidSource {
    /// Samples per box side.
    pub grid: usize,
    /// Depth slices across the cuboid.
    pub slices: usize,
}

impl Default for CuboidSource {
    fn default() -> Self {
        Self { grid: 8, slices: 3 }
    }
}

impl<T: Real> DepthSource<T> for CuboidSource {
    fn samples(
        &self,
        m: &Measurement<T>,
        _pose: &Pose<T>,
        k: &CameraIntrinsics<T>,
    ) -> Vec<(Pixel<T>, T)> {
        let grid = self.grid.max(1);
        let slices = self.slices.max(1);
        let half = cuboid_half_depth(m, k);
        let b = &m.bbox;
        // Cell centers, symmetric about the box center.
        let at = |lo: T, span: T, i: usize, n: usize| {
            lo + span * (lit::<T>(i as f64) + lit(0.5)) / lit(n as f64)
        };
        let mut out = Vec::with_capacity(grid * grid * slices);
        for s in 0..slices {
            let depth = if slices == 1 {
                m.depth_hint
            } else {
                m.depth_hint - half
                    + half * lit::<T>(2.0) * lit::<T>(s as f64) / lit((slices - 1) as f64)
            };
            if depth <= T::zero() {
                continue;
            }
            for i in 0..grid {
                for j in 0..grid {
                    out.push((
                        Pixel::new(at(b.x_min, b.width(), i, grid), at(b.y_min, b.height(), j, grid)),
                        depth,
                    ));
                }
            }
        }
        out
    }
}

/// Half depth of the extraction cuboid: half the metric box width at the hinted depth.
pub fn cuboid_half_depth<T: Real>(m: &Measurement<T>, k: &CameraIntrinsics<T>) -> T {
    lit::<T>(0.5) * m.bbox.width() * m.depth_hint / k.fx
}

/// Looks up the camera pose of every measurement in a trajectory.
pub fn poses_for<T: Real>(
    tracklet: &Tracklet<T>,
    trajectory: &Trajectory<T>,
) -> Result<Vec<Pose<T>>, CandidateError> {
    tracklet
        .measurements
        .iter()
        .map(|m| {
            trajectory
                .interpolate(m.timestamp)
                .ok_or(CandidateError::MissingPose(m.timestamp))
        })
        .collect()
}

fn check_poses<T: Real>(tracklet: &Tracklet<T>, poses: &[Pose<T>]) -> Result<(), CandidateError> {
    if poses.len() != tracklet.len() {
        return Err(CandidateError::PoseCountMismatch {
            poses: poses.len(),
            measurements: tracklet.len(),
        });
    }
    Ok(())
}

/// One world-frame cloud per measurement: range samples inside the box and
/// within the cuboid depth band, back-projected through the measurement pose.
pub fn extract_clouds<T: Real, S: DepthSource<T> + ?Sized>(
    tracklet: &Tracklet<T>,
    poses: &[Pose<T>],
    k: &CameraIntrinsics<T>,
    source: &S,
) -> Result<Vec<PointCloud<T>>, CandidateError> {
    check_poses(tracklet, poses)?;
    let slack: T = lit(1e-9);
    tracklet
        .measurements
        .iter()
        .zip(poses)
        .map(|(m, pose)| {
            let half = cuboid_half_depth(m, k);
            let points: Vec<_> = source
                .samples(m, pose, k)
                .into_iter()
                .filter(|(px, d)| {
                    m.bbox.contains(px) && (*d - m.depth_hint).abs() <= half + slack && *d > T::zero()
                })
                .map(|(px, d)| backproject(&px, d, pose, k))
                .collect::<Result<_, _>>()?;
            if points.is_empty() {
                return Err(CandidateError::Geometry(GeometryError::EmptyCloud));
            }
            Ok(PointCloud::world(points))
        })
        .collect()
}

/// Outcome of the mean-absolute-deviation check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MadVerdict<T: Real> {
    /// Per-axis mean absolute deviation.
    pub per_axis: Vector3<T>,
    /// Euclidean norm of `per_axis`, compared against the threshold.
    pub magnitude: T,
    pub accepted: bool,
}

/// Rejects a tracklet whose centroids wander more than `threshold` meters.
pub fn validate_mad<T: Real>(
    centroids: &[Point3<T>],
    threshold: T,
) -> Result<MadVerdict<T>, CandidateError> {
    if centroids.len() < 2 {
        return Err(CandidateError::TooFewMeasurements(centroids.len()));
    }
    let mean = mean_point(centroids).expect("nonempty");
    let n: T = lit(centroids.len() as f64);
    let per_axis = centroids
        .iter()
        .fold(Vector3::zeros(), |acc: Vector3<T>, c| {
            acc + (c - mean).map(|v| v.abs())
        })
        / n;
    let magnitude = per_axis.norm();
    Ok(MadVerdict {
        per_axis,
        magnitude,
        accepted: magnitude <= threshold,
    })
}

/// Gaussian pixel noise of box-center measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T: Real> {
    /// 2×2 covariance, pixels², row-major.
    pub covariance: [[T; 2]; 2],
}

impl<T: Real> Default for NoiseModel<T> {
    fn default() -> Self {
        Self::isotropic(lit(4.0))
    }
}

impl<T: Real> NoiseModel<T> {
    pub fn isotropic(sigma_px: T) -> Self {
        let v = sigma_px * sigma_px;
        Self {
            covariance: [[v, T::zero()], [T::zero(), v]],
        }
    }

    pub fn sigma(&self) -> Matrix2<T> {
        let c = &self.covariance;
        Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1])
    }

    pub fn is_valid(&self) -> bool {
        let s = self.sigma();
        (s[(0, 1)] - s[(1, 0)]).abs() <= lit(1e-12) && s[(0, 0)] > T::zero() && s.determinant() > T::zero()
    }

    pub fn information(&self) -> Matrix2<T> {
        self.sigma().try_inverse().unwrap_or_else(Matrix2::identity)
    }

    /// `−log(2π √|Σ|)`, the per-measurement normalization term.
    pub fn log_normalizer(&self) -> T {
        -(lit::<T>(2.0) * T::pi()).ln() - lit::<T>(0.5) * self.sigma().determinant().ln()
    }
}

/// Settings of the random-walk MAP search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig<T: Real> {
    pub n_samples: usize,
    /// Random-walk proposal scale, meters.
    pub step_sigma: T,
    pub burn_in: usize,
    pub seed: u64,
    /// Below this ray angle (degrees) triangulation is not attempted.
    pub min_parallax_deg: T,
}

impl<T: Real> Default for McConfig<T> {
    fn default() -> Self {
        Self {
            n_samples: 2000,
            step_sigma: lit(0.05),
            burn_in: 200,
            seed: 0,
            min_parallax_deg: lit(1.0),
        }
    }
}

/// Gaussian log-likelihood of the box centers given a 3D centroid `x`.
pub fn log_likelihood<T: Real>(
    x: &Point3<T>,
    tracklet: &Tracklet<T>,
    poses: &[Pose<T>],
    k: &CameraIntrinsics<T>,
    noise: &NoiseModel<T>,
) -> Result<T, CandidateError> {
    check_poses(tracklet, poses)?;
    let info = noise.information();
    let norm = noise.log_normalizer();
    let half: T = lit(0.5);
    let mut total = T::zero();
    for (m, pose) in tracklet.measurements.iter().zip(poses) {
        let r: Vector2<T> = project(x, pose, k)?.to_vector() - m.bbox.center().to_vector();
        total += norm - half * (r.transpose() * info * r)[(0, 0)];
    }
    Ok(total)
}

/// How the centroid estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CentroidSource {
    /// Triangulated seed refined by the random walk.
    Sampled,
    /// Camera centers (nearly) coincide; the box center was back-projected
    /// at its logged depth. Low confidence.
    DepthFallback,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentroidEstimate<T: Real> {
    pub point: Point3<T>,
    pub log_likelihood: T,
    pub seed_log_likelihood: T,
    pub source: CentroidSource,
}

/// Least-squares point closest to all camera rays through the box centers.
fn triangulate_midpoint<T: Real>(
    tracklet: &Tracklet<T>,
    poses: &[Pose<T>],
    k: &CameraIntrinsics<T>,
) -> Option<Point3<T>> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (m, pose) in tracklet.measurements.iter().zip(poses) {
        let dir = pose.rotation() * k.unproject(&m.bbox.center(), T::one()).coords;
        let d = dir.normalize();
        let p = Matrix3::identity() - d * d.transpose();
        a += p;
        b += p * pose.translation();
    }
    a.try_inverse().map(|inv| Point3::from(inv * b))
}

fn max_parallax<T: Real>(tracklet: &Tracklet<T>, poses: &[Pose<T>], k: &CameraIntrinsics<T>) -> T {
    let dirs: Vec<Vector3<T>> = tracklet
        .measurements
        .iter()
        .zip(poses)
        .map(|(m, pose)| (pose.rotation() * k.unproject(&m.bbox.center(), T::one()).coords).normalize())
        .collect();
    let mut best = T::zero();
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let angle = dirs[i].angle(&dirs[j]);
            if angle > best {
                best = angle;
            }
        }
    }
    best
}

fn baseline<T: Real>(poses: &[Pose<T>]) -> T {
    let mut best = T::zero();
    for i in 0..poses.len() {
        for j in i + 1..poses.len() {
            let d = (poses[i].translation() - poses[j].translation()).norm();
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Box center of the latest measurement back-projected at its logged depth.
pub fn depth_fallback<T: Real>(
    tracklet: &Tracklet<T>,
    poses: &[Pose<T>],
    k: &CameraIntrinsics<T>,
) -> Result<Point3<T>, CandidateError> {
    check_poses(tracklet, poses)?;
    let m = tracklet.latest();
    let pose = poses.last().expect("nonempty");
    Ok(backproject(&m.bbox.center(), m.depth_hint, pose, k)?)
}

/// Maximum a-posteriori centroid under a uniform prior.
///
/// The returned point never has a lower likelihood than the triangulated seed.
/// The random stream is derived from `(mc.seed, tracklet.id)`, so candidates can
/// be localized in any order or in parallel with identical results.
pub fn estimate_centroid<T: Real>(
    tracklet: &Tracklet<T>,
    poses: &[Pose<T>],
    k: &CameraIntrinsics<T>,
    noise: &NoiseModel<T>,
    mc: &McConfig<T>,
) -> Result<CentroidEstimate<T>, CandidateError> {
    check_poses(tracklet, poses)?;
    if tracklet.len() < 2 {
        return Err(CandidateError::TooFewMeasurements(tracklet.len()));
    }

    let min_parallax = mc.min_parallax_deg * T::pi() / lit(180.0);
    let seed = if baseline(poses) <= lit(1e-9) || max_parallax(tracklet, poses, k) < min_parallax {
        None
    } else {
        triangulate_midpoint(tracklet, poses, k)
            .filter(|p| p.iter().all(|v| v.is_finite()))
            .and_then(|p| log_likelihood(&p, tracklet, poses, k, noise).ok().map(|ll| (p, ll)))
    };
    let Some((seed, seed_ll)) = seed else {
        let point = depth_fallback(tracklet, poses, k)?;
        let ll = log_likelihood(&point, tracklet, poses, k, noise).unwrap_or(T::min_value().unwrap_or(T::zero()));
        return Ok(CentroidEstimate {
            point,
            log_likelihood: ll,
            seed_log_likelihood: ll,
            source: CentroidSource::DepthFallback,
        });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(tracklet.id);
    let mut current = seed;
    let mut current_ll = seed_ll;
    let mut best = seed;
    let mut best_ll = seed_ll;
    for i in 0..mc.n_samples {
        let step = Vector3::new(
            lit::<T>(rng.sample::<f64, _>(StandardNormal)),
            lit::<T>(rng.sample::<f64, _>(StandardNormal)),
            lit::<T>(rng.sample::<f64, _>(StandardNormal)),
        ) * mc.step_sigma;
        let proposal = current + step;
        let u: f64 = rng.random();
        let Ok(ll) = log_likelihood(&proposal, tracklet, poses, k, noise) else {
            continue;
        };
        // Metropolis acceptance on the unnormalized posterior.
        if u.ln() < crate::scalar::to_f64(ll - current_ll) {
            current = proposal;
            current_ll = ll;
        }
        if i >= mc.burn_in && current_ll > best_ll {
            best = current;
            best_ll = current_ll;
        }
    }
    debug_assert!(best_ll >= seed_ll);
    Ok(CentroidEstimate {
        point: best,
        log_likelihood: best_ll,
        seed_log_likelihood: seed_ll,
        source: CentroidSource::Sampled,
    })
}

/// A validated, localized tracklet.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T: Real> {
    pub tracklet: Tracklet<T>,
    pub poses: Vec<Pose<T>>,
    pub clouds: Vec<PointCloud<T>>,
    pub per_measurement_centroids: Vec<Point3<T>>,
    pub map_centroid: Point3<T>,
    /// Largest axis-aligned extent of the merged cloud, meters.
    pub size_estimate: T,
    pub class_id: u32,
    pub localization: CentroidSource,
}

impl<T: Real> Candidate<T> {
    /// All per-measurement clouds concatenated.
    pub fn merged_cloud(&self) -> PointCloud<T> {
        PointCloud::world(self.clouds.iter().flat_map(|c| c.points.iter().copied()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Proposal<T: Real> {
    Accepted(Box<Candidate<T>>),
    Rejected { tracklet_id: u64, mad: MadVerdict<T> },
}

/// Settings consumed by [`propose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalSettings<'a, T: Real> {
    pub mad_threshold: T,
    pub noise: &'a NoiseModel<T>,
    pub mc: &'a McConfig<T>,
}

/// Cloud extraction, MAD validation and localization of one promoted tracklet.
pub fn propose<T: Real, S: DepthSource<T> + ?Sized>(
    tracklet: Tracklet<T>,
    poses: Vec<Pose<T>>,
    k: &CameraIntrinsics<T>,
    source: &S,
    settings: &ProposalSettings<'_, T>,
) -> Result<Proposal<T>, CandidateError> {
    let clouds = extract_clouds(&tracklet, &poses, k, source)?;
    let centroids = clouds
        .iter()
        .map(centroid)
        .collect::<Result<Vec<_>, _>>()?;
    let mad = validate_mad(&centroids, settings.mad_threshold)?;
    if !mad.accepted {
        return Ok(Proposal::Rejected {
            tracklet_id: tracklet.id,
            mad,
        });
    }
    let estimate = estimate_centroid(&tracklet, &poses, k, settings.noise, settings.mc)?;
    let merged: Vec<_> = clouds.iter().flat_map(|c| c.points.iter()).copied().collect();
    let extent = crate::geometry::Aabb::from_points(&merged)
        .map(|b| b.max_extent())
        .unwrap_or_else(T::zero);
    let size_estimate = crate::scalar::fmax(extent, lit(MIN_SIZE));
    Ok(Proposal::Accepted(Box::new(Candidate {
        class_id: tracklet.class_id,
        tracklet,
        poses,
        clouds,
        per_measurement_centroids: centroids,
        map_centroid: estimate.point,
        size_estimate,
        localization: estimate.source,
    })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracker::BoundingBox;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn k() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn meas(t: f64, center: Pixel<f64>, w: f64, depth: f64) -> Measurement<f64> {
        Measurement {
            timestamp: t,
            frame_id: (t * 10.0).round() as u64,
            class_id: 1,
            confidence: 0.9,
            bbox: BoundingBox::from_center(center, w, w).unwrap(),
            depth_hint: depth,
        }
    }

    fn tracklet(ms: Vec<Measurement<f64>>) -> Tracklet<f64> {
        Tracklet {
            id: 42,
            class_id: 1,
            last_update: ms.last().unwrap().timestamp,
            measurements: ms,
        }
    }

    /// Cameras on an arc looking at `target`.
    fn views(target: &Point3<f64>, n: usize, radius: f64, spread: f64) -> Vec<Pose<f64>> {
        (0..n)
            .map(|i| {
                let a = -spread / 2.0 + spread * i as f64 / (n.max(2) - 1) as f64;
                let eye = Point3::new(target.x + radius * a.sin(), target.y - radius * a.cos(), target.z + 0.3);
                Pose::look_at(&eye, target, &Vector3::z())
            })
            .collect()
    }

    fn observe(target: &Point3<f64>, poses: &[Pose<f64>], noise: &[(f64, f64)]) -> Tracklet<f64> {
        let ms = poses
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let px = project(target, p, &k()).unwrap();
                let (du, dv) = noise.get(i).copied().unwrap_or((0.0, 0.0));
                let depth = p.inverse_transform_point(target).z;
                meas(i as f64 * 0.1, Pixel::new(px.u + du, px.v + dv), 40.0, depth)
            })
            .collect();
        tracklet(ms)
    }

    struct SphereSource {
        center: Point3<f64>,
        radius: f64,
    }

    impl DepthSource<f64> for SphereSource {
        fn samples(&self, _m: &Measurement<f64>, pose: &Pose<f64>, k: &CameraIntrinsics<f64>) -> Vec<(Pixel<f64>, f64)> {
            let eye = pose.translation();
            let mut out = Vec::new();
            let n = 60;
            for i in 0..n {
                for j in 0..2 * n {
                    let th = std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                    let ph = std::f64::consts::PI * j as f64 / n as f64;
                    let normal = Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
                    let p = self.center + normal * self.radius;
                    if normal.dot(&(eye - p.coords)) <= 0.0 {
                        continue;
                    }
                    let pc = pose.inverse_transform_point(&p);
                    out.push((k.project_camera(&pc), pc.z));
                }
            }
            out
        }
    }

    #[test]
    fn sphere_cloud_centroid_matches_visible_surface() {
        let center = Point3::new(0.0, 0.0, 3.0);
        let radius = 0.2;
        let pose = Pose::<f64>::identity();
        let src = SphereSource { center, radius };
        let w = 2.0 * radius * 500.0 / 3.0 * 1.1;
        let m = meas(0.0, Pixel::new(320.0, 240.0), w, 3.0);
        let clouds = extract_clouds(&tracklet(vec![m]), &[pose], &k(), &src).unwrap();
        let got = centroid(&clouds[0]).unwrap();
        // Oracle: mean of all visible surface samples, without any box or depth filter.
        let all: Vec<_> = src
            .samples(&m, &pose, &k())
            .iter()
            .map(|(px, d)| backproject(px, *d, &pose, &k()).unwrap())
            .collect();
        let expected = mean_point(&all).unwrap();
        assert!((got - expected).norm() < 0.05, "{got} vs {expected}");
    }

    #[test]
    fn single_ray_cloud() {
        struct One;
        impl DepthSource<f64> for One {
            fn samples(&self, _: &Measurement<f64>, _: &Pose<f64>, _: &CameraIntrinsics<f64>) -> Vec<(Pixel<f64>, f64)> {
                vec![(Pixel::new(320.0, 240.0), 2.0)]
            }
        }
        let m = meas(0.0, Pixel::new(320.0, 240.0), 50.0, 2.0);
        let clouds = extract_clouds(&tracklet(vec![m]), &[Pose::identity()], &k(), &One).unwrap();
        assert_eq!(clouds[0].points, vec![Point3::new(0.0, 0.0, 2.0)]);
    }

    #[test]
    fn empty_source_is_an_error() {
        struct Nothing;
        impl DepthSource<f64> for Nothing {
            fn samples(&self, _: &Measurement<f64>, _: &Pose<f64>, _: &CameraIntrinsics<f64>) -> Vec<(Pixel<f64>, f64)> {
                vec![(Pixel::new(0.0, 0.0), 2.0)]
            }
        }
        let m = meas(0.0, Pixel::new(320.0, 240.0), 50.0, 2.0);
        let err = extract_clouds(&tracklet(vec![m]), &[Pose::identity()], &k(), &Nothing).unwrap_err();
        assert_eq!(err, CandidateError::Geometry(GeometryError::EmptyCloud));
    }

    #[test]
    fn cuboid_cloud_centers_on_hinted_point() {
        let m = meas(0.0, Pixel::new(400.0, 200.0), 60.0, 2.5);
        let pose = Pose::from_translation(Vector3::new(0.5, 0.0, 0.0));
        let clouds = extract_clouds(&tracklet(vec![m]), &[pose], &k(), &CuboidSource::default()).unwrap();
        assert_eq!(clouds[0].len(), 8 * 8 * 3);
        let c = centroid(&clouds[0]).unwrap();
        let expected = backproject(&m.bbox.center(), 2.5, &pose, &k()).unwrap();
        assert_relative_eq!(c.coords, expected.coords, epsilon = 1e-9);
    }

    #[test]
    fn poses_missing_for_unbracketed_time() {
        let traj = Trajectory::new(vec![crate::geometry::StampedPose { timestamp: 0.0, pose: Pose::identity() }]);
        let t = tracklet(vec![meas(0.0, Pixel::new(1.0, 1.0), 1.0, 1.0), meas(0.5, Pixel::new(1.0, 1.0), 1.0, 1.0)]);
        assert_eq!(poses_for(&t, &traj), Err(CandidateError::MissingPose(0.5)));
    }

    #[test]
    fn mad_static_and_marching() {
        let same = vec![Point3::new(1.0, 2.0, 3.0); 5];
        let v = validate_mad(&same, 0.2).unwrap();
        assert!(v.accepted);
        assert_eq!(v.magnitude, 0.0);

        let xs = [0.0, 0.5, 1.0, 1.5, 2.0];
        let marching: Vec<_> = xs.iter().map(|&x| Point3::new(x, 0.0, 0.0)).collect();
        // Oracle: mean 1.0, deviations {1, .5, 0, .5, 1}, average 0.6.
        let mean = xs.iter().sum::<f64>() / 5.0;
        let expected = xs.iter().map(|x| (x - mean).abs()).sum::<f64>() / 5.0;
        assert_relative_eq!(expected, 0.6, epsilon = 1e-15);
        let v = validate_mad(&marching, 0.2).unwrap();
        assert_relative_eq!(v.magnitude, expected, epsilon = 1e-12);
        assert!(!v.accepted);

        assert_eq!(
            validate_mad(&[Point3::new(0.0, 0.0, 0.0)], 0.2),
            Err(CandidateError::TooFewMeasurements(1))
        );
    }

    #[test]
    fn mad_small_jitter_accepted() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<_> = (0..5)
            .map(|_| {
                Point3::new(
                    1.0 + rng.random_range(-0.01..0.01),
                    2.0 + rng.random_range(-0.01..0.01),
                    rng.random_range(-0.01..0.01),
                )
            })
            .collect();
        // Each axis deviates at most 0.02 from the mean, so the norm is below 0.02·√3.
        let v = validate_mad(&pts, 0.2).unwrap();
        assert!(v.magnitude <= 0.02 * 3f64.sqrt());
        assert!(v.accepted);
    }

    proptest::proptest! {
        #[test]
        fn mad_scale_monotone(
            pts in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..10),
            scale in 1.0f64..10.0,
            threshold in 0.01f64..1.0,
        ) {
            let pts: Vec<_> = pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect();
            let mean = mean_point(&pts).unwrap();
            let scaled: Vec<_> = pts.iter().map(|p| mean + (p - mean) * scale).collect();
            let a = validate_mad(&pts, threshold).unwrap();
            let b = validate_mad(&scaled, threshold).unwrap();
            proptest::prop_assert!(!( !a.accepted && b.accepted));
            proptest::prop_assert!(b.magnitude + 1e-12 >= a.magnitude);
        }
    }

    #[test]
    fn log_likelihood_zero_residual_is_normalizer() {
        let target = Point3::new(0.3, 1.2, 0.5);
        let poses = views(&target, 4, 2.0, 0.6);
        let t = observe(&target, &poses, &[]);
        let noise = NoiseModel::isotropic(4.0);
        let ll = log_likelihood(&target, &t, &poses, &k(), &noise).unwrap();
        let expected = 4.0 * -(2.0 * std::f64::consts::PI * 16.0).ln();
        assert_relative_eq!(ll, expected, epsilon = 1e-9);
    }

    #[test]
    fn log_likelihood_factorizes_and_peaks_at_truth() {
        let target = Point3::new(0.3, 1.2, 0.5);
        let poses = views(&target, 2, 2.0, 0.8);
        let t = observe(&target, &poses, &[]);
        let noise = NoiseModel::isotropic(4.0);
        let best = log_likelihood(&target, &t, &poses, &k(), &noise).unwrap();
        let x = target + Vector3::new(0.05, -0.02, 0.07);
        let total = log_likelihood(&x, &t, &poses, &k(), &noise).unwrap();
        assert!(total < best);
        let singles: f64 = (0..2)
            .map(|i| {
                let ti = Tracklet { measurements: vec![t.measurements[i]], ..t.clone() };
                log_likelihood(&x, &ti, &poses[i..=i], &k(), &noise).unwrap()
            })
            .sum();
        assert_relative_eq!(total, singles, epsilon = 1e-9);
    }

    #[test]
    fn log_likelihood_gauge_invariant() {
        let target = Point3::new(0.3, 1.2, 0.5);
        let poses = views(&target, 3, 2.0, 0.8);
        let t = observe(&target, &poses, &[(1.0, -2.0), (0.5, 0.5), (-3.0, 1.0)]);
        let noise = NoiseModel::isotropic(4.0);
        let x = target + Vector3::new(0.02, 0.01, -0.03);
        let g = Pose::new(UnitQuaternion::from_euler_angles(0.3, -0.2, 1.1), Vector3::new(4.0, -1.0, 2.0));
        let moved: Vec<_> = poses.iter().map(|p| g.compose(p)).collect();
        let a = log_likelihood(&x, &t, &poses, &k(), &noise).unwrap();
        let b = log_likelihood(&g.transform_point(&x), &t, &moved, &k(), &noise).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn log_likelihood_behind_camera() {
        let target = Point3::new(0.0, 0.0, 2.0);
        let poses = vec![Pose::identity()];
        let t = tracklet(vec![meas(0.0, Pixel::new(320.0, 240.0), 10.0, 2.0)]);
        let err = log_likelihood(&Point3::new(0.0, 0.0, -1.0), &t, &poses, &k(), &NoiseModel::default());
        assert!(matches!(err, Err(CandidateError::Geometry(GeometryError::BehindCamera { .. }))));
        assert!(log_likelihood(&target, &t, &poses, &k(), &NoiseModel::default()).is_ok());
    }

    #[test]
    fn noise_free_views_localize_exactly() {
        let target = Point3::new(-0.4, 0.9, 0.6);
        let poses = views(&target, 10, 2.5, 0.7);
        let t = observe(&target, &poses, &[]);
        let est = estimate_centroid(&t, &poses, &k(), &NoiseModel::default(), &McConfig::default()).unwrap();
        assert_eq!(est.source, CentroidSource::Sampled);
        assert!((est.point - target).norm() < 1e-3);
        assert!(est.log_likelihood >= est.seed_log_likelihood);
    }

    #[test]
    fn zero_baseline_falls_back_to_depth() {
        let pose = Pose::from_translation(Vector3::new(0.0, 0.0, 0.0));
        let poses = vec![pose; 5];
        let ms: Vec<_> = (0..5).map(|i| meas(i as f64 * 0.1, Pixel::new(350.0, 260.0), 30.0, 2.0)).collect();
        let t = tracklet(ms);
        let est = estimate_centroid(&t, &poses, &k(), &NoiseModel::default(), &McConfig::default()).unwrap();
        assert_eq!(est.source, CentroidSource::DepthFallback);
        let expected = backproject(&Pixel::new(350.0, 260.0), 2.0, &pose, &k()).unwrap();
        assert_relative_eq!(est.point.coords, expected.coords, epsilon = 1e-12);
    }

    #[test]
    fn estimate_is_deterministic_per_seed() {
        let target = Point3::new(0.1, 1.0, 0.4);
        let poses = views(&target, 3, 2.0, 0.5);
        let t = observe(&target, &poses, &[(1.0, 0.0), (-1.0, 1.0), (0.0, -1.0)]);
        let mc = McConfig { seed: 9, ..McConfig::default() };
        let a = estimate_centroid(&t, &poses, &k(), &NoiseModel::default(), &mc).unwrap();
        let b = estimate_centroid(&t, &poses, &k(), &NoiseModel::default(), &mc).unwrap();
        assert_eq!(a.point, b.point);
        assert!(a.log_likelihood >= a.seed_log_likelihood);
    }

    #[test]
    fn moving_object_rejected_static_accepted() {
        let settings_noise = NoiseModel::default();
        let mc = McConfig::default();
        let settings = ProposalSettings { mad_threshold: 0.15, noise: &settings_noise, mc: &mc };
        let poses: Vec<_> = (0..5).map(|i| Pose::from_translation(Vector3::new(0.05 * i as f64, 0.0, 0.0))).collect();
        let mk = |xs: &dyn Fn(usize) -> f64| {
            let ms: Vec<_> = (0..5)
                .map(|i| {
                    let p = Point3::new(xs(i), 0.0, 2.0);
                    let px = project(&p, &poses[i], &k()).unwrap();
                    meas(i as f64 * 0.2, px, 50.0, 2.0)
                })
                .collect();
            tracklet(ms)
        };
        let still = propose(mk(&|_| 0.0), poses.clone(), &k(), &CuboidSource::default(), &settings).unwrap();
        match still {
            Proposal::Accepted(c) => {
                assert!((c.map_centroid - Point3::new(0.0, 0.0, 2.0)).norm() < 1e-3);
                assert!(c.size_estimate > 0.0);
                assert_eq!(c.clouds.len(), 5);
            }
            other => panic!("static object rejected: {other:?}"),
        }
        let walking = propose(mk(&|i| 0.25 * i as f64), poses, &k(), &CuboidSource::default(), &settings).unwrap();
        assert!(matches!(walking, Proposal::Rejected { .. }));
    }
}
