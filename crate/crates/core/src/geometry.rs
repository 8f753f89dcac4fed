//! Rigid-body transforms, the pinhole camera, and point clouds.
//!
//! A [`Pose`] is the camera-to-world transform: `pose.transform_point(p_cam)`
//! yields the world point. Camera frames use the usual computer-vision axes,
//! `z` forward, `x` right, `y` down.

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{fmax, fmin, lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (camera-frame depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("back-projection depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Coordinate frame a point set is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frame {
    Camera,
    World,
}

/// Rigid-body transform stored as a unit quaternion and a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    rotation: UnitQuaternion<T>,
    translation: Vector3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: UnitQuaternion<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Builds a pose from raw quaternion components, normalizing them.
    pub fn from_wxyz(w: T, x: T, y: T, z: T, translation: Vector3<T>) -> Self {
        let q = nalgebra::Quaternion::new(w, x, y, z);
        Self::new(UnitQuaternion::from_quaternion(q), translation)
    }

    pub fn from_translation(translation: Vector3<T>) -> Self {
        Self::new(UnitQuaternion::identity(), translation)
    }

    pub fn rotation(&self) -> &UnitQuaternion<T> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<T> {
        &self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<T> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `self ∘ other`, renormalizing the quaternion.
    pub fn compose(&self, other: &Self) -> Self {
        let rotation = UnitQuaternion::new_normalize((self.rotation * other.rotation).into_inner());
        Self {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    /// Relative transform `self⁻¹ ∘ other`.
    pub fn between(&self, other: &Self) -> Self {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse_transform_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.rotation.inverse() * (p.coords - self.translation))
    }

    /// Retraction used by the optimizer: `(R·Exp(θ), t + ρ)` for `delta = [ρ; θ]`.
    pub fn retract(&self, delta: &Vector6<T>) -> Self {
        let rho = Vector3::new(delta[0], delta[1], delta[2]);
        let theta = Vector3::new(delta[3], delta[4], delta[5]);
        let rotation = UnitQuaternion::new_normalize(
            (self.rotation * UnitQuaternion::from_scaled_axis(theta)).into_inner(),
        );
        Self {
            rotation,
            translation: self.translation + rho,
        }
    }

    /// Tangent-space perturbation `[ρ; θ]` such that `self.retract(d) == other`.
    pub fn local(&self, other: &Self) -> Vector6<T> {
        let rho = other.translation - self.translation;
        let theta = (self.rotation.inverse() * other.rotation).scaled_axis();
        Vector6::new(rho[0], rho[1], rho[2], theta[0], theta[1], theta[2])
    }

    /// Camera at `eye` looking at `target`; `up` is the world up direction.
    pub fn look_at(eye: &Point3<T>, target: &Point3<T>, up: &Vector3<T>) -> Self {
        let z = (target - eye).normalize();
        let mut x = z.cross(up);
        if x.norm() <= lit::<T>(1e-12) {
            // Looking straight along `up`; any perpendicular works.
            x = z.cross(&Vector3::x());
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let m = Matrix3::from_columns(&[x, y, z]);
        let rotation =
            UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(m));
        Self::new(rotation, eye.coords)
    }

    /// Linear interpolation of translation and slerp of rotation, `s ∈ [0, 1]`.
    pub fn interpolate(&self, other: &Self, s: T) -> Self {
        let rotation = self
            .rotation
            .try_slerp(&other.rotation, s, lit(1e-12))
            .unwrap_or(self.rotation);
        Self {
            rotation,
            translation: self.translation + (other.translation - self.translation) * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.translation.iter().all(|v| v.is_finite())
            && self.rotation.coords.iter().all(|v| v.is_finite())
    }
}

impl<T: Real> std::ops::Mul for Pose<T> {
    type Output = Pose<T>;
    fn mul(self, rhs: Self) -> Self {
        self.compose(&rhs)
    }
}

/// Skew-symmetric cross-product matrix `[v]×`.
pub fn skew<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v[2], v[1], v[2], z, -v[0], -v[1], v[0], z)
}

/// Inverse of the SO(3) right Jacobian, `J_r⁻¹(φ)`.
pub fn so3_right_jacobian_inv<T: Real>(phi: &Vector3<T>) -> Matrix3<T> {
    let theta = phi.norm();
    let w = skew(phi);
    let half: T = lit(0.5);
    if theta < lit(1e-6) {
        return Matrix3::identity() + w * half + w * w * lit::<T>(1.0 / 12.0);
    }
    let coeff = T::one() / (theta * theta)
        - (T::one() + theta.cos()) / (lit::<T>(2.0) * theta * theta.sin());
    Matrix3::identity() + w * half + w * w * coeff
}

/// Pinhole intrinsics, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > T::zero() && self.fy > T::zero()) {
            return Err(GeometryError::InvalidIntrinsics(
                "focal lengths must be positive".into(),
            ));
        }
        let w: T = lit(self.width as f64);
        let h: T = lit(self.height as f64);
        if !(self.cx >= T::zero() && self.cx < w && self.cy >= T::zero() && self.cy < h) {
            return Err(GeometryError::InvalidIntrinsics(
                "principal point outside the image".into(),
            ));
        }
        Ok(())
    }

    /// Pinhole projection of a camera-frame point, ignoring the sign of `z`.
    #[inline]
    pub fn project_camera(&self, p: &Point3<T>) -> Pixel<T> {
        Pixel::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    /// Camera-frame point on the ray through `px` at depth `z`.
    #[inline]
    pub fn unproject(&self, px: &Pixel<T>, z: T) -> Point3<T> {
        Point3::new((px.u - self.cx) * z / self.fx, (px.v - self.cy) * z / self.fy, z)
    }

    pub fn contains(&self, px: &Pixel<T>) -> bool {
        px.u >= T::zero()
            && px.v >= T::zero()
            && px.u <= lit(self.width as f64)
            && px.v <= lit(self.height as f64)
    }
}

/// Continuous image coordinates, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel<T: Real> {
    pub u: T,
    pub v: T,
}

impl<T: Real> Pixel<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn to_vector(&self) -> Vector2<T> {
        Vector2::new(self.u, self.v)
    }
}

/// Projects a world point into the image of a camera at `pose`.
pub fn project<T: Real>(
    p: &Point3<T>,
    pose: &Pose<T>,
    k: &CameraIntrinsics<T>,
) -> Result<Pixel<T>, GeometryError> {
    let pc = pose.inverse_transform_point(p);
    if pc.z <= T::zero() {
        return Err(GeometryError::BehindCamera {
            depth: crate::scalar::to_f64(pc.z),
        });
    }
    Ok(k.project_camera(&pc))
}

/// Inverse pinhole at camera-frame `depth`, returned in the world frame.
pub fn backproject<T: Real>(
    px: &Pixel<T>,
    depth: T,
    pose: &Pose<T>,
    k: &CameraIntrinsics<T>,
) -> Result<Point3<T>, GeometryError> {
    if !(depth > T::zero()) {
        return Err(GeometryError::NonPositiveDepth(crate::scalar::to_f64(depth)));
    }
    Ok(pose.transform_point(&k.unproject(px, depth)))
}

/// Axis-aligned bounding volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T: Real> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn from_points<'a, I: IntoIterator<Item = &'a Point3<T>>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Self {
            min: first,
            max: first,
        };
        for p in it {
            for i in 0..3 {
                b.min[i] = fmin(b.min[i], p[i]);
                b.max[i] = fmax(b.max[i], p[i]);
            }
        }
        Some(b)
    }

    pub fn extents(&self) -> Vector3<T> {
        self.max - self.min
    }

    pub fn max_extent(&self) -> T {
        self.extents().max()
    }

    /// Every side widened to at least `min_side`, keeping the center.
    pub fn padded(&self, min_side: T) -> Self {
        let mut b = *self;
        let half: T = lit(0.5);
        for i in 0..3 {
            let side = b.max[i] - b.min[i];
            if side < min_side {
                let grow = (min_side - side) * half;
                b.min[i] -= grow;
                b.max[i] += grow;
            }
        }
        b
    }

    pub fn volume(&self) -> T {
        let e = self.extents();
        e.x * e.y * e.z
    }

    pub fn intersection_volume(&self, other: &Self) -> T {
        let mut v = T::one();
        for i in 0..3 {
            let lo = fmax(self.min[i], other.min[i]);
            let hi = fmin(self.max[i], other.max[i]);
            if hi <= lo {
                return T::zero();
            }
            v *= hi - lo;
        }
        v
    }

    pub fn contains(&self, p: &Point3<T>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Ordered point set tagged with its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T: Real> {
    pub frame: Frame,
    pub points: Vec<Point3<T>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(frame: Frame, points: Vec<Point3<T>>) -> Self {
        Self { frame, points }
    }

    pub fn world(points: Vec<Point3<T>>) -> Self {
        Self::new(Frame::World, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb<T>> {
        Aabb::from_points(&self.points)
    }

    /// Largest axis-aligned side of the cloud; zero for an empty cloud.
    pub fn max_extent(&self) -> T {
        self.bounds().map(|b| b.max_extent()).unwrap_or_else(T::zero)
    }

    pub fn translate(&mut self, t: &Vector3<T>) {
        for p in &mut self.points {
            *p += t;
        }
    }

    /// Moves a camera-frame cloud into the world frame.
    pub fn to_world(&self, pose: &Pose<T>) -> Self {
        debug_assert_eq!(self.frame, Frame::Camera, "cloud is already in the world frame");
        Self::world(self.points.iter().map(|p| pose.transform_point(p)).collect())
    }
}

/// Arithmetic mean of a cloud.
pub fn centroid<T: Real>(cloud: &PointCloud<T>) -> Result<Point3<T>, GeometryError> {
    mean_point(&cloud.points).ok_or(GeometryError::EmptyCloud)
}

pub(crate) fn mean_point<T: Real>(points: &[Point3<T>]) -> Option<Point3<T>> {
    if points.is_empty() {
        return None;
    }
    let sum = points
        .iter()
        .fold(Vector3::zeros(), |acc: Vector3<T>, p| acc + p.coords);
    Some(Point3::from(sum / lit::<T>(points.len() as f64)))
}

/// Pose stamped with a time in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampedPose<T: Real> {
    pub timestamp: f64,
    pub pose: Pose<T>,
}

/// Time-ordered sequence of stamped poses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory<T: Real> {
    pub poses: Vec<StampedPose<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn new(poses: Vec<StampedPose<T>>) -> Self {
        Self { poses }
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.poses.iter().map(|p| p.timestamp)
    }

    /// Pose at `t`, interpolated between the bracketing samples.
    ///
    /// Returns `None` when no pair of samples brackets `t`.
    pub fn interpolate(&self, t: f64) -> Option<Pose<T>> {
        let idx = self.poses.partition_point(|p| p.timestamp < t);
        if let Some(p) = self.poses.get(idx) {
            if p.timestamp == t {
                return Some(p.pose);
            }
        }
        if idx == 0 || idx >= self.poses.len() {
            return None;
        }
        let a = &self.poses[idx - 1];
        let b = &self.poses[idx];
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        Some(a.pose.interpolate(&b.pose, lit(s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose<f64> {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let t = Vector3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        Pose::new(UnitQuaternion::from_scaled_axis(axis * 2.0), t)
    }

    #[test]
    fn project_principal_point() {
        let px = project(&Point3::new(0.0, 0.0, 2.0), &Pose::identity(), &k()).unwrap();
        assert_eq!((px.u, px.v), (320.0, 240.0));
        let px = project(&Point3::new(1.0, 0.0, 2.0), &Pose::identity(), &k()).unwrap();
        assert_eq!((px.u, px.v), (570.0, 240.0));
    }

    #[test]
    fn project_behind_camera_errors() {
        let err = project(&Point3::new(0.0, 0.0, -1.0), &Pose::identity(), &k()).unwrap_err();
        assert!(matches!(err, GeometryError::BehindCamera { .. }));
        assert!(project(&Point3::new(0.0, 0.0, 0.0), &Pose::identity(), &k()).is_err());
    }

    #[test]
    fn backproject_examples() {
        let id = Pose::identity();
        let p = backproject(&Pixel::new(320.0, 240.0), 2.0, &id, &k()).unwrap();
        assert_eq!(p, Point3::new(0.0, 0.0, 2.0));
        let p = backproject(&Pixel::new(570.0, 240.0), 2.0, &id, &k()).unwrap();
        assert_eq!(p, Point3::new(1.0, 0.0, 2.0));

        let shifted = Pose::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let px = Pixel::new(101.5, 377.25);
        let a = backproject(&px, 3.7, &id, &k()).unwrap();
        let b = backproject(&px, 3.7, &shifted, &k()).unwrap();
        assert_relative_eq!(b.coords, a.coords + Vector3::new(1.0, 2.0, 3.0), epsilon = 1e-12);

        assert_eq!(
            backproject(&px, 0.0, &id, &k()),
            Err(GeometryError::NonPositiveDepth(0.0))
        );
    }

    #[test]
    fn project_backproject_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let pose = random_pose(&mut rng);
            let pc = Point3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(0.3..10.0),
            );
            let pw = pose.transform_point(&pc);
            let px = project(&pw, &pose, &k()).unwrap();
            let back = backproject(&px, pc.z, &pose, &k()).unwrap();
            assert_relative_eq!(back.coords, pw.coords, epsilon = 1e-9);
            let px2 = project(&back, &pose, &k()).unwrap();
            assert_relative_eq!(px2.u, px.u, epsilon = 1e-9);
            assert_relative_eq!(px2.v, px.v, epsilon = 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn pose_group_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let (a, b, c) = (
                random_pose(&mut rng),
                random_pose(&mut rng),
                random_pose(&mut rng),
            );
            let ab_c = a.compose(&b).compose(&c);
            let a_bc = a.compose(&b.compose(&c));
            assert_relative_eq!(ab_c.translation(), a_bc.translation(), epsilon = 1e-9);
            assert!(ab_c.rotation().angle_to(a_bc.rotation()) < 1e-9);

            let id = a.compose(&a.inverse());
            assert!(id.translation().norm() < 1e-9);
            assert!(id.rotation().angle() < 1e-9);

            let aa = a.inverse().inverse();
            assert_relative_eq!(aa.translation(), a.translation(), epsilon = 1e-9);
            assert!(aa.rotation().angle_to(a.rotation()) < 1e-9);
            assert!((ab_c.rotation().norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn retract_local_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_pose(&mut rng);
            let d = Vector6::new(0.1, -0.2, 0.3, 0.05, -0.4, 0.2);
            let b = a.retract(&d);
            assert_relative_eq!(a.local(&b), d, epsilon = 1e-9);
        }
    }

    #[test]
    fn look_at_points_optical_axis_at_target() {
        let eye = Point3::new(2.0, 0.0, 1.0);
        let target = Point3::new(0.0, 0.5, 0.8);
        let pose = Pose::look_at(&eye, &target, &Vector3::z());
        let px = project(&target, &pose, &k()).unwrap();
        assert_relative_eq!(px.u, 320.0, epsilon = 1e-9);
        assert_relative_eq!(px.v, 240.0, epsilon = 1e-9);
        // Image v grows downwards.
        let above = project(&Point3::new(0.0, 0.5, 1.5), &pose, &k()).unwrap();
        assert!(above.v < 240.0);
    }

    #[test]
    fn centroid_examples() {
        let c = PointCloud::world(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)]);
        assert_eq!(centroid(&c).unwrap(), Point3::new(1.0, 0.0, 0.0));
        let single = PointCloud::world(vec![Point3::new(0.3, -1.0, 4.0)]);
        assert_eq!(centroid(&single).unwrap(), Point3::new(0.3, -1.0, 4.0));
        assert_eq!(
            centroid(&PointCloud::<f64>::world(vec![])),
            Err(GeometryError::EmptyCloud)
        );
    }

    #[test]
    fn centroid_of_uniform_cube() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let pts: Vec<_> = (0..1000)
            .map(|_| Point3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        // Independent mean, accumulated per axis.
        let n = pts.len() as f64;
        let expected = Point3::new(
            pts.iter().map(|p| p.x).sum::<f64>() / n,
            pts.iter().map(|p| p.y).sum::<f64>() / n,
            pts.iter().map(|p| p.z).sum::<f64>() / n,
        );
        let c = centroid(&PointCloud::world(pts)).unwrap();
        assert_relative_eq!(c.coords, expected.coords, epsilon = 1e-12);
        assert!((c.coords - Vector3::repeat(0.5)).amax() < 0.05);
    }

    #[test]
    fn trajectory_interpolation() {
        let traj = Trajectory::new(vec![
            StampedPose {
                timestamp: 0.0,
                pose: Pose::<f64>::identity(),
            },
            StampedPose {
                timestamp: 1.0,
                pose: Pose::from_translation(Vector3::new(2.0, 0.0, 0.0)),
            },
        ]);
        let mid = traj.interpolate(0.25).unwrap();
        assert_relative_eq!(mid.translation().x, 0.5);
        assert!(traj.interpolate(1.5).is_none());
        assert!(traj.interpolate(-0.1).is_none());
        assert_eq!(traj.interpolate(1.0).unwrap().translation().x, 2.0);
    }

    #[test]
    fn right_jacobian_inverse_matches_log_perturbation() {
        let phi = Vector3::new(0.3, -0.7, 0.2);
        let r = UnitQuaternion::from_scaled_axis(phi);
        let jinv = so3_right_jacobian_inv(&phi);
        let h = 1e-6;
        for i in 0..3 {
            let mut d = Vector3::zeros();
            d[i] = h;
            let plus = (r * UnitQuaternion::from_scaled_axis(d)).scaled_axis();
            let minus = (r * UnitQuaternion::from_scaled_axis(-d)).scaled_axis();
            let col = (plus - minus) / (2.0 * h);
            assert_relative_eq!(col, jinv.column(i).into_owned(), epsilon = 1e-6);
        }
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 640.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::<f32>::new(500.0, 500.0, 320.0, 240.0, 640, 480).is_ok());
    }

    #[test]
    fn works_in_single_precision() {
        let k = CameraIntrinsics::<f32>::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        let px = project(&Point3::new(1.0f32, 0.0, 2.0), &Pose::identity(), &k).unwrap();
        assert_eq!(px.u, 570.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn centroid_translation_equivariant(
                pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..50),
                t in (-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0),
            ) {
                let cloud = PointCloud::world(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect());
                let tv = Vector3::new(t.0, t.1, t.2);
                let mut moved = cloud.clone();
                moved.translate(&tv);
                let a = centroid(&cloud).unwrap().coords + tv;
                let b = centroid(&moved).unwrap().coords;
                prop_assert!((a - b).amax() < 1e-12);
            }
        }
    }
}
