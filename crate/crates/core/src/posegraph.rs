//! Pose graph over camera poses and landmark points.
//!
//! Poses are SE(3) camera-to-world transforms updated on the right for
//! rotation and additively for translation (see [`Pose::retract`]). Landmark
//! points live in the world frame. Factors:
//!
//! * prior on one pose (gauge),
//! * odometry between two poses,
//! * pixel reprojection of a landmark in a pose.
//!
//! Levenberg–Marquardt runs on the normal equations stored in skyline
//! (variable band) form. Poses are ordered by frame id and landmarks last,
//! which keeps the profile narrow for odometry chains.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DVector, Matrix2, Matrix2x3, Matrix6, Point3, SMatrix, Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::association::LandmarkMap;
use crate::geometry::{skew, so3_right_jacobian_inv, CameraIntrinsics, Pixel, Pose};
use crate::scalar::{fmax, fmin, lit, to_f64, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("odometry references unknown source pose {0}")]
    UnknownFromNode(u64),
    #[error("unknown pose {0}")]
    UnknownPose(u64),
    #[error("unknown landmark {0}")]
    UnknownLandmark(u64),
    #[error("graph has no prior factor")]
    MissingPrior,
    #[error("pose {0} is not connected to the prior")]
    Disconnected(u64),
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("cost is not finite at the initial estimate")]
    NonFiniteCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorFactor<T: Real> {
    pub pose_id: u64,
    pub pose: Pose<T>,
    pub information: Matrix6<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdometryFactor<T: Real> {
    pub from: u64,
    pub to: u64,
    /// `from⁻¹ · to`.
    pub relative: Pose<T>,
    pub information: Matrix6<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFactor<T: Real> {
    pub pose_id: u64,
    pub landmark_id: u64,
    pub pixel: Pixel<T>,
    /// Pixels⁻².
    pub information: Matrix2<T>,
    pub intrinsics: CameraIntrinsics<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig<T: Real> {
    pub max_iterations: usize,
    pub relative_tolerance: T,
    pub gradient_tolerance: T,
    pub initial_lambda: T,
    /// Huber threshold in pixels on observation factors; 0 disables it.
    pub huber_px: T,
}

impl<T: Real> Default for LmConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            relative_tolerance: lit(1e-9),
            gradient_tolerance: lit(1e-10),
            initial_lambda: lit(1e-4),
            huber_px: lit(5.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingStep<T: Real> {
    pub lambda: T,
    /// Cost of the trial point; infinite when a factor left the image side.
    pub cost: T,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<T: Real> {
    pub iterations: usize,
    pub initial_cost: T,
    pub final_cost: T,
    pub converged: bool,
    pub damping: Vec<DampingStep<T>>,
    /// Observation factors (index into [`Graph::observations`]) skipped
    /// because the landmark was behind the camera at the start.
    pub deactivated: Vec<usize>,
}

/// Residual and Jacobians of a prior factor.
pub fn prior_residual<T: Real>(pose: &Pose<T>, target: &Pose<T>) -> (Vector6<T>, Matrix6<T>) {
    let r = target.local(pose);
    let theta = Vector3::new(r[3], r[4], r[5]);
    let mut j = Matrix6::identity();
    j.fixed_view_mut::<3, 3>(3, 3).copy_from(&so3_right_jacobian_inv(&theta));
    (r, j)
}

/// Residual `[R_iᵀ(t_j − t_i) − t_ij ; Log(R_ijᵀ R_iᵀ R_j)]` and its Jacobians
/// with respect to the tangent updates of both poses.
pub fn odometry_residual<T: Real>(
    pi: &Pose<T>,
    pj: &Pose<T>,
    relative: &Pose<T>,
) -> (Vector6<T>, Matrix6<T>, Matrix6<T>) {
    let ri = pi.rotation_matrix();
    let rj = pj.rotation_matrix();
    let d = ri.transpose() * (pj.translation() - pi.translation());
    let rt = d - relative.translation();
    let err = relative.rotation().inverse() * pi.rotation().inverse() * pj.rotation();
    let rr = err.scaled_axis();
    let jr_inv = so3_right_jacobian_inv(&rr);

    let mut ji = Matrix6::zeros();
    let mut jj = Matrix6::zeros();
    ji.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-ri.transpose()));
    ji.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(&d));
    ji.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-(jr_inv * rj.transpose() * ri)));
    jj.fixed_view_mut::<3, 3>(0, 0).copy_from(&ri.transpose());
    jj.fixed_view_mut::<3, 3>(3, 3).copy_from(&jr_inv);
    (
        Vector6::new(rt[0], rt[1], rt[2], rr[0], rr[1], rr[2]),
        ji,
        jj,
    )
}

/// Pixel residual `π(R_iᵀ(X − t_i)) − z` and Jacobians with respect to the
/// pose update and the landmark. `None` when the point is not in front of the camera.
pub fn observation_residual<T: Real>(
    pose: &Pose<T>,
    x: &Point3<T>,
    pixel: &Pixel<T>,
    k: &CameraIntrinsics<T>,
) -> Option<(Vector2<T>, SMatrix<T, 2, 6>, Matrix2x3<T>)> {
    let rt = pose.rotation_matrix().transpose();
    let pc = rt * (x - pose.translation()).coords;
    if !(pc.z > T::zero()) {
        return None;
    }
    let iz = T::one() / pc.z;
    let u = k.fx * pc.x * iz + k.cx;
    let v = k.fy * pc.y * iz + k.cy;
    let r = Vector2::new(u - pixel.u, v - pixel.v);
    let dpi = Matrix2x3::new(
        k.fx * iz,
        T::zero(),
        -k.fx * pc.x * iz * iz,
        T::zero(),
        k.fy * iz,
        -k.fy * pc.y * iz * iz,
    );
    let jx = dpi * rt;
    let mut jp = SMatrix::<T, 2, 6>::zeros();
    jp.fixed_view_mut::<2, 3>(0, 0).copy_from(&(-jx));
    jp.fixed_view_mut::<2, 3>(0, 3).copy_from(&(dpi * skew(&pc)));
    Some((r, jp, jx))
}

/// Huber loss on a squared whitened error `s`, and its derivative in `s`.
fn huber<T: Real>(s: T, k: Option<T>) -> (T, T) {
    match k {
        Some(k) if s > k * k => {
            let e = s.sqrt();
            (lit::<T>(2.0) * k * e - k * k, k / e)
        }
        _ => (s, T::one()),
    }
}

fn huber_scale<T: Real>(info: &Matrix2<T>, huber_px: T) -> Option<T> {
    (huber_px > T::zero()).then(|| huber_px * (info.trace() / lit(2.0)).sqrt())
}

#[derive(Debug, Clone, Default)]
pub struct Graph<T: Real> {
    poses: BTreeMap<u64, Pose<T>>,
    landmarks: BTreeMap<u64, Point3<T>>,
    prior: Option<PriorFactor<T>>,
    odometry: Vec<OdometryFactor<T>>,
    observations: Vec<ObservationFactor<T>>,
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            poses: BTreeMap::new(),
            landmarks: BTreeMap::new(),
            prior: None,
            odometry: Vec::new(),
            observations: Vec::new(),
        }
    }

    pub fn poses(&self) -> &BTreeMap<u64, Pose<T>> {
        &self.poses
    }

    pub fn landmarks(&self) -> &BTreeMap<u64, Point3<T>> {
        &self.landmarks
    }

    pub fn prior(&self) -> Option<&PriorFactor<T>> {
        self.prior.as_ref()
    }

    pub fn odometry(&self) -> &[OdometryFactor<T>] {
        &self.odometry
    }

    pub fn observations(&self) -> &[ObservationFactor<T>] {
        &self.observations
    }

    pub fn pose(&self, id: u64) -> Option<&Pose<T>> {
        self.poses.get(&id)
    }

    pub fn landmark(&self, id: u64) -> Option<&Point3<T>> {
        self.landmarks.get(&id)
    }

    /// Inserts or overwrites a pose estimate.
    pub fn set_pose(&mut self, id: u64, pose: Pose<T>) {
        self.poses.insert(id, pose);
    }

    /// Inserts or overwrites a landmark estimate.
    pub fn set_landmark(&mut self, id: u64, x: Point3<T>) {
        self.landmarks.insert(id, x);
    }

    /// Fixes the gauge at `pose_id`; replaces any previous prior.
    pub fn set_prior(&mut self, pose_id: u64, pose: Pose<T>, information: Matrix6<T>) {
        self.poses.entry(pose_id).or_insert(pose);
        self.prior = Some(PriorFactor {
            pose_id,
            pose,
            information,
        });
    }

    pub fn clear_prior(&mut self) {
        self.prior = None;
    }

    pub fn add_odometry(
        &mut self,
        from: u64,
        to: u64,
        relative: Pose<T>,
        information: Matrix6<T>,
    ) -> Result<(), GraphError> {
        let start = *self.poses.get(&from).ok_or(GraphError::UnknownFromNode(from))?;
        self.poses.entry(to).or_insert_with(|| start.compose(&relative));
        self.odometry.push(OdometryFactor {
            from,
            to,
            relative,
            information,
        });
        Ok(())
    }

    /// Adds a reprojection factor; the landmark node starts at `initial`
    /// when it does not exist yet.
    pub fn add_observation(&mut self, f: ObservationFactor<T>, initial: &Point3<T>) -> Result<(), GraphError> {
        if !self.poses.contains_key(&f.pose_id) {
            return Err(GraphError::UnknownPose(f.pose_id));
        }
        self.landmarks.entry(f.landmark_id).or_insert(*initial);
        self.observations.push(f);
        Ok(())
    }

    /// Redirects every factor of landmark `old` to `kept` and drops `old`.
    pub fn remap_landmark(&mut self, old: u64, kept: u64) {
        if old == kept {
            return;
        }
        if let Some(x) = self.landmarks.remove(&old) {
            self.landmarks.entry(kept).or_insert(x);
        }
        for f in &mut self.observations {
            if f.landmark_id == old {
                f.landmark_id = kept;
            }
        }
    }

    /// Observation factors whose landmark is in front of the camera.
    fn active_observations(&self) -> (Vec<usize>, Vec<usize>) {
        let mut active = Vec::new();
        let mut inactive = Vec::new();
        for (i, f) in self.observations.iter().enumerate() {
            let (Some(p), Some(x)) = (self.poses.get(&f.pose_id), self.landmarks.get(&f.landmark_id)) else {
                inactive.push(i);
                continue;
            };
            if p.inverse_transform_point(x).z > T::zero() {
                active.push(i);
            } else {
                inactive.push(i);
            }
        }
        (active, inactive)
    }

    fn check_connected(&self, active: &[usize]) -> Result<(), GraphError> {
        let prior = self.prior.as_ref().ok_or(GraphError::MissingPrior)?;
        let mut adj: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
        let mut link = |a: Node, b: Node| {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        };
        for f in &self.odometry {
            link(Node::Pose(f.from), Node::Pose(f.to));
        }
        for &i in active {
            let f = &self.observations[i];
            link(Node::Pose(f.pose_id), Node::Landmark(f.landmark_id));
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![Node::Pose(prior.pose_id)];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                if let Some(next) = adj.get(&n) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        match self.poses.keys().find(|id| !seen.contains(&Node::Pose(**id))) {
            Some(id) => Err(GraphError::Disconnected(*id)),
            None => Ok(()),
        }
    }

    /// Total cost with every observation factor that is currently in front
    /// of its camera.
    pub fn cost(&self, cfg: &LmConfig<T>) -> T {
        let (active, _) = self.active_observations();
        self.cost_with(&self.poses, &self.landmarks, &active, cfg)
    }

    fn cost_with(
        &self,
        poses: &BTreeMap<u64, Pose<T>>,
        landmarks: &BTreeMap<u64, Point3<T>>,
        active: &[usize],
        cfg: &LmConfig<T>,
    ) -> T {
        let half: T = lit(0.5);
        let mut total = T::zero();
        if let Some(p) = &self.prior {
            let (r, _) = prior_residual(&poses[&p.pose_id], &p.pose);
            total += half * (r.transpose() * p.information * r)[0];
        }
        for f in &self.odometry {
            let (r, _, _) = odometry_residual(&poses[&f.from], &poses[&f.to], &f.relative);
            total += half * (r.transpose() * f.information * r)[0];
        }
        for &i in active {
            let f = &self.observations[i];
            match observation_residual(&poses[&f.pose_id], &landmarks[&f.landmark_id], &f.pixel, &f.intrinsics) {
                Some((r, _, _)) => {
                    let s = (r.transpose() * f.information * r)[0];
                    total += half * huber(s, huber_scale(&f.information, cfg.huber_px)).0;
                }
                None => return T::max_value().expect("bounded scalar"),
            }
        }
        total
    }

    fn linearize(&self, active: &[usize], cfg: &LmConfig<T>, layout: &Layout, h: &mut Skyline<T>) -> DVector<T> {
        let mut g = DVector::zeros(layout.dim);
        if let Some(p) = &self.prior {
            let (r, j) = prior_residual(&self.poses[&p.pose_id], &p.pose);
            let a = layout.poses[&p.pose_id];
            let jt_w = j.transpose() * p.information;
            h.add_block(a, a, &(jt_w * j));
            add_segment(&mut g, a, &(jt_w * r));
        }
        for f in &self.odometry {
            let (r, ji, jj) = odometry_residual(&self.poses[&f.from], &self.poses[&f.to], &f.relative);
            let (a, b) = (layout.poses[&f.from], layout.poses[&f.to]);
            let jit = ji.transpose() * f.information;
            let jjt = jj.transpose() * f.information;
            h.add_block(a, a, &(jit * ji));
            h.add_block(b, b, &(jjt * jj));
            h.add_block(b, a, &(jjt * ji));
            if a == b {
                h.add_block(a, a, &(jit * jj));
            }
            add_segment(&mut g, a, &(jit * r));
            add_segment(&mut g, b, &(jjt * r));
        }
        for &i in active {
            let f = &self.observations[i];
            let Some((r, jp, jx)) =
                observation_residual(&self.poses[&f.pose_id], &self.landmarks[&f.landmark_id], &f.pixel, &f.intrinsics)
            else {
                continue;
            };
            let s = (r.transpose() * f.information * r)[0];
            let (_, w) = huber(s, huber_scale(&f.information, cfg.huber_px));
            let info = f.information * w;
            let (a, b) = (layout.poses[&f.pose_id], layout.landmarks[&f.landmark_id]);
            let jpt = jp.transpose() * info;
            let jxt = jx.transpose() * info;
            h.add_block(a, a, &(jpt * jp));
            h.add_block(b, b, &(jxt * jx));
            h.add_block(b, a, &(jxt * jp));
            add_segment(&mut g, a, &(jpt * r));
            add_segment(&mut g, b, &(jxt * r));
        }
        g
    }

    fn retracted(&self, layout: &Layout, delta: &DVector<T>) -> (BTreeMap<u64, Pose<T>>, BTreeMap<u64, Point3<T>>) {
        let mut poses = self.poses.clone();
        for (id, &a) in &layout.poses {
            let d = Vector6::from_iterator(delta.rows(a, 6).iter().copied());
            let p = poses.get_mut(id).expect("layout pose exists");
            *p = p.retract(&d);
        }
        let mut landmarks = self.landmarks.clone();
        for (id, &b) in &layout.landmarks {
            let x = landmarks.get_mut(id).expect("layout landmark exists");
            *x += Vector3::new(delta[b], delta[b + 1], delta[b + 2]);
        }
        (poses, landmarks)
    }

    /// Levenberg–Marquardt over all poses and observed landmarks.
    pub fn optimize(&mut self, cfg: &LmConfig<T>) -> Result<SolveReport<T>, GraphError> {
        let (active, deactivated) = self.active_observations();
        self.check_connected(&active)?;
        let layout = Layout::new(self, &active);
        let template = Skyline::with_profile(&layout.first_columns(self, &active));

        let mut cost = self.cost_with(&self.poses, &self.landmarks, &active, cfg);
        if !cost.is_finite() || cost == T::max_value().expect("bounded scalar") {
            return Err(GraphError::NonFiniteCost);
        }
        let mut report = SolveReport {
            iterations: 0,
            initial_cost: cost,
            final_cost: cost,
            converged: false,
            damping: Vec::new(),
            deactivated,
        };
        let mut lambda = cfg.initial_lambda;
        let lambda_max: T = lit(1e16);
        let tiny: T = lit(1e-30);

        'outer: while report.iterations < cfg.max_iterations {
            if cost <= tiny {
                report.converged = true;
                break;
            }
            report.iterations += 1;
            let mut h = template.clone();
            let g = self.linearize(&active, cfg, &layout, &mut h);
            if g.amax() < cfg.gradient_tolerance {
                report.converged = true;
                break;
            }
            let diag: Vec<T> = (0..layout.dim)
                .map(|i| fmin(fmax(h.get(i, i), lit(1e-6)), lit(1e32)))
                .collect();
            loop {
                let mut a = h.clone();
                for (i, d) in diag.iter().enumerate() {
                    a.add(i, i, lambda * *d);
                }
                let step = a.factor().map(|l| l.solve(&(-&g)));
                let trial_cost = match &step {
                    Ok(delta) if delta.iter().all(|v| v.is_finite()) => {
                        let (poses, landmarks) = self.retracted(&layout, delta);
                        let c = self.cost_with(&poses, &landmarks, &active, cfg);
                        if c < cost {
                            report.damping.push(DampingStep {
                                lambda,
                                cost: c,
                                accepted: true,
                            });
                            let rel = (cost - c) / cost;
                            self.poses = poses;
                            self.landmarks = landmarks;
                            cost = c;
                            lambda = fmax(lambda / lit(10.0), lit(1e-12));
                            if rel < cfg.relative_tolerance {
                                report.converged = true;
                                break 'outer;
                            }
                            continue 'outer;
                        }
                        c
                    }
                    _ => T::max_value().expect("bounded scalar"),
                };
                report.damping.push(DampingStep {
                    lambda,
                    cost: trial_cost,
                    accepted: false,
                });
                lambda *= lit(10.0);
                if lambda > lambda_max {
                    if step.is_err() && report.damping.iter().all(|d| !d.accepted) {
                        return Err(GraphError::SingularSystem);
                    }
                    report.converged = true;
                    break 'outer;
                }
            }
        }
        report.final_cost = cost;
        Ok(report)
    }
}

/// Writes optimized landmark positions back into the map; returns how many
/// landmarks moved.
pub fn apply_correction<T: Real>(graph: &Graph<T>, map: &mut LandmarkMap<T>) -> usize {
    let ids: Vec<u64> = map.iter().map(|l| l.id).collect();
    let mut moved = 0;
    for id in ids {
        if let Some(x) = graph.landmark(id) {
            let lm = map.get_mut(id).expect("listed landmark exists");
            if lm.centroid != *x {
                lm.set_centroid(*x);
                moved += 1;
            }
        }
    }
    moved
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Pose(u64),
    Landmark(u64),
}

/// Column offsets of every variable block.
struct Layout {
    poses: BTreeMap<u64, usize>,
    landmarks: BTreeMap<u64, usize>,
    dim: usize,
}

impl Layout {
    fn new<T: Real>(graph: &Graph<T>, active: &[usize]) -> Self {
        let mut poses = BTreeMap::new();
        let mut dim = 0;
        for id in graph.poses.keys() {
            poses.insert(*id, dim);
            dim += 6;
        }
        let observed: BTreeSet<u64> = active.iter().map(|&i| graph.observations[i].landmark_id).collect();
        let mut landmarks = BTreeMap::new();
        for id in observed {
            landmarks.insert(id, dim);
            dim += 3;
        }
        Self { poses, landmarks, dim }
    }

    /// First nonzero column of each row of the lower triangle.
    fn first_columns<T: Real>(&self, graph: &Graph<T>, active: &[usize]) -> Vec<usize> {
        let mut block_first: Vec<usize> = (0..self.dim).collect();
        let mut couple = |a: usize, na: usize, b: usize, nb: usize| {
            let lo = a.min(b);
            for r in a..a + na {
                block_first[r] = block_first[r].min(lo);
            }
            for r in b..b + nb {
                block_first[r] = block_first[r].min(lo);
            }
        };
        for &start in self.poses.values() {
            couple(start, 6, start, 6);
        }
        for &start in self.landmarks.values() {
            couple(start, 3, start, 3);
        }
        for f in &graph.odometry {
            couple(self.poses[&f.from], 6, self.poses[&f.to], 6);
        }
        for &i in active {
            let f = &graph.observations[i];
            couple(self.poses[&f.pose_id], 6, self.landmarks[&f.landmark_id], 3);
        }
        block_first
    }
}

fn add_segment<T: Real, const N: usize>(g: &mut DVector<T>, at: usize, v: &SMatrix<T, N, 1>) {
    for i in 0..N {
        g[at + i] += v[i];
    }
}

/// Symmetric matrix stored by rows of its lower triangle, each row from its
/// first nonzero column to the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Skyline<T: Real> {
    first: Vec<usize>,
    rows: Vec<Vec<T>>,
}

impl<T: Real> Skyline<T> {
    /// Zero matrix with the given profile; `first[i] ≤ i`.
    pub fn with_profile(first: &[usize]) -> Self {
        let rows = first
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                assert!(f <= i, "profile start beyond diagonal");
                vec![T::zero(); i - f + 1]
            })
            .collect();
        Self {
            first: first.to_vec(),
            rows,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    /// Entry `(i, j)` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j < self.first[i] {
            T::zero()
        } else {
            self.rows[i][j - self.first[i]]
        }
    }

    /// Adds `v` to entry `(i, j)`, `i ≥ j`; panics outside the profile.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i >= j);
        let f = self.first[i];
        assert!(j >= f, "entry ({i}, {j}) outside the skyline profile");
        self.rows[i][j - f] += v;
    }

    /// Adds a block whose top-left corner is `(r, c)` with `r ≥ c`; on the
    /// diagonal only its lower triangle is used.
    fn add_block<const R: usize, const C: usize>(&mut self, r: usize, c: usize, m: &SMatrix<T, R, C>) {
        for a in 0..R {
            for b in 0..C {
                let (i, j) = (r + a, c + b);
                if i >= j {
                    self.add(i, j, m[(a, b)]);
                }
            }
        }
    }

    /// In-place Cholesky factor `L` with `A = L Lᵀ`, keeping the profile.
    pub fn factor(mut self) -> Result<Self, GraphError> {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            for j in fi..=i {
                let fj = self.first[j];
                let start = fi.max(fj);
                let mut s = self.rows[i][j - fi];
                for k in start..j {
                    s -= self.rows[i][k - fi] * self.rows[j][k - fj];
                }
                if j < i {
                    self.rows[i][j - fi] = s / self.rows[j][j - fj];
                } else {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(GraphError::SingularSystem);
                    }
                    self.rows[i][i - fi] = s.sqrt();
                }
            }
        }
        Ok(self)
    }

    /// Solves `L Lᵀ x = b` with `self` holding `L`.
    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.rows[i][k - fi] * y[k];
            }
            y[i] = s / self.rows[i][i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.rows[i][i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.rows[i][k - fi] * yi;
            }
        }
        y
    }
}

/// Information matrix `diag(1/σ_t², 1/σ_t², 1/σ_t², 1/σ_r², 1/σ_r², 1/σ_r²)`.
pub fn diagonal_information<T: Real>(sigma_t: T, sigma_r: T) -> Matrix6<T> {
    let it = T::one() / (sigma_t * sigma_t);
    let ir = T::one() / (sigma_r * sigma_r);
    Matrix6::from_diagonal(&Vector6::new(it, it, it, ir, ir, ir))
}

pub fn prior_information<T: Real>() -> Matrix6<T> {
    Matrix6::identity() * lit::<T>(1e8)
}

/// Widened copy of the damping trace for reporting.
pub fn damping_trace_f64<T: Real>(report: &SolveReport<T>) -> Vec<(f64, f64, bool)> {
    report
        .damping
        .iter()
        .map(|d| (to_f64(d.lambda), to_f64(d.cost), d.accepted))
        .collect()
}
