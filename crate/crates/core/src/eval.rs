//! Trajectory error after rigid alignment, landmark-map scoring and stage
//! timing summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Point3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose, Trajectory};
use crate::scalar::{lit, to_f64, Real};
use crate::simulator::RegistryObject;

/// Largest timestamp difference accepted when pairing poses, seconds.
pub const MATCH_WINDOW: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("need at least 3 matched poses, got {0}")]
    TooFewMatches(usize),
    #[error("matched positions are collinear or coincident")]
    DegenerateConfiguration,
}

/// Index pairs `(est, gt)` of poses whose timestamps agree within `window`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched: usize,
}

/// Pairs each estimated pose with the nearest ground-truth timestamp.
pub fn match_timestamps<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>, window: f64) -> Matching {
    let gt_t: Vec<f64> = gt.timestamps().collect();
    let mut pairs = Vec::new();
    for (i, p) in est.poses.iter().enumerate() {
        let j = gt_t.partition_point(|t| *t < p.timestamp);
        let best = [j.checked_sub(1), (j < gt_t.len()).then_some(j)]
            .into_iter()
            .flatten()
            .min_by(|a, b| {
                (gt_t[*a] - p.timestamp)
                    .abs()
                    .total_cmp(&(gt_t[*b] - p.timestamp).abs())
            });
        if let Some(j) = best.filter(|j| (gt_t[*j] - p.timestamp).abs() <= window) {
            pairs.push((i, j));
        }
    }
    Matching {
        unmatched: est.len() - pairs.len(),
        pairs,
    }
}

/// Least-squares similarity `dst ≈ s·R·src + t` (Umeyama). Returns the rigid
/// part and the scale; the scale is 1 unless `with_scale`.
pub fn umeyama<T: Real>(
    src: &[Point3<T>],
    dst: &[Point3<T>],
    with_scale: bool,
) -> Result<(Pose<T>, T), EvalError> {
    let n = src.len().min(dst.len());
    if n < 3 {
        return Err(EvalError::TooFewMatches(n));
    }
    let inv_n = T::one() / lit(n as f64);
    if src[..n] == dst[..n] && !collinear(src) {
        return Ok((Pose::identity(), T::one()));
    }
    let mu_s = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv_n;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) * inv_n;
    let mut cov = Matrix3::zeros();
    let mut var_s = T::zero();
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (s.coords - mu_s, d.coords - mu_d);
        cov += b * a.transpose();
        var_s += a.norm_squared();
    }
    cov *= inv_n;
    var_s *= inv_n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut sv = svd.singular_values;
    // Order singular values descending alongside their vectors.
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|a, b| sv[*b].partial_cmp(&sv[*a]).unwrap_or(std::cmp::Ordering::Equal));
    let u = Matrix3::from_columns(&[u.column(idx[0]), u.column(idx[1]), u.column(idx[2])]);
    let v_t = Matrix3::from_rows(&[v_t.row(idx[0]), v_t.row(idx[1]), v_t.row(idx[2])]);
    sv = Vector3::new(sv[idx[0]], sv[idx[1]], sv[idx[2]]);
    if !(sv[0] > T::zero()) || sv[1] <= sv[0] * lit(1e-12) {
        return Err(EvalError::DegenerateConfiguration);
    }
    let mut d = Matrix3::identity();
    if (u.determinant() * v_t.determinant()) < T::zero() {
        d[(2, 2)] = -T::one();
    }
    let r = u * d * v_t;
    let scale = if with_scale {
        (sv[0] * d[(0, 0)] + sv[1] * d[(1, 1)] + sv[2] * d[(2, 2)]) / var_s
    } else {
        T::one()
    };
    let t = mu_d - r * mu_s * scale;
    let rot = UnitQuaternion::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
    Ok((Pose::new(rot, t), scale))
}

fn collinear<T: Real>(pts: &[Point3<T>]) -> bool {
    let Some(a) = pts.first() else { return true };
    let Some(b) = pts.iter().find(|p| *p != a) else { return true };
    let dir = b - a;
    let scale = dir.norm_squared();
    pts.iter().all(|p| (p - a).cross(&dir).norm_squared() <= scale * scale * lit(1e-24))
}

fn matched_positions<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> (Vec<Point3<T>>, Vec<Point3<T>>, usize) {
    let m = match_timestamps(est, gt, MATCH_WINDOW);
    let src = m.pairs.iter().map(|(i, _)| Point3::from(*est.poses[*i].pose.translation())).collect();
    let dst = m.pairs.iter().map(|(_, j)| Point3::from(*gt.poses[*j].pose.translation())).collect();
    (src, dst, m.unmatched)
}

/// Rigid transform `S` taking estimated positions onto ground truth.
pub fn align_umeyama<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<Pose<T>, EvalError> {
    let (src, dst, _) = matched_positions(est, gt);
    umeyama(&src, &dst, false).map(|(s, _)| s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedError<T: Real> {
    pub s: Pose<T>,
    /// Meters, one per matched pose.
    pub per_frame_errors: Vec<T>,
    pub rmse: T,
    pub unmatched: usize,
}

fn rms<T: Real>(errors: &[T]) -> T {
    if errors.is_empty() {
        return T::zero();
    }
    let sum = errors.iter().fold(T::zero(), |a, e| a + *e * *e);
    (sum / lit(errors.len() as f64)).sqrt()
}

/// Per-frame translational error of `gt⁻¹ · S · est` after alignment.
pub fn aligned_error<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<AlignedError<T>, EvalError> {
    let (src, dst, unmatched) = matched_positions(est, gt);
    let (s, _) = umeyama(&src, &dst, false)?;
    let per_frame_errors: Vec<T> = src
        .iter()
        .zip(&dst)
        .map(|(p, q)| (s.transform_point(p) - q).norm())
        .collect();
    Ok(AlignedError {
        s,
        rmse: rms(&per_frame_errors),
        per_frame_errors,
        unmatched,
    })
}

/// ATE RMSE after rigid alignment, meters.
pub fn ate_rmse<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<T, EvalError> {
    aligned_error(est, gt).map(|e| e.rmse)
}

/// ATE RMSE without alignment, meters.
pub fn ate_rmse_unaligned<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> T {
    let (src, dst, _) = matched_positions(est, gt);
    let errors: Vec<T> = src.iter().zip(&dst).map(|(p, q)| (p - q).norm()).collect();
    rms(&errors)
}

/// ATE RMSE after similarity alignment; for monocular-style comparisons only.
pub fn ate_rmse_scaled<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>) -> Result<T, EvalError> {
    let (src, dst, _) = matched_positions(est, gt);
    let (s, scale) = umeyama(&src, &dst, true)?;
    let errors: Vec<T> = src
        .iter()
        .zip(&dst)
        .map(|(p, q)| (s.rotation() * p.coords * scale + s.translation() - q.coords).norm())
        .collect();
    Ok(rms(&errors))
}

/// Relative reduction of `value` against `baseline`, percent.
pub fn improvement_percent(baseline: f64, value: f64) -> f64 {
    if baseline > 0.0 {
        100.0 * (baseline - value) / baseline
    } else {
        0.0
    }
}

/// CSV of aligned estimate and ground truth: `timestamp,ex,ey,ez,gx,gy,gz,error`.
pub fn aligned_csv<T: Real>(est: &Trajectory<T>, gt: &Trajectory<T>, s: &Pose<T>) -> String {
    let m = match_timestamps(est, gt, MATCH_WINDOW);
    let mut out = String::from("timestamp,ex,ey,ez,gx,gy,gz,error\n");
    for (i, j) in m.pairs {
        let e = s.transform_point(&Point3::from(*est.poses[i].pose.translation()));
        let g = gt.poses[j].pose.translation();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            est.poses[i].timestamp,
            to_f64(e.x),
            to_f64(e.y),
            to_f64(e.z),
            to_f64(g.x),
            to_f64(g.y),
            to_f64(g.z),
            to_f64((e.coords - g).norm())
        );
    }
    out
}

/// A mapped object as read back from a landmark map document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappedObject {
    pub id: u64,
    pub class_id: u32,
    pub centroid: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkScore {
    pub precision: f64,
    pub recall: f64,
    /// Meters; 0 when nothing matched.
    pub mean_centroid_error: f64,
    /// `(landmark id, registry id)`.
    pub matches: Vec<(u64, usize)>,
    /// Landmarks lying on the path of a moving object of the same class.
    pub dynamic_matches: Vec<(u64, usize)>,
    /// Set when the map is empty and precision is 1 by convention.
    pub empty_map: bool,
}

fn distance_to_segment(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * s)).norm()
}

/// Greedy one-to-one matching of landmarks to static registry objects of
/// the same class within twice the object's largest extent, closest pairs
/// first. Recall counts static objects only.
pub fn score_landmarks(map: &[MappedObject], registry: &[RegistryObject]) -> LandmarkScore {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let mut dynamic_matches = Vec::new();
    for (li, l) in map.iter().enumerate() {
        let c = Point3::from(l.centroid);
        for (oi, o) in registry.iter().enumerate() {
            if o.class_id != l.class_id {
                continue;
            }
            let gate = 2.0 * o.max_extent();
            if o.dynamic {
                let d = distance_to_segment(&c, &Point3::from(o.center), &Point3::from(o.end_center));
                if d <= gate {
                    dynamic_matches.push((l.id, o.id));
                }
                continue;
            }
            let d = (c - Point3::from(o.center)).norm();
            if d <= gate {
                candidates.push((d, li, oi));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_l = vec![false; map.len()];
    let mut used_o = vec![false; registry.len()];
    let mut matches = Vec::new();
    let mut err_sum = 0.0;
    for (d, li, oi) in candidates {
        if used_l[li] || used_o[oi] {
            continue;
        }
        used_l[li] = true;
        used_o[oi] = true;
        matches.push((map[li].id, registry[oi].id));
        err_sum += d;
    }
    let n_static = registry.iter().filter(|o| !o.dynamic).count();
    let empty_map = map.is_empty();
    LandmarkScore {
        precision: if empty_map { 1.0 } else { matches.len() as f64 / map.len() as f64 },
        recall: if n_static == 0 { 1.0 } else { matches.len() as f64 / n_static as f64 },
        mean_centroid_error: if matches.is_empty() { 0.0 } else { err_sum / matches.len() as f64 },
        matches,
        dynamic_matches,
        empty_map,
    }
}

/// Pipeline stages that are timed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Proposal,
    AssociationPath1,
    AssociationPath2,
    Update,
    Optimize,
    /// Whole frame, excluding detection generation.
    Frame,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Proposal,
        Stage::AssociationPath1,
        Stage::AssociationPath2,
        Stage::Update,
        Stage::Optimize,
        Stage::Frame,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSample {
    pub stage: Stage,
    pub ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageStat {
    pub count: usize,
    pub mean_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: BTreeMap<Stage, StageStat>,
    pub no_data: bool,
}

impl StageTimings {
    pub fn get(&self, stage: Stage) -> StageStat {
        self.stages.get(&stage).copied().unwrap_or_default()
    }
}

/// Mean and maximum duration per stage; stages without samples report zeros.
pub fn timing_report(trace: &[StageSample]) -> StageTimings {
    let mut stages: BTreeMap<Stage, StageStat> = Stage::ALL.iter().map(|s| (*s, StageStat::default())).collect();
    for s in trace {
        let e = stages.entry(s.stage).or_default();
        e.count += 1;
        e.mean_ms += s.ms;
        e.max_ms = e.max_ms.max(s.ms);
    }
    for e in stages.values_mut() {
        if e.count > 0 {
            e.mean_ms /= e.count as f64;
        }
    }
    StageTimings {
        stages,
        no_data: trace.is_empty(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::StampedPose;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix4, Vector4};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj(points: &[Point3<f64>]) -> Trajectory<f64> {
        Trajectory::new(
            points
                .iter()
                .enumerate()
                .map(|(i, p)| StampedPose {
                    timestamp: i as f64 * 0.1,
                    pose: Pose::from_translation(p.coords),
                })
                .collect(),
        )
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn random_rigid(rng: &mut ChaCha8Rng) -> Pose<f64> {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        Pose::new(
            UnitQuaternion::from_scaled_axis(axis.normalize() * rng.random_range(-3.0..3.0)),
            Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
        )
    }

    /// Horn's closed-form quaternion alignment; the dominant eigenvector is
    /// found by power iteration, so no SVD is involved.
    fn horn(src: &[Point3<f64>], dst: &[Point3<f64>]) -> Pose<f64> {
        let n = src.len() as f64;
        let ms = src.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
        let md = dst.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
        let mut m = Matrix3::zeros();
        for (s, d) in src.iter().zip(dst) {
            m += (s.coords - ms) * (d.coords - md).transpose();
        }
        let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
        let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
        let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
        let nm = Matrix4::new(
            sxx + syy + szz, syz - szy, szx - sxz, sxy - syx,
            syz - szy, sxx - syy - szz, sxy + syx, szx + sxz,
            szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy,
            sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz,
        );
        // Shift so every eigenvalue is positive and the largest dominates.
        let shift = nm.abs().sum();
        let a = nm + Matrix4::identity() * shift;
        let mut q = Vector4::new(1.0, 0.1, 0.2, 0.3).normalize();
        for _ in 0..200_000 {
            let next = (a * q).normalize();
            let done = (next - q).norm() < 1e-16;
            q = next;
            if done {
                break;
            }
        }
        let rot = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        Pose::new(rot, md - rot * ms)
    }

    #[test]
    fn identity_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = traj(&random_points(&mut rng, 20));
        let s = align_umeyama(&t, &t).unwrap();
        assert!(s.translation().norm() < 1e-9);
        assert!(s.rotation().angle() < 1e-9);
        assert_eq!(ate_rmse(&t, &t).unwrap(), 0.0);
    }

    #[test]
    fn rigid_transform_is_removed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let gt = random_points(&mut rng, 30);
            let m = random_rigid(&mut rng);
            let est: Vec<_> = gt.iter().map(|p| m.transform_point(p)).collect();
            let e = aligned_error(&traj(&est), &traj(&gt)).unwrap();
            assert!(e.rmse < 1e-9, "{}", e.rmse);
            assert!(e.s.compose(&m).local(&Pose::identity()).norm() < 1e-9);
        }
    }

    #[test]
    fn constant_offset_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gt = random_points(&mut rng, 10);
        let est: Vec<_> = gt.iter().map(|p| p + Vector3::new(1.0, -2.0, 0.5)).collect();
        assert!(ate_rmse(&traj(&est), &traj(&gt)).unwrap() < 1e-9);
    }

    #[test]
    fn noisy_alignment_matches_horn() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let gt = random_points(&mut rng, 40);
            let m = random_rigid(&mut rng);
            let est: Vec<_> = gt
                .iter()
                .map(|p| m.transform_point(p) + Vector3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
                .collect();
            let s = align_umeyama(&traj(&est), &traj(&gt)).unwrap();
            let oracle = horn(&est, &gt);
            assert!(s.local(&oracle).norm() < 1e-6, "{}", s.local(&oracle).norm());
        }
    }

    #[test]
    fn displaced_pose_matches_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = random_points(&mut rng, 25);
        let mut est = gt.clone();
        let d = Vector3::new(0.3, -0.4, 0.0);
        est[7] += d;
        let n = gt.len() as f64;
        assert_relative_eq!(ate_rmse_unaligned(&traj(&est), &traj(&gt)), d.norm() / n.sqrt(), epsilon = 1e-12);
        let oracle = horn(&est, &gt);
        let sq: f64 = est.iter().zip(&gt).map(|(p, q)| (oracle.transform_point(p) - q).norm_squared()).sum();
        let expected = (sq / n).sqrt();
        let got = ate_rmse(&traj(&est), &traj(&gt)).unwrap();
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
        assert!(got < d.norm() / n.sqrt());
    }

    #[test]
    fn alignment_is_a_global_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let gt = random_points(&mut rng, 30);
        let est: Vec<_> = gt
            .iter()
            .map(|p| p + Vector3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2)))
            .collect();
        let s = align_umeyama(&traj(&est), &traj(&gt)).unwrap();
        let cost = |s: &Pose<f64>| -> f64 { est.iter().zip(&gt).map(|(p, q)| (s.transform_point(p) - q).norm_squared()).sum() };
        let best = cost(&s);
        for _ in 0..200 {
            let scale = rng.random_range(1e-4..1.0);
            let mut d = nalgebra::Vector6::zeros();
            for i in 0..6 {
                d[i] = rng.random_range(-1.0..1.0) * scale;
            }
            assert!(cost(&s.retract(&d)) > best);
        }
    }

    proptest::proptest! {
        #[test]
        fn ate_invariant_under_rigid_motion(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_points(&mut rng, 15);
            let est: Vec<_> = gt.iter().map(|p| p + Vector3::new(rng.random_range(-0.1..0.1), 0.05, rng.random_range(-0.1..0.1))).collect();
            let m = random_rigid(&mut rng);
            let moved: Vec<_> = est.iter().map(|p| m.transform_point(p)).collect();
            let a = ate_rmse(&traj(&est), &traj(&gt)).unwrap();
            let b = ate_rmse(&traj(&moved), &traj(&gt)).unwrap();
            proptest::prop_assert!(a >= 0.0);
            proptest::prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert_eq!(align_umeyama(&traj(&line), &traj(&line)), Err(EvalError::DegenerateConfiguration));
        let two = &line[..2];
        assert_eq!(align_umeyama(&traj(two), &traj(two)), Err(EvalError::TooFewMatches(2)));
    }

    #[test]
    fn timestamp_matching_window() {
        let gt = traj(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 0.0, 0.0)]);
        let mut est = gt.clone();
        est.poses[1].timestamp += 0.015;
        est.poses[2].timestamp += 0.05;
        let m = match_timestamps(&est, &gt, MATCH_WINDOW);
        assert_eq!(m.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(m.unmatched, 1);
    }

    #[test]
    fn scaled_variant_removes_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gt = random_points(&mut rng, 20);
        let est: Vec<_> = gt.iter().map(|p| Point3::from(p.coords * 0.5)).collect();
        assert!(ate_rmse_scaled(&traj(&est), &traj(&gt)).unwrap() < 1e-9);
        assert!(ate_rmse(&traj(&est), &traj(&gt)).unwrap() > 0.1);
    }

    fn reg(id: usize, class_id: u32, c: [f64; 3]) -> RegistryObject {
        RegistryObject {
            id,
            class_id,
            center: c,
            end_center: c,
            extent: [0.2, 0.2, 0.2],
            dynamic: false,
            speed: 0.0,
        }
    }

    #[test]
    fn landmark_scoring() {
        let registry = vec![reg(0, 1, [0.0, 0.0, 0.0]), reg(1, 2, [1.0, 0.0, 0.0])];
        let perfect = vec![
            MappedObject { id: 0, class_id: 1, centroid: [0.0, 0.0, 0.0] },
            MappedObject { id: 1, class_id: 2, centroid: [1.0, 0.0, 0.0] },
        ];
        let s = score_landmarks(&perfect, &registry);
        assert_eq!((s.precision, s.recall, s.mean_centroid_error), (1.0, 1.0, 0.0));

        let e = score_landmarks(&[], &registry);
        assert_eq!((e.precision, e.recall), (1.0, 0.0));
        assert!(e.empty_map);

        let mut dup = perfect.clone();
        dup.push(MappedObject { id: 2, class_id: 1, centroid: [0.05, 0.0, 0.0] });
        let d = score_landmarks(&dup, &registry);
        assert!(d.precision < 1.0);
        assert_eq!(d.recall, 1.0);
        assert_eq!(d.matches[0], (0, 0));
    }

    #[test]
    fn dynamic_path_claims_are_reported() {
        let mut walker = reg(0, 9, [0.0, 0.0, 0.0]);
        walker.dynamic = true;
        walker.end_center = [4.0, 0.0, 0.0];
        let map = vec![MappedObject { id: 3, class_id: 9, centroid: [2.0, 0.1, 0.0] }];
        let s = score_landmarks(&map, &[walker]);
        assert_eq!(s.dynamic_matches, vec![(3, 0)]);
        assert!(s.matches.is_empty());
    }

    #[test]
    fn timing_examples() {
        let empty = timing_report(&[]);
        assert!(empty.no_data);
        assert_eq!(empty.get(Stage::Optimize), StageStat::default());
        let t = timing_report(&[
            StageSample { stage: Stage::AssociationPath1, ms: 3.0 },
            StageSample { stage: Stage::AssociationPath1, ms: 5.0 },
        ]);
        assert!(!t.no_data);
        let s = t.get(Stage::AssociationPath1);
        assert_eq!((s.count, s.mean_ms, s.max_ms), (2, 4.0, 5.0));
    }

    #[test]
    fn csv_has_one_row_per_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let t = traj(&random_points(&mut rng, 5));
        let csv = aligned_csv(&t, &t, &Pose::identity());
        assert_eq!(csv.lines().count(), 6);
    }
}
