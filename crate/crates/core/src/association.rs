//! Landmark map and candidate-to-landmark data association.
//!
//! A candidate is compared only against same-class landmarks inside its
//! validation gate. The gate radius is `sqrt((Δt / u) · s)`, with `Δt` the
//! seconds since the landmark was last associated, `s` the candidate size
//! in meters and `u` a dimensionless modulator. The formula is a recipe rather
//! than a unit-consistent expression; `u` absorbs the units and the result is
//! read as meters.
//!
//! With one landmark in the gate the candidate is matched to it directly. With
//! several, the landmark whose cloud is nearest on average to the candidate
//! cloud wins.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::candidate::Candidate;
use crate::geometry::{Aabb, GeometryError, PointCloud};
use crate::scalar::{fmax, lit, Real};

/// Minimum side used when comparing bounding volumes, meters.
const MIN_VOLUME_SIDE: f64 = 0.01;

/// A persistent mapped object.
#[derive(Debug, Clone, PartialEq)]
pub struct Landmark<T: Real> {
    pub id: u64,
    pub class_id: u32,
    pub centroid: Point3<T>,
    pub cloud: PointCloud<T>,
    /// Largest extent, meters.
    pub size: T,
    /// Seconds; drives the gate growth.
    pub last_association: f64,
    /// Seconds; last time an observation went to the pose graph.
    pub last_observation: Option<f64>,
    pub n_fused: usize,
}

impl<T: Real> Landmark<T> {
    pub fn bounds(&self) -> Aabb<T> {
        self.cloud
            .bounds()
            .unwrap_or(Aabb {
                min: self.centroid,
                max: self.centroid,
            })
            .padded(lit(MIN_VOLUME_SIDE))
    }

    /// Moves the landmark, carrying its cloud along.
    pub fn set_centroid(&mut self, centroid: Point3<T>) {
        let delta = centroid - self.centroid;
        self.cloud.translate(&delta);
        self.centroid = centroid;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssocConfig<T: Real> {
    /// Gate growth modulator.
    pub u: T,
    /// Intersection-over-smaller-volume above which landmarks are fused.
    pub merge_overlap_ratio: T,
    /// Seconds between two pose-graph observations of one landmark.
    pub min_reobservation_interval: f64,
    /// Maximum points kept per landmark cloud.
    pub cloud_cap: usize,
}

impl<T: Real> Default for AssocConfig<T> {
    fn default() -> Self {
        Self {
            u: lit(10.0),
            merge_overlap_ratio: lit(0.5),
            min_reobservation_interval: 2.0,
            cloud_cap: 2048,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssocDecision<T: Real> {
    NewLandmark(u64),
    /// `nn_distance` is set when several landmarks competed for the candidate.
    Matched {
        landmark_id: u64,
        nn_distance: Option<T>,
    },
}

/// Result of folding a candidate into the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration<T: Real> {
    pub decision: AssocDecision<T>,
    /// Number of landmarks that were inside the gate.
    pub gated: usize,
    /// Whether this association should reach the pose graph.
    pub emit_observation: bool,
}

/// Record of a landmark absorbed by another one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alias {
    pub old_id: u64,
    pub kept_id: u64,
}

/// Validation gate radius for a landmark last associated `dt` seconds ago.
pub fn gate_radius<T: Real>(dt: f64, u: T, s: T) -> T {
    let dt: T = lit(dt.max(0.0));
    (dt / u * s).sqrt()
}

/// Mean distance from each candidate point to its nearest landmark point.
///
/// Directional: the average runs over the candidate cloud.
pub fn nn_cloud_distance<T: Real>(
    cand_cloud: &PointCloud<T>,
    lm_cloud: &PointCloud<T>,
) -> Result<T, GeometryError> {
    if cand_cloud.is_empty() || lm_cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    debug_assert_eq!(cand_cloud.frame, lm_cloud.frame);
    let mut sum = T::zero();
    for p in &cand_cloud.points {
        let mut best = T::max_value().expect("bounded scalar");
        for q in &lm_cloud.points {
            let d = (p - q).norm_squared();
            if d < best {
                best = d;
            }
        }
        sum += best.sqrt();
    }
    Ok(sum / lit(cand_cloud.len() as f64))
}

/// Voxel-grid thinning down to at most `cap` points.
///
/// Keeps the first point seen in each voxel; the voxel edge starts at
/// `edge` and doubles until the cap is met.
pub fn voxel_thin<T: Real>(points: &[Point3<T>], edge: T, cap: usize) -> Vec<Point3<T>> {
    let cap = cap.max(1);
    let mut edge = fmax(edge, lit(1e-6));
    loop {
        let mut cells: BTreeMap<(i64, i64, i64), Point3<T>> = BTreeMap::new();
        for p in points {
            let key = |v: T| crate::scalar::to_f64((v / edge).floor()) as i64;
            cells.entry((key(p.x), key(p.y), key(p.z))).or_insert(*p);
        }
        if cells.len() <= cap {
            return cells.into_values().collect();
        }
        edge *= lit(2.0);
    }
}

/// Registry of landmarks keyed by never-reused ids.
#[derive(Debug, Clone, Default)]
pub struct LandmarkMap<T: Real> {
    landmarks: BTreeMap<u64, Landmark<T>>,
    next_id: u64,
    aliases: Vec<Alias>,
}

impl<T: Real> LandmarkMap<T> {
    pub fn new() -> Self {
        Self {
            landmarks: BTreeMap::new(),
            next_id: 0,
            aliases: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Landmark<T>> {
        self.landmarks.get(&id)
    }

    pub fn get_mut(&mut self, id: u64) -> Option<&mut Landmark<T>> {
        self.landmarks.get_mut(&id)
    }

    /// Landmarks in id order.
    pub fn iter(&self) -> impl Iterator<Item = &Landmark<T>> {
        self.landmarks.values()
    }

    pub fn aliases(&self) -> &[Alias] {
        &self.aliases
    }

    /// Follows alias records to the surviving landmark id.
    pub fn resolve(&self, mut id: u64) -> u64 {
        let index: HashMap<u64, u64> = self.aliases.iter().map(|a| (a.old_id, a.kept_id)).collect();
        while let Some(&next) = index.get(&id) {
            id = next;
        }
        id
    }

    /// Inserts a prebuilt landmark, keeping ids unique.
    pub fn insert(&mut self, landmark: Landmark<T>) {
        self.next_id = self.next_id.max(landmark.id + 1);
        self.landmarks.insert(landmark.id, landmark);
    }

    /// Same-class landmarks whose centroid lies inside the candidate's gate.
    pub fn preselect(&self, cand: &Candidate<T>, now: f64, cfg: &AssocConfig<T>) -> Vec<&Landmark<T>> {
        self.landmarks
            .values()
            .filter(|l| l.class_id == cand.class_id)
            .filter(|l| {
                let r = gate_radius(now - l.last_association, cfg.u, cand.size_estimate);
                (l.centroid - cand.map_centroid).norm() <= r
            })
            .collect()
    }

    /// Decides where a candidate belongs without modifying the map.
    pub fn associate(&self, cand: &Candidate<T>, now: f64, cfg: &AssocConfig<T>) -> (AssocDecision<T>, usize) {
        let gated = self.preselect(cand, now, cfg);
        let n = gated.len();
        let decision = match gated.as_slice() {
            [] => AssocDecision::NewLandmark(self.next_id),
            [only] => AssocDecision::Matched {
                landmark_id: only.id,
                nn_distance: None,
            },
            many => {
                let cloud = cand.merged_cloud();
                let mut best: Option<(u64, T)> = None;
                // Gated landmarks arrive in id order, so a strict comparison keeps the lower id on ties.
                for l in many {
                    let d = nn_cloud_distance(&cloud, &l.cloud).unwrap_or(T::max_value().expect("bounded"));
                    if best.is_none_or(|(_, b)| d < b) {
                        best = Some((l.id, d));
                    }
                }
                let (landmark_id, d) = best.expect("at least two gated landmarks");
                AssocDecision::Matched {
                    landmark_id,
                    nn_distance: Some(d),
                }
            }
        };
        (decision, n)
    }

    /// Associates the candidate and applies the decision to the map.
    pub fn integrate(&mut self, cand: &Candidate<T>, now: f64, cfg: &AssocConfig<T>) -> Integration<T> {
        let (decision, gated) = self.associate(cand, now, cfg);
        let emit_observation = match decision {
            AssocDecision::NewLandmark(id) => {
                let mut lm = landmark_from_candidate(id, cand, now, cfg);
                lm.last_observation = Some(now);
                self.insert(lm);
                true
            }
            AssocDecision::Matched { landmark_id, .. } => {
                let lm = self.landmarks.get_mut(&landmark_id).expect("matched landmark exists");
                let emit = lm
                    .last_observation
                    .is_none_or(|t| now - t >= cfg.min_reobservation_interval);
                *lm = fuse(lm, cand, now, cfg);
                if emit {
                    lm.last_observation = Some(now);
                }
                emit
            }
        };
        Integration {
            decision,
            gated,
            emit_observation,
        }
    }

    /// Fuses same-class landmarks whose bounding volumes overlap by at least
    /// `merge_overlap_ratio` of the smaller volume, into the lower id, until no
    /// such pair remains. Returns the aliases created by this call.
    pub fn merge_overlapping(&mut self, cfg: &AssocConfig<T>) -> Vec<Alias> {
        let mut created = Vec::new();
        while let Some((kept, old)) = self.find_overlapping_pair(cfg) {
            let absorbed = self.landmarks.remove(&old).expect("pair member exists");
            let target = self.landmarks.get_mut(&kept).expect("pair member exists");
            *target = merge_landmarks(target, &absorbed, cfg);
            let alias = Alias {
                old_id: old,
                kept_id: kept,
            };
            self.aliases.push(alias);
            created.push(alias);
        }
        created
    }

    fn find_overlapping_pair(&self, cfg: &AssocConfig<T>) -> Option<(u64, u64)> {
        let items: Vec<&Landmark<T>> = self.landmarks.values().collect();
        for (i, a) in items.iter().enumerate() {
            for b in &items[i + 1..] {
                if a.class_id == b.class_id && overlap_ratio(a, b) >= cfg.merge_overlap_ratio {
                    return Some((a.id, b.id));
                }
            }
        }
        None
    }
}

/// Intersection volume over the smaller of the two bounding volumes.
pub fn overlap_ratio<T: Real>(a: &Landmark<T>, b: &Landmark<T>) -> T {
    let (ba, bb) = (a.bounds(), b.bounds());
    let smaller = crate::scalar::fmin(ba.volume(), bb.volume());
    if smaller <= T::zero() {
        return T::zero();
    }
    ba.intersection_volume(&bb) / smaller
}

fn thinned_cloud<T: Real>(points: &[Point3<T>], size: T, cfg: &AssocConfig<T>) -> PointCloud<T> {
    PointCloud::world(voxel_thin(points, size / lit(32.0), cfg.cloud_cap))
}

fn landmark_from_candidate<T: Real>(id: u64, cand: &Candidate<T>, now: f64, cfg: &AssocConfig<T>) -> Landmark<T> {
    let merged = cand.merged_cloud();
    let size = fmax(cand.size_estimate, merged.max_extent());
    Landmark {
        id,
        class_id: cand.class_id,
        centroid: cand.map_centroid,
        cloud: thinned_cloud(&merged.points, size, cfg),
        size,
        last_association: now,
        last_observation: None,
        n_fused: 1,
    }
}

fn combine<T: Real>(
    base: &Landmark<T>,
    other_centroid: &Point3<T>,
    other_weight: usize,
    other_points: &[Point3<T>],
    cfg: &AssocConfig<T>,
) -> Landmark<T> {
    let n = base.n_fused.max(1);
    let total = n + other_weight;
    let centroid = Point3::from(
        (base.centroid.coords * lit::<T>(n as f64) + other_centroid.coords * lit::<T>(other_weight as f64))
            / lit::<T>(total as f64),
    );
    let mut points = base.cloud.points.clone();
    points.extend_from_slice(other_points);
    let extent = Aabb::from_points(&points).map(|b| b.max_extent()).unwrap_or_else(T::zero);
    let size = fmax(base.size, extent);
    Landmark {
        id: base.id,
        class_id: base.class_id,
        centroid,
        cloud: thinned_cloud(&points, size, cfg),
        size,
        last_association: base.last_association,
        last_observation: base.last_observation,
        n_fused: total,
    }
}

/// Folds a matched candidate into a landmark.
pub fn fuse<T: Real>(lm: &Landmark<T>, cand: &Candidate<T>, now: f64, cfg: &AssocConfig<T>) -> Landmark<T> {
    let merged = cand.merged_cloud();
    let mut out = combine(lm, &cand.map_centroid, 1, &merged.points, cfg);
    out.size = fmax(out.size, cand.size_estimate);
    out.last_association = now;
    out
}

fn merge_landmarks<T: Real>(kept: &Landmark<T>, absorbed: &Landmark<T>, cfg: &AssocConfig<T>) -> Landmark<T> {
    let mut out = combine(kept, &absorbed.centroid, absorbed.n_fused.max(1), &absorbed.cloud.points, cfg);
    out.size = fmax(out.size, absorbed.size);
    out.last_association = kept.last_association.max(absorbed.last_association);
    out.last_observation = match (kept.last_observation, absorbed.last_observation) {
        (Some(a), Some(b)) => Some(a.max(b)),
        (a, b) => a.or(b),
    };
    out
}

/// Point set of an axis-aligned box surface, used by tests and tools.
pub fn box_cloud<T: Real>(center: &Point3<T>, half: &Vector3<T>, per_side: usize) -> PointCloud<T> {
    let n = per_side.max(2);
    let mut pts = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let on_face = [i, j, k].iter().any(|&v| v == 0 || v == n - 1);
                if !on_face {
                    continue;
                }
                let f = |v: usize| lit::<T>(-1.0) + lit::<T>(2.0) * lit::<T>(v as f64) / lit((n - 1) as f64);
                pts.push(center + Vector3::new(f(i) * half.x, f(j) * half.y, f(k) * half.z));
            }
        }
    }
    PointCloud::world(pts)
}
