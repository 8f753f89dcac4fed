//! IOU track-by-detection.
//!
//! Detections are chained frame to frame when they share a class label and
//! their boxes overlap enough. A tracklet that reaches the minimum length is
//! handed out as a landmark candidate and leaves the active set; later
//! detections of the same object start a fresh tracklet.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Pixel;
use crate::scalar::{fmax, fmin, lit, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max})")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },
    #[error("frame time {now} precedes tracklet {tracklet} last update at {last_update}")]
    OutOfOrderTimestamp {
        now: f64,
        tracklet: u64,
        last_update: f64,
    },
}

/// Axis-aligned image box, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox<T: Real> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Real> BoundingBox<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Result<Self, TrackerError> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(TrackerError::InvalidBox {
                x_min: crate::scalar::to_f64(x_min),
                y_min: crate::scalar::to_f64(y_min),
                x_max: crate::scalar::to_f64(x_max),
                y_max: crate::scalar::to_f64(y_max),
            })
        }
    }

    pub fn from_center(center: Pixel<T>, width: T, height: T) -> Result<Self, TrackerError> {
        let half: T = lit(0.5);
        Self::new(
            center.u - width * half,
            center.v - height * half,
            center.u + width * half,
            center.v + height * half,
        )
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> Pixel<T> {
        let half: T = lit(0.5);
        Pixel::new(
            (self.x_min + self.x_max) * half,
            (self.y_min + self.y_max) * half,
        )
    }

    pub fn contains(&self, px: &Pixel<T>) -> bool {
        px.u >= self.x_min && px.u <= self.x_max && px.v >= self.y_min && px.v <= self.y_max
    }

    /// Clamps to `[0, width] × [0, height]`; `None` if nothing remains.
    pub fn clamped(&self, width: u32, height: u32) -> Option<Self> {
        let w: T = lit(width as f64);
        let h: T = lit(height as f64);
        let b = Self {
            x_min: fmax(self.x_min, T::zero()),
            y_min: fmax(self.y_min, T::zero()),
            x_max: fmin(self.x_max, w),
            y_max: fmin(self.y_max, h),
        };
        b.is_valid().then_some(b)
    }
}

/// Jaccard index of two boxes: intersection area over union area.
pub fn iou<T: Real>(a: &BoundingBox<T>, b: &BoundingBox<T>) -> T {
    let iw = fmin(a.x_max, b.x_max) - fmax(a.x_min, b.x_min);
    let ih = fmin(a.y_max, b.y_max) - fmax(a.y_min, b.y_min);
    if iw <= T::zero() || ih <= T::zero() {
        return T::zero();
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    fmin(inter / union, T::one())
}

/// One 2D detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<T: Real> {
    /// Seconds.
    pub timestamp: f64,
    pub frame_id: u64,
    pub class_id: u32,
    pub confidence: T,
    pub bbox: BoundingBox<T>,
    /// Camera-frame depth of the object center, meters.
    pub depth_hint: T,
}

/// Locally associated detections of one object.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet<T: Real> {
    pub id: u64,
    pub class_id: u32,
    pub measurements: Vec<Measurement<T>>,
    pub last_update: f64,
}

impl<T: Real> Tracklet<T> {
    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn latest(&self) -> &Measurement<T> {
        self.measurements.last().expect("tracklets are never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig<T: Real> {
    pub sigma_iou: T,
    pub min_tracklet_size: usize,
    /// Seconds without a detection before a tracklet is dropped.
    pub max_gap: f64,
    pub min_confidence: T,
    pub min_distance: T,
    pub max_distance: T,
}

impl<T: Real> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            sigma_iou: lit(0.2),
            min_tracklet_size: 5,
            max_gap: 0.5,
            min_confidence: lit(0.4),
            min_distance: lit(0.2),
            max_distance: lit(25.0),
        }
    }
}

impl<T: Real> TrackerConfig<T> {
    /// Ingestion filter: detector confidence and range bounds.
    pub fn admits(&self, m: &Measurement<T>) -> bool {
        m.confidence >= self.min_confidence
            && m.depth_hint >= self.min_distance
            && m.depth_hint <= self.max_distance
            && m.bbox.is_valid()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput<T: Real> {
    pub promoted: Vec<Tracklet<T>>,
    pub expired: Vec<Tracklet<T>>,
}

/// Single-owner tracker state.
#[derive(Debug, Clone, Default)]
pub struct Tracker<T: Real> {
    active: Vec<Tracklet<T>>,
    next_id: u64,
}

impl<T: Real> Tracker<T> {
    pub fn new() -> Self {
        Self {
            active: Vec::new(),
            next_id: 0,
        }
    }

    pub fn active(&self) -> &[Tracklet<T>] {
        &self.active
    }

    /// Advances the tracker by one frame of detections stamped `now`.
    ///
    /// Detections are expected to have passed [`TrackerConfig::admits`].
    pub fn step(
        &mut self,
        detections: &[Measurement<T>],
        now: f64,
        cfg: &TrackerConfig<T>,
    ) -> Result<StepOutput<T>, TrackerError> {
        if let Some(t) = self.active.iter().find(|t| t.last_update > now) {
            return Err(TrackerError::OutOfOrderTimestamp {
                now,
                tracklet: t.id,
                last_update: t.last_update,
            });
        }

        let (kept, expired) = split_expired(std::mem::take(&mut self.active), now, cfg);
        self.active = kept;

        // Every admissible (tracklet, detection) pair, best overlap first.
        let mut pairs: Vec<(usize, usize, T)> = Vec::new();
        for (ti, track) in self.active.iter().enumerate() {
            if track.last_update >= now {
                continue;
            }
            let last = &track.latest().bbox;
            for (di, det) in detections.iter().enumerate() {
                if det.class_id != track.class_id {
                    continue;
                }
                let overlap = iou(last, &det.bbox);
                if overlap >= cfg.sigma_iou && overlap > T::zero() {
                    pairs.push((ti, di, overlap));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.2.partial_cmp(&a.2)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.active[a.0].id.cmp(&self.active[b.0].id))
                .then(a.1.cmp(&b.1))
        });

        let mut track_used = vec![false; self.active.len()];
        let mut det_used = vec![false; detections.len()];
        for (ti, di, _) in pairs {
            if track_used[ti] || det_used[di] {
                continue;
            }
            track_used[ti] = true;
            det_used[di] = true;
            let track = &mut self.active[ti];
            track.measurements.push(detections[di]);
            track.last_update = now;
        }

        for (di, det) in detections.iter().enumerate() {
            if det_used[di] {
                continue;
            }
            let id = self.next_id;
            self.next_id += 1;
            self.active.push(Tracklet {
                id,
                class_id: det.class_id,
                measurements: vec![*det],
                last_update: now,
            });
        }

        let min = cfg.min_tracklet_size.max(1);
        let (promoted, active): (Vec<_>, Vec<_>) = std::mem::take(&mut self.active)
            .into_iter()
            .partition(|t| t.len() == min);
        self.active = active;
        Ok(StepOutput { promoted, expired })
    }
}

fn is_expired<T: Real>(t: &Tracklet<T>, now: f64, cfg: &TrackerConfig<T>) -> bool {
    now - t.last_update > cfg.max_gap
}

fn split_expired<T: Real>(
    tracks: Vec<Tracklet<T>>,
    now: f64,
    cfg: &TrackerConfig<T>,
) -> (Vec<Tracklet<T>>, Vec<Tracklet<T>>) {
    let (expired, kept): (Vec<_>, Vec<_>) =
        tracks.into_iter().partition(|t| is_expired(t, now, cfg));
    (kept, expired)
}

/// Drops tracklets whose last detection is older than `max_gap`.
pub fn prune_expired<T: Real>(
    tracks: Vec<Tracklet<T>>,
    now: f64,
    cfg: &TrackerConfig<T>,
) -> Vec<Tracklet<T>> {
    split_expired(tracks, now, cfg).0
}
