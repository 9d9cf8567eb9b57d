//! Multi-tree tracking in the world bird's-eye view.
//!
//! Each tree is a constant state `(x, y, w)`: world position and trunk
//! diameter. Detections are associated to tracks by a gated minimum-cost
//! assignment on squared Mahalanobis distance.

mod gating;
mod kalman;

pub use gating::chi2_gate_threshold;
pub use kalman::{innovation, mahalanobis, predict, update, MAX_CONDITION};

use nalgebra::{DMatrix, Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::assignment::assign_gated;
use crate::geometry::{Box3, CameraIntrinsics, Frame, Pose};
use crate::io::{LabelRecord, TrackerSettings};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("innovation covariance is singular or ill-conditioned (condition number {cond:e})")]
    Numerical { cond: f64 },
    #[error("invalid tracker configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: u64,
    /// World BEV position and diameter `(x, y, w)`.
    pub t: Vector3<f64>,
    pub sigma: Matrix3<f64>,
    pub hits: u32,
    pub frames_since_update: u32,
    pub status: TrackStatus,
    pub frames_outside_fov: u32,
    /// World height of the trunk base from the last associated box. Not filtered.
    pub base_z: f64,
    /// Trunk height from the last associated box. Not filtered.
    pub height: f64,
}

impl TrackState {
    /// Camera-frame box for this track under `pose`: a `w × height × w`
    /// box standing on the last observed base height.
    pub fn camera_box(&self, pose: &Pose) -> Box3 {
        let mid = Point3::new(self.t.x, self.t.y, self.base_z + self.height / 2.0);
        let c = pose.world_to_camera(&mid);
        let w = self.t.z.max(0.0);
        Box3::new(c, Vector3::new(w, self.height.max(0.0), w), Frame::Camera(pose.frame_index))
    }
}

/// A detection expressed in the filter's measurement space.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    /// World BEV position of the box's bottom-face center, and diameter.
    pub d: Vector3<f64>,
    pub base_z: f64,
    pub height: f64,
    pub source_box: Box3,
}

impl Measurement {
    /// The bottom face of a camera-frame box is its `+y` face. The diameter
    /// is the mean of the two horizontal camera-frame extents.
    pub fn from_box(b: &Box3, pose: &Pose) -> Self {
        let bottom = b.center + Vector3::new(0.0, b.extents.y / 2.0, 0.0);
        let w = pose.camera_to_world(&bottom);
        Self {
            d: Vector3::new(w.x, w.y, 0.5 * (b.extents.x + b.extents.z)),
            base_z: w.z,
            height: b.extents.y,
            source_box: *b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub q: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub gate_prob: f64,
    pub min_hits: u32,
    pub max_age: u32,
    pub fov_exit_frames: u32,
    pub max_range: f64,
    pub intrinsics: CameraIntrinsics,
}

impl TrackerConfig {
    pub fn from_settings(s: &TrackerSettings, intrinsics: CameraIntrinsics) -> Self {
        Self {
            q: Matrix3::from_diagonal(&Vector3::from(s.q)),
            r: Matrix3::from_diagonal(&Vector3::from(s.r)),
            gate_prob: s.gate_prob,
            min_hits: s.min_hits,
            max_age: s.max_age,
            fov_exit_frames: s.fov_exit_frames,
            max_range: s.max_range,
            intrinsics,
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let bad = |m: &str| Err(TrackerError::Config(m.to_string()));
        let psd = |m: &Matrix3<f64>, strict: bool| {
            (m - m.transpose()).norm() <= 1e-12 * m.norm().max(1.0)
                && m.symmetric_eigenvalues().iter().all(|&v| if strict { v > 0.0 } else { v >= 0.0 })
        };
        if !psd(&self.q, false) {
            return bad("Q must be symmetric positive semi-definite");
        }
        if !psd(&self.r, true) {
            return bad("R must be symmetric positive definite");
        }
        if !(self.gate_prob > 0.0 && self.gate_prob < 1.0) {
            return bad("gate_prob must lie in (0, 1)");
        }
        if self.min_hits < 1 {
            return bad("min_hits must be >= 1");
        }
        if self.max_age < 1 || self.fov_exit_frames < 1 {
            return bad("max_age and fov_exit_frames must be >= 1");
        }
        if !(self.max_range > 0.0) {
            return bad("max_range must be > 0");
        }
        Ok(())
    }
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let run = crate::io::RunConfig::default();
        Self::from_settings(&run.tracker, run.camera.intrinsics)
    }
}

/// One accepted track-to-detection pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Association {
    pub track_id: u64,
    pub detection: usize,
    /// Squared Mahalanobis distance of the pair before the update.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepOutput {
    /// Confirmed tracks after this step, by ascending id.
    pub confirmed: Vec<TrackState>,
    pub associations: Vec<Association>,
    pub spawned: Vec<u64>,
    pub deleted: Vec<u64>,
    /// Tracks whose distance or update hit a numerical failure this step.
    pub errors: Vec<(u64, TrackerError)>,
}

/// Sequential multi-target tracker. One `step` per frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    gate: f64,
    tracks: Vec<TrackState>,
    next_id: u64,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackerError> {
        config.validate()?;
        let gate = chi2_gate_threshold(3, config.gate_prob);
        Ok(Self { config, gate, tracks: Vec::new(), next_id: 0 })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn gate(&self) -> f64 {
        self.gate
    }

    /// All live tracks, tentative and confirmed.
    pub fn tracks(&self) -> &[TrackState] {
        &self.tracks
    }

    /// Ids handed out so far. Ids are never reused.
    pub fn ids_issued(&self) -> u64 {
        self.next_id
    }

    /// Whether a world position is out of the camera's sensing region:
    /// behind it, outside the horizontal FOV cone, or beyond `max_range`.
    pub fn outside_fov(&self, t: &Vector3<f64>, base_z: f64, pose: &Pose) -> bool {
        let c = pose.world_to_camera(&Point3::new(t.x, t.y, base_z));
        if c.z <= 0.0 {
            return true;
        }
        c.x.atan2(c.z).abs() > self.config.intrinsics.h_half_angle() || c.x.hypot(c.z) > self.config.max_range
    }

    /// Processes one frame of camera-frame detections.
    pub fn step(&mut self, detections: &[LabelRecord], pose: &Pose) -> StepOutput {
        let mut out = StepOutput::default();
        let meas: Vec<Measurement> = detections
            .iter()
            .map(|l| Measurement::from_box(&l.to_box(pose.frame_index), pose))
            .collect();

        for tr in &mut self.tracks {
            predict(tr, &self.config.q);
        }

        let mut cost = DMatrix::from_element(self.tracks.len(), meas.len(), f64::INFINITY);
        for (i, tr) in self.tracks.iter().enumerate() {
            for (j, m) in meas.iter().enumerate() {
                let (res, s) = innovation(tr, &m.d, &self.config.r);
                match mahalanobis(&res, &s) {
                    Ok(d) => cost[(i, j)] = d,
                    Err(e) => {
                        if !out.errors.iter().any(|(id, _)| *id == tr.id) {
                            out.errors.push((tr.id, e));
                        }
                    }
                }
            }
        }
        let assignment = assign_gated(&cost, self.gate);

        let mut updated = vec![false; self.tracks.len()];
        for &(i, j) in &assignment.pairs {
            let tr = &mut self.tracks[i];
            match update(tr, &meas[j].d, &self.config.r) {
                Ok(()) => {
                    tr.base_z = meas[j].base_z;
                    tr.height = meas[j].height;
                    updated[i] = true;
                    out.associations.push(Association { track_id: tr.id, detection: j, distance: cost[(i, j)] });
                }
                Err(e) => out.errors.push((tr.id, e)),
            }
        }

        for &j in &assignment.unmatched_cols {
            let m = &meas[j];
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(TrackState {
                id,
                t: m.d,
                sigma: 2.0 * self.config.r,
                hits: 1,
                frames_since_update: 0,
                status: TrackStatus::Tentative,
                frames_outside_fov: 0,
                base_z: m.base_z,
                height: m.height,
            });
            updated.push(true);
            out.spawned.push(id);
        }

        let cfg = &self.config;
        let mut keep = Vec::with_capacity(self.tracks.len());
        for (tr, was_updated) in std::mem::take(&mut self.tracks).into_iter().zip(updated) {
            let mut tr = tr;
            if tr.hits >= cfg.min_hits {
                tr.status = TrackStatus::Confirmed;
            }
            if !was_updated && self.outside_fov(&tr.t, tr.base_z, pose) {
                tr.frames_outside_fov += 1;
            } else {
                tr.frames_outside_fov = 0;
            }
            if tr.frames_since_update >= cfg.max_age || tr.frames_outside_fov >= cfg.fov_exit_frames {
                out.deleted.push(tr.id);
            } else {
                keep.push(tr);
            }
        }
        self.tracks = keep;
        self.tracks.sort_by_key(|t| t.id);
        out.confirmed = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed)
            .cloned()
            .collect();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;

    fn det(x: f64, z: f64, w: f64) -> LabelRecord {
        LabelRecord::from_box(&Box3::new(Point3::new(x, -0.5, z), Vector3::new(w, 3.0, w), Frame::Camera(0)), 1.0)
    }

    /// Level camera 1 m above the world origin looking along world +x.
    fn pose(k: usize) -> Pose {
        let m = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        Pose::from_rotation_matrix(k, Vector3::new(0.0, 0.0, 1.0), m)
    }

    #[test]
    fn measurement_is_bottom_center_in_world() {
        let m = Measurement::from_box(&det(1.0, 5.0, 0.4).to_box(0), &pose(0));
        assert!((m.d - Vector3::new(5.0, -1.0, 0.4)).norm() < 1e-12);
        assert!((m.base_z - 0.0).abs() < 1e-12);
        assert!((m.height - 3.0).abs() < 1e-12);
    }

    #[test]
    fn confirms_on_third_hit() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        for k in 0..2 {
            assert!(t.step(&[det(0.0, 5.0, 0.3)], &pose(k)).confirmed.is_empty());
        }
        let out = t.step(&[det(0.0, 5.0, 0.3)], &pose(2));
        assert_eq!(out.confirmed.len(), 1);
        assert_eq!(out.confirmed[0].hits, 3);
    }

    #[test]
    fn camera_box_round_trips_measurement() {
        let mut t = Tracker::new(TrackerConfig::default()).unwrap();
        t.step(&[det(1.0, 6.0, 0.5)], &pose(0));
        let b = t.tracks()[0].camera_box(&pose(0));
        assert!((b.center - Point3::new(1.0, -0.5, 6.0)).norm() < 1e-12);
        assert!((b.extents - Vector3::new(0.5, 3.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn leaving_the_view_deletes_after_debounce() {
        let cfg = TrackerConfig::default();
        let mut t = Tracker::new(cfg.clone()).unwrap();
        for k in 0..3 {
            t.step(&[det(0.0, 5.0, 0.3)], &pose(k));
        }
        // turn the camera around: the tree is now behind it
        let back = Pose::from_rotation_matrix(3, Vector3::new(0.0, 0.0, 1.0), Matrix3::new(0.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, -1.0, 0.0));
        for k in 0..cfg.fov_exit_frames - 1 {
            let out = t.step(&[], &Pose { frame_index: 3 + k as usize, ..back });
            assert_eq!(out.confirmed.len(), 1);
        }
        let out = t.step(&[], &back);
        assert!(out.confirmed.is_empty());
        assert_eq!(out.deleted, vec![0]);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrackerConfig { min_hits: 0, ..TrackerConfig::default() };
        assert!(Tracker::new(cfg).is_err());
        let cfg = TrackerConfig { r: Matrix3::zeros(), ..TrackerConfig::default() };
        assert!(Tracker::new(cfg).is_err());
    }
}
