//! Frames, rigid transforms and axis-aligned boxes.
//!
//! Camera frames use the optical convention: +x right, +y down, +z forward.
//! The world frame has +z up. Datasets anchor it at frame 0 so that world +x
//! is the ground projection of the camera's forward axis and +y points left.

use nalgebra::{Matrix3, Point3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Coordinate frame a cloud or box is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    World,
    Camera(usize),
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frame::World => write!(f, "world"),
            Frame::Camera(k) => write!(f, "camera[{k}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    CameraToWorld,
    WorldToCamera,
}

/// Camera-to-world rigid transform for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub frame_index: usize,
    pub translation: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
}

impl Pose {
    /// Builds a pose from a (w, x, y, z) quaternion, normalizing it.
    pub fn new(frame_index: usize, translation: Vector3<f64>, wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self {
            frame_index,
            translation,
            rotation: UnitQuaternion::from_quaternion(q),
        }
    }

    pub fn identity(frame_index: usize) -> Self {
        Self {
            frame_index,
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    pub fn from_rotation_matrix(frame_index: usize, translation: Vector3<f64>, m: Matrix3<f64>) -> Self {
        let rot = Rotation3::from_matrix(&m);
        Self {
            frame_index,
            translation,
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
        }
    }

    /// Quaternion components in (w, x, y, z) order.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// The world-to-camera transform (same frame index).
    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self {
            frame_index: self.frame_index,
            translation: -(inv * self.translation),
            rotation: inv,
        }
    }

    #[inline]
    pub fn camera_to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.inverse_transform_vector(&(p.coords - self.translation)))
    }

    pub fn camera_axis_in_world(&self, axis: usize) -> Vector3<f64> {
        self.rotation * Vector3::ith(axis, 1.0)
    }
}

/// Pinhole intrinsics. Fields of view are derived from focal length and image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    /// A 1280x720 sensor with a 110 x 70 degree field of view.
    pub fn zed2_720p() -> Self {
        Self::from_fov(1280, 720, 110.0, 70.0)
    }

    /// Centered principal point with focal lengths chosen to hit the given FOVs (degrees).
    pub fn from_fov(width: u32, height: u32, h_fov: f64, v_fov: f64) -> Self {
        let cx = width as f64 / 2.0;
        let cy = height as f64 / 2.0;
        Self {
            fx: cx / (h_fov.to_radians() / 2.0).tan(),
            fy: cy / (v_fov.to_radians() / 2.0).tan(),
            cx,
            cy,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: &str| Err(GeometryError::InvalidIntrinsics(m.to_string()));
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad("focal lengths must be positive");
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64) {
            return bad("cx must lie inside the image");
        }
        if !(self.cy > 0.0 && self.cy < self.height as f64) {
            return bad("cy must lie inside the image");
        }
        Ok(())
    }

    /// Horizontal field of view in degrees.
    pub fn h_fov(&self) -> f64 {
        ((self.cx / self.fx).atan() + ((self.width as f64 - self.cx) / self.fx).atan()).to_degrees()
    }

    /// Vertical field of view in degrees.
    pub fn v_fov(&self) -> f64 {
        ((self.cy / self.fy).atan() + ((self.height as f64 - self.cy) / self.fy).atan()).to_degrees()
    }

    /// Half-angle of the horizontal cone around the optical axis, in radians.
    pub fn h_half_angle(&self) -> f64 {
        (self.cx / self.fx).atan().max(((self.width as f64 - self.cx) / self.fx).atan())
    }

    /// Checks whether a camera-frame point projects inside the image and lies in front.
    pub fn in_view(&self, p: &Point3<f64>) -> bool {
        if p.z <= 0.0 {
            return false;
        }
        let u = self.fx * p.x / p.z + self.cx;
        let v = self.fy * p.y / p.z + self.cy;
        u >= 0.0 && u <= self.width as f64 && v >= 0.0 && v <= self.height as f64
    }
}

/// An ordered set of points in one frame. Coordinates are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, frame: Frame) -> Self {
        debug_assert!(points.iter().all(|p| p.coords.iter().all(|c| c.is_finite())));
        Self { points, frame }
    }

    pub fn empty(frame: Frame) -> Self {
        Self { points: Vec::new(), frame }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame: self.frame,
        }
    }
}

/// Axis-aligned box: center and full side lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3 {
    pub center: Point3<f64>,
    pub extents: Vector3<f64>,
    pub frame: Frame,
}

impl Box3 {
    pub fn new(center: Point3<f64>, extents: Vector3<f64>, frame: Frame) -> Self {
        debug_assert!(extents.iter().all(|&e| e >= 0.0));
        Self { center, extents, frame }
    }

    pub fn min(&self) -> Point3<f64> {
        self.center - self.extents / 2.0
    }

    pub fn max(&self) -> Point3<f64> {
        self.center + self.extents / 2.0
    }

    /// Boundary-inclusive containment. The comparison allows a few ulps of
    /// slack so that a box fitted to a point set always contains that set.
    #[inline]
    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| {
            let half = self.extents[i] / 2.0;
            let slack = 4.0 * f64::EPSILON * (self.center[i].abs() + half);
            (p[i] - self.center[i]).abs() <= half + slack
        })
    }

    /// Euclidean distance from `p` to the closest point of the box (0 inside).
    pub fn distance_to(&self, p: &Point3<f64>) -> f64 {
        let half = self.extents / 2.0;
        let d = Vector3::from_fn(|i, _| ((p[i] - self.center[i]).abs() - half[i]).max(0.0));
        d.norm()
    }
}

pub fn transform_cloud(pose: &Pose, cloud: &PointCloud, direction: Direction) -> Result<PointCloud, GeometryError> {
    let (expected, target) = match direction {
        Direction::CameraToWorld => (Frame::Camera(pose.frame_index), Frame::World),
        Direction::WorldToCamera => (Frame::World, Frame::Camera(pose.frame_index)),
    };
    if cloud.frame != expected {
        return Err(GeometryError::FrameMismatch { expected, found: cloud.frame });
    }
    let points = match direction {
        Direction::CameraToWorld => cloud.points.iter().map(|p| pose.camera_to_world(p)).collect(),
        Direction::WorldToCamera => cloud.points.iter().map(|p| pose.world_to_camera(p)).collect(),
    };
    Ok(PointCloud { points, frame: target })
}

/// The minimal axis-aligned box containing every point.
pub fn fit_axis_aligned_box(points: &[Point3<f64>], frame: Frame) -> Result<Box3, GeometryError> {
    let first = points.first().ok_or(GeometryError::EmptyInput)?;
    let (lo, hi) = points.iter().fold((*first, *first), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    });
    Ok(Box3 {
        center: nalgebra::center(&lo, &hi),
        extents: hi - lo,
        frame,
    })
}

/// Indices of cloud points inside the box (boundary inclusive).
pub fn points_in_box(cloud: &PointCloud, bbox: &Box3) -> Result<Vec<usize>, GeometryError> {
    if cloud.frame != bbox.frame {
        return Err(GeometryError::FrameMismatch { expected: bbox.frame, found: cloud.frame });
    }
    Ok(cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| bbox.contains(p))
        .map(|(i, _)| i)
        .collect())
}

/// Axis-aligned box (in the camera frame of `pose`) enclosing a vertical
/// world cylinder standing on `base_z`.
pub fn cylinder_box_in_camera(
    pose: &Pose,
    center_xy: [f64; 2],
    base_z: f64,
    diameter: f64,
    height: f64,
) -> Box3 {
    let mid = Point3::new(center_xy[0], center_xy[1], base_z + height / 2.0);
    let center = pose.world_to_camera(&mid);
    let axis = pose.rotation.inverse_transform_vector(&Vector3::z());
    let extents = Vector3::from_fn(|i, _| {
        let a = axis[i].abs().min(1.0);
        a * height + diameter * (1.0 - a * a).sqrt()
    });
    Box3::new(center, extents, Frame::Camera(pose.frame_index))
}
