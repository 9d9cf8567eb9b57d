//! Per-frame training labels from global-map clusters.

use crate::geometry::{fit_axis_aligned_box, points_in_box, Box3, Frame, GeometryError, PointCloud, Pose};
use crate::io::LabelRecord;
use crate::segmentation::Cluster;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabel {
    pub cluster_id: u32,
    pub bbox: Box3,
    /// Points of the local cloud inside `bbox`.
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameLabelSet {
    pub frame_index: usize,
    pub labels: Vec<FrameLabel>,
}

impl FrameLabelSet {
    pub fn records(&self) -> Vec<LabelRecord> {
        self.labels.iter().map(|l| LabelRecord::from_box(&l.bbox, 1.0)).collect()
    }
}

/// Projects each world-frame cluster into the camera of `pose` and fits an
/// axis-aligned box there. A box is kept only when `local_cloud` has at
/// least one point inside it and its nearest face is within `max_range`;
/// this drops trees that are out of view, out of range or fully occluded.
pub fn generate_frame_labels(
    clusters: &[Cluster],
    pose: &Pose,
    local_cloud: &PointCloud,
    max_range: f64,
) -> Result<FrameLabelSet, GeometryError> {
    let cam = Frame::Camera(pose.frame_index);
    if local_cloud.frame != cam {
        return Err(GeometryError::FrameMismatch { expected: cam, found: local_cloud.frame });
    }
    let mut labels = Vec::new();
    for cluster in clusters {
        if cluster.points.is_empty() {
            continue;
        }
        let in_cam: Vec<_> = cluster.points.iter().map(|p| pose.world_to_camera(p)).collect();
        let bbox = fit_axis_aligned_box(&in_cam, cam)?;
        if bbox.max().z <= 0.0 || bbox.distance_to(&nalgebra::Point3::origin()) > max_range {
            continue;
        }
        let support = points_in_box(local_cloud, &bbox)?.len();
        if support > 0 {
            labels.push(FrameLabel { cluster_id: cluster.id, bbox, support });
        }
    }
    Ok(FrameLabelSet { frame_index: pose.frame_index, labels })
}
