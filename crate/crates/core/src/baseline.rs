//! Clustering-only tree detector run directly on single frames.

use crate::geometry::{fit_axis_aligned_box, PointCloud};
use crate::io::{LabelRecord, RunConfig};
use crate::segmentation::{dbscan, filter_clusters, ransac_ground_plane, remove_ground, SegmentationError};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub ransac_iterations: usize,
    pub ransac_threshold: f64,
    pub ground_margin: f64,
    pub eps: f64,
    pub min_samples: usize,
    pub min_cluster_points: usize,
    pub seed: u64,
}

impl BaselineParams {
    /// Same clustering parameters as label generation, with the per-frame
    /// RANSAC iteration count and cluster size.
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            ransac_iterations: cfg.baseline.ransac_iterations,
            ransac_threshold: cfg.ransac.threshold,
            ground_margin: cfg.ground.margin,
            eps: cfg.dbscan.eps,
            min_samples: cfg.dbscan.min_samples,
            min_cluster_points: cfg.baseline.min_cluster_points,
            seed: cfg.seed,
        }
    }
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self::from_config(&RunConfig::default())
    }
}

/// Ground removal, DBSCAN and a size filter on one camera-frame cloud; every
/// surviving cluster becomes a box with score 1. The RANSAC seed is derived
/// from the frame index so frames are independent.
pub fn detect_frame(cloud: &PointCloud, params: &BaselineParams) -> Vec<LabelRecord> {
    let frame_seed = match cloud.frame {
        crate::geometry::Frame::Camera(k) => params.seed.wrapping_add(k as u64),
        crate::geometry::Frame::World => params.seed,
    };
    let plane = match ransac_ground_plane(cloud, params.ransac_iterations, params.ransac_threshold, frame_seed) {
        Ok(p) => p,
        Err(SegmentationError::InsufficientPoints(_) | SegmentationError::DegenerateInput) => return Vec::new(),
        Err(e) => {
            log::warn!("baseline ground fit failed: {e}");
            return Vec::new();
        }
    };
    let above = remove_ground(cloud, &plane, params.ground_margin);
    if above.is_empty() {
        return Vec::new();
    }
    let labels = dbscan(&above.points, params.eps, params.min_samples);
    filter_clusters(&labels, &above, params.min_cluster_points)
        .iter()
        .filter_map(|c| fit_axis_aligned_box(&c.points, cloud.frame).ok())
        .map(|b| LabelRecord::from_box(&b, 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, Frame, Pose};
    use crate::synth::{level_camera_rotation, render_frame, Ground, NoiseModel, RenderOptions, Scene, Tree};
    use crate::sparsify::{sparsify, SparsifyParams};
    use nalgebra::Vector3;

    #[test]
    fn empty_cloud_gives_nothing() {
        assert!(detect_frame(&PointCloud::empty(Frame::Camera(0)), &BaselineParams::default()).is_empty());
    }

    #[test]
    fn three_near_trees_on_clean_frame() {
        let trees = vec![
            Tree { id: 0, center: [3.0, 1.5], diameter: 0.25, height: 4.0 },
            Tree { id: 1, center: [4.0, -1.2], diameter: 0.2, height: 4.0 },
            Tree { id: 2, center: [4.8, 0.3], diameter: 0.25, height: 5.0 },
        ];
        let scene = Scene { trees, ground: Ground { x: [-5.0, 30.0], y: [-20.0, 20.0] } };
        let pose = Pose::from_rotation_matrix(0, Vector3::new(0.0, 0.0, 1.0), level_camera_rotation(0.0));
        let intr = CameraIntrinsics::zed2_720p();
        let f = render_frame(&scene, &pose, &intr, &NoiseModel::zero(), &RenderOptions::default(), 0);
        let sparse = sparsify(&f.cloud, &SparsifyParams::for_camera(&intr));
        let dets = detect_frame(&sparse, &BaselineParams::default());
        assert_eq!(dets.len(), 3);
        for t in &scene.trees {
            let c = pose.world_to_camera(&nalgebra::Point3::new(t.center[0], t.center[1], 1.0));
            let best = dets.iter().map(|d| (d.center.x - c.x).hypot(d.center.z - c.z)).fold(f64::INFINITY, f64::min);
            assert!(best < 0.1, "tree {} off by {best}", t.id);
        }
    }
}
