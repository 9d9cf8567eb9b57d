//! Ground-plane removal and density clustering.

mod dbscan;
mod ransac;

pub use dbscan::dbscan;
pub use ransac::{ransac_ground_plane, Plane};

use nalgebra::{Point3, Vector3};
use thiserror::Error;

use crate::geometry::{Frame, PointCloud};

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("need at least 3 points, got {0}")]
    InsufficientPoints(usize),
    #[error("every RANSAC sample was degenerate")]
    DegenerateInput,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Up direction of a frame: world +z, or camera -y for a level camera.
pub fn up_vector(frame: Frame) -> Vector3<f64> {
    match frame {
        Frame::World => Vector3::z(),
        Frame::Camera(_) => -Vector3::y(),
    }
}

/// Indices of points strictly more than `margin` above the plane.
pub fn above_ground_indices(cloud: &PointCloud, plane: &Plane, margin: f64) -> Vec<usize> {
    cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p) > margin)
        .map(|(i, _)| i)
        .collect()
}

/// Drops the ground slab and everything beneath it.
pub fn remove_ground(cloud: &PointCloud, plane: &Plane, margin: f64) -> PointCloud {
    cloud.select(&above_ground_indices(cloud, plane, margin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterSource {
    Auto,
    Manual,
}

impl ClusterSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ClusterSource::Auto => "auto",
            ClusterSource::Manual => "manual",
        }
    }
}

/// A group of points believed to be one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: u32,
    /// Indices into the source cloud, ascending.
    pub point_indices: Vec<usize>,
    pub points: Vec<Point3<f64>>,
    pub source: ClusterSource,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.point_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_indices.is_empty()
    }
}

/// Groups labeled points into clusters, keeping those with at least `p_min`
/// points. Surviving clusters get dense ids in order of their label.
pub fn filter_clusters(labels: &[Option<u32>], cloud: &PointCloud, p_min: usize) -> Vec<Cluster> {
    let n_labels = labels.iter().flatten().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = l {
            members[*l as usize].push(i);
        }
    }
    members
        .into_iter()
        .filter(|m| !m.is_empty() && m.len() >= p_min)
        .enumerate()
        .map(|(id, point_indices)| Cluster {
            id: id as u32,
            points: point_indices.iter().map(|&i| cloud.points[i]).collect(),
            point_indices,
            source: ClusterSource::Auto,
        })
        .collect()
}
