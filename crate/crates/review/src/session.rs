//! Review session state: the auto clusters plus an append-only edit log.

use std::collections::BTreeMap;

use canopy_core::geometry::{fit_axis_aligned_box, Box3, Frame, PointCloud};
use canopy_core::io::{DatasetError, DatasetLayout};
use canopy_core::pipeline::{read_clusters, write_clusters, GROUND_CODE, UNCLUSTERED_CODE};
use canopy_core::segmentation::{Cluster, ClusterSource};
use nalgebra::Point3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("no cluster with id {0}")]
    UnknownCluster(u32),
    #[error("box contains no above-ground points")]
    EmptyBox,
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// One accepted request. Rejected requests are never logged.
#[derive(Debug, Clone, PartialEq)]
pub enum Edit {
    Delete(u32),
    /// World-frame box; every above-ground point inside becomes a manual cluster.
    Add(Box3),
    Undo,
}

/// Per-point codes and the clusters they describe.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub codes: Vec<i64>,
    pub clusters: BTreeMap<u32, Cluster>,
}

impl ClusterSet {
    fn new(codes: Vec<i64>, clusters: Vec<Cluster>) -> Self {
        Self { codes, clusters: clusters.into_iter().map(|c| (c.id, c)).collect() }
    }

    fn delete(&mut self, id: u32) -> Result<(), ReviewError> {
        let c = self.clusters.remove(&id).ok_or(ReviewError::UnknownCluster(id))?;
        for &i in &c.point_indices {
            self.codes[i] = UNCLUSTERED_CODE;
        }
        Ok(())
    }

    /// Moves every above-ground point inside `bbox` into a new manual
    /// cluster with id `id`. Clusters left without points disappear.
    fn add(&mut self, map: &PointCloud, bbox: &Box3, id: u32) -> Result<(), ReviewError> {
        let inside: Vec<usize> = (0..map.len())
            .filter(|&i| self.codes[i] != GROUND_CODE && bbox.contains(&map.points[i]))
            .collect();
        if inside.is_empty() {
            return Err(ReviewError::EmptyBox);
        }
        let mut touched = Vec::new();
        for &i in &inside {
            if self.codes[i] >= 0 {
                touched.push(self.codes[i] as u32);
            }
            self.codes[i] = id as i64;
        }
        touched.sort_unstable();
        touched.dedup();
        for old in touched {
            let Some(c) = self.clusters.get_mut(&old) else { continue };
            c.point_indices.retain(|&i| self.codes[i] == old as i64);
            c.points = c.point_indices.iter().map(|&i| map.points[i]).collect();
            if c.is_empty() {
                self.clusters.remove(&old);
            }
        }
        let points = inside.iter().map(|&i| map.points[i]).collect();
        self.clusters.insert(id, Cluster { id, point_indices: inside, points, source: ClusterSource::Manual });
        Ok(())
    }
}

fn validate_box(b: &Box3) -> Result<(), ReviewError> {
    if b.frame != Frame::World {
        return Err(ReviewError::InvalidBox("box must be in the world frame".into()));
    }
    let finite = b.center.iter().chain(b.extents.iter()).all(|v| v.is_finite());
    if !finite || b.extents.iter().any(|&e| e <= 0.0) {
        return Err(ReviewError::InvalidBox("center must be finite and extents positive".into()));
    }
    Ok(())
}

/// Applies the effective edits of `log` to `initial`. An `Undo` cancels the
/// latest edit that is still in effect.
pub fn replay(map: &PointCloud, initial: &ClusterSet, log: &[Edit]) -> Result<ClusterSet, ReviewError> {
    let mut effective: Vec<&Edit> = Vec::new();
    for e in log {
        match e {
            Edit::Undo => {
                effective.pop().ok_or(ReviewError::NothingToUndo)?;
            }
            _ => effective.push(e),
        }
    }
    let base_max = initial.clusters.keys().next_back().copied();
    let mut set = initial.clone();
    for e in effective {
        apply(map, &mut set, base_max, e)?;
    }
    Ok(set)
}

fn next_id(set: &ClusterSet, base_max: Option<u32>) -> u32 {
    base_max.max(set.clusters.keys().next_back().copied()).map_or(0, |m| m + 1)
}

fn apply(map: &PointCloud, set: &mut ClusterSet, base_max: Option<u32>, e: &Edit) -> Result<Option<u32>, ReviewError> {
    match e {
        Edit::Delete(id) => set.delete(*id).map(|_| None),
        Edit::Add(b) => {
            validate_box(b)?;
            let id = next_id(set, base_max);
            set.add(map, b, id).map(|_| Some(id))
        }
        Edit::Undo => unreachable!("undo is resolved by replay"),
    }
}

/// Summary of one cluster for clients.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterInfo {
    pub id: u32,
    pub point_count: usize,
    pub bbox: Box3,
    pub source: ClusterSource,
}

pub struct ReviewSession {
    layout: DatasetLayout,
    map: PointCloud,
    initial: ClusterSet,
    current: ClusterSet,
    log: Vec<Edit>,
}

impl ReviewSession {
    /// Loads the global map and the cluster files written by `segment`.
    pub fn open(layout: DatasetLayout) -> Result<Self, ReviewError> {
        let (map, codes, clusters) = read_clusters(&layout)?;
        Ok(Self::from_parts(layout, map, codes, clusters))
    }

    pub fn from_parts(layout: DatasetLayout, map: PointCloud, codes: Vec<i64>, clusters: Vec<Cluster>) -> Self {
        let initial = ClusterSet::new(codes, clusters);
        Self { layout, map, current: initial.clone(), initial, log: Vec::new() }
    }

    pub fn map(&self) -> &PointCloud {
        &self.map
    }

    pub fn log(&self) -> &[Edit] {
        &self.log
    }

    pub fn current(&self) -> &ClusterSet {
        &self.current
    }

    pub fn initial(&self) -> &ClusterSet {
        &self.initial
    }

    /// Above-ground points of the map, in map order.
    pub fn above_ground(&self) -> Vec<Point3<f64>> {
        self.initial
            .codes
            .iter()
            .zip(&self.map.points)
            .filter(|(c, _)| **c != GROUND_CODE)
            .map(|(_, p)| *p)
            .collect()
    }

    pub fn clusters(&self) -> Vec<ClusterInfo> {
        self.current
            .clusters
            .values()
            .filter_map(|c| {
                let bbox = fit_axis_aligned_box(&c.points, Frame::World).ok()?;
                Some(ClusterInfo { id: c.id, point_count: c.len(), bbox, source: c.source })
            })
            .collect()
    }

    pub fn cluster(&self, id: u32) -> Option<ClusterInfo> {
        self.clusters().into_iter().find(|c| c.id == id)
    }

    pub fn delete(&mut self, id: u32) -> Result<(), ReviewError> {
        let e = Edit::Delete(id);
        let base_max = self.initial.clusters.keys().next_back().copied();
        apply(&self.map, &mut self.current, base_max, &e)?;
        self.log.push(e);
        Ok(())
    }

    /// Returns the id of the new manual cluster.
    pub fn add_box(&mut self, bbox: Box3) -> Result<u32, ReviewError> {
        let e = Edit::Add(bbox);
        let base_max = self.initial.clusters.keys().next_back().copied();
        let mut next = self.current.clone();
        let id = apply(&self.map, &mut next, base_max, &e)?.expect("add yields an id");
        self.current = next;
        self.log.push(e);
        Ok(id)
    }

    pub fn undo(&mut self) -> Result<(), ReviewError> {
        let mut log = self.log.clone();
        log.push(Edit::Undo);
        self.current = replay(&self.map, &self.initial, &log)?;
        self.log = log;
        Ok(())
    }

    /// Writes `clusters.txt` and `clusters_meta.txt` from the current set.
    pub fn commit(&self) -> Result<(), ReviewError> {
        let clusters: Vec<Cluster> = self.current.clusters.values().cloned().collect();
        write_clusters(&self.layout, &self.current.codes, &clusters)?;
        log::info!("committed {} clusters after {} edits", clusters.len(), self.log.len());
        Ok(())
    }
}
