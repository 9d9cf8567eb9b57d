//! Dataset-level drivers for every pipeline stage.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::baseline::{detect_frame, BaselineParams};
use crate::eval::{accumulate, match_frame, MatchResult, RangeBinnedStats};
use crate::geometry::{fit_axis_aligned_box, Frame, GeometryError, PointCloud, Pose};
use crate::io::{
    frame_file_name, list_frame_files, read_labels, read_point_cloud, read_trajectory, write_atomic, write_labels,
    write_point_cloud, write_track_records, BaselineInput, DatasetError, DatasetLayout, LabelRecord, RunConfig, TrackRecord,
};
use crate::labeler::generate_frame_labels;
use crate::segmentation::{
    above_ground_indices, dbscan, filter_clusters, ransac_ground_plane, Cluster, ClusterSource, Plane, SegmentationError,
};
use crate::sparsify::{sparsify, SparsifyParams};
use crate::synth::SynthError;
use crate::tracker::{Tracker, TrackerConfig, TrackerError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Marks a global-map point removed as ground in `clusters.txt`.
pub const GROUND_CODE: i64 = -2;
/// Marks an above-ground point that belongs to no cluster.
pub const UNCLUSTERED_CODE: i64 = -1;

/// Ground-removed, clustered global map.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub plane: Plane,
    /// Per map point: cluster id, [`UNCLUSTERED_CODE`] or [`GROUND_CODE`].
    pub codes: Vec<i64>,
    pub clusters: Vec<Cluster>,
}

/// RANSAC ground removal, DBSCAN and the cluster-size filter on the global map.
pub fn segment_map(map: &PointCloud, cfg: &RunConfig) -> Result<Segmentation, PipelineError> {
    let plane = ransac_ground_plane(map, cfg.ransac.iterations, cfg.ransac.threshold, cfg.seed)?;
    let above = above_ground_indices(map, &plane, cfg.ground.margin);
    let above_cloud = map.select(&above);
    let labels = dbscan(&above_cloud.points, cfg.dbscan.eps, cfg.dbscan.min_samples);
    let mut clusters = filter_clusters(&labels, &above_cloud, cfg.dbscan.min_cluster_points);
    let mut codes = vec![GROUND_CODE; map.len()];
    for &i in &above {
        codes[i] = UNCLUSTERED_CODE;
    }
    for c in &mut clusters {
        c.point_indices = c.point_indices.iter().map(|&i| above[i]).collect();
        for &i in &c.point_indices {
            codes[i] = c.id as i64;
        }
    }
    log::info!("segmented map: {} above-ground points, {} clusters", above.len(), clusters.len());
    Ok(Segmentation { plane, codes, clusters })
}

pub fn format_cluster_codes(codes: &[i64]) -> String {
    let mut out = String::with_capacity(codes.len() * 3);
    for c in codes {
        writeln!(out, "{c}").unwrap();
    }
    out
}

/// `id count cx cy cz ex ey ez source` per cluster, world frame.
pub fn format_clusters_meta(clusters: &[Cluster]) -> String {
    let mut out = String::from("# id count cx cy cz ex ey ez source\n");
    for c in clusters {
        let Ok(b) = fit_axis_aligned_box(&c.points, Frame::World) else { continue };
        writeln!(
            out,
            "{} {} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {}",
            c.id,
            c.len(),
            b.center.x,
            b.center.y,
            b.center.z,
            b.extents.x,
            b.extents.y,
            b.extents.z,
            c.source.as_str()
        )
        .unwrap();
    }
    out
}

pub fn write_clusters(layout: &DatasetLayout, codes: &[i64], clusters: &[Cluster]) -> Result<(), DatasetError> {
    write_atomic(&layout.clusters(), format_cluster_codes(codes).as_bytes())?;
    write_atomic(&layout.clusters_meta(), format_clusters_meta(clusters).as_bytes())
}

/// One `clusters_meta.txt` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMeta {
    pub id: u32,
    pub count: usize,
    pub center: [f64; 3],
    pub extents: [f64; 3],
    pub source: ClusterSource,
}

pub fn parse_clusters_meta(text: &str, path: &Path) -> Result<Vec<ClusterMeta>, DatasetError> {
    let perr = |line: usize, msg: &str| DatasetError::Parse { path: path.display().to_string(), msg: format!("line {line}: {msg}") };
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 9 {
            return Err(perr(i + 1, "expected 9 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(i + 1, "bad number"));
        let source = match f[8] {
            "auto" => ClusterSource::Auto,
            "manual" => ClusterSource::Manual,
            _ => return Err(perr(i + 1, "source must be auto or manual")),
        };
        out.push(ClusterMeta {
            id: f[0].parse().map_err(|_| perr(i + 1, "bad id"))?,
            count: f[1].parse().map_err(|_| perr(i + 1, "bad count"))?,
            center: [num(f[2])?, num(f[3])?, num(f[4])?],
            extents: [num(f[5])?, num(f[6])?, num(f[7])?],
            source,
        });
    }
    Ok(out)
}

pub fn parse_cluster_codes(text: &str, path: &Path) -> Result<Vec<i64>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<i64>()
                .ok()
                .filter(|&c| c >= GROUND_CODE)
                .ok_or_else(|| DatasetError::Parse { path: path.display().to_string(), msg: format!("line {}: bad cluster code", i + 1) })
        })
        .collect()
}

/// Rebuilds clusters from a map and its per-point codes. Ids and sources
/// come from `meta`; codes without a meta row are an error.
pub fn clusters_from_codes(map: &PointCloud, codes: &[i64], meta: &[ClusterMeta]) -> Result<Vec<Cluster>, DatasetError> {
    if codes.len() != map.len() {
        return Err(DatasetError::Data(format!(
            "clusters.txt has {} lines but the global map has {} points",
            codes.len(),
            map.len()
        )));
    }
    let mut members: BTreeMap<u32, Vec<usize>> = meta.iter().map(|m| (m.id, Vec::new())).collect();
    for (i, &c) in codes.iter().enumerate() {
        if c >= 0 {
            members
                .get_mut(&(c as u32))
                .ok_or_else(|| DatasetError::Data(format!("cluster {c} is missing from clusters_meta.txt")))?
                .push(i);
        }
    }
    Ok(meta
        .iter()
        .map(|m| {
            let idx = members.remove(&m.id).unwrap_or_default();
            Cluster { id: m.id, points: idx.iter().map(|&i| map.points[i]).collect(), point_indices: idx, source: m.source }
        })
        .collect())
}

/// Loads the global map, codes and clusters of a segmented dataset.
pub fn read_clusters(layout: &DatasetLayout) -> Result<(PointCloud, Vec<i64>, Vec<Cluster>), DatasetError> {
    let map = read_point_cloud(&layout.global_map(), Frame::World)?;
    let codes_path = layout.clusters();
    let codes_text = std::fs::read_to_string(&codes_path).map_err(|e| DatasetError::io(&codes_path, e))?;
    let codes = parse_cluster_codes(&codes_text, &codes_path)?;
    let meta_path = layout.clusters_meta();
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| DatasetError::io(&meta_path, e))?;
    let meta = parse_clusters_meta(&meta_text, &meta_path)?;
    let clusters = clusters_from_codes(&map, &codes, &meta)?;
    Ok((map, codes, clusters))
}

/// Runs [`segment_map`] on `global_map.ply` and writes the cluster files.
pub fn segment_dataset(layout: &DatasetLayout, cfg: &RunConfig) -> Result<Segmentation, PipelineError> {
    let map = read_point_cloud(&layout.global_map(), Frame::World)?;
    let seg = segment_map(&map, cfg)?;
    write_clusters(layout, &seg.codes, &seg.clusters)?;
    Ok(seg)
}

fn poses_by_frame(layout: &DatasetLayout) -> Result<BTreeMap<usize, Pose>, DatasetError> {
    Ok(read_trajectory(&layout.trajectory())?.into_iter().map(|p| (p.frame_index, p)).collect())
}

fn pose_for(poses: &BTreeMap<usize, Pose>, k: usize) -> Result<&Pose, DatasetError> {
    poses.get(&k).ok_or_else(|| DatasetError::Data(format!("no pose for frame {k}")))
}

/// Sparsifies every dense cloud into `sparse/`. Returns `(input, output)` point totals.
pub fn sparsify_dataset(layout: &DatasetLayout, cfg: &RunConfig) -> Result<(usize, usize), PipelineError> {
    let params = SparsifyParams::from_config(&cfg.sparsify, &cfg.camera.intrinsics);
    let files = list_frame_files(&layout.clouds_dir(), "ply")?;
    let counts = files
        .par_iter()
        .map(|(k, path)| -> Result<(usize, usize), PipelineError> {
            let dense = read_point_cloud(path, Frame::Camera(*k))?;
            let sparse = sparsify(&dense, &params);
            write_point_cloud(&sparse, &layout.sparse_dir().join(frame_file_name(*k, "ply")))?;
            Ok((dense.len(), sparse.len()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(counts.into_iter().fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSummary {
    pub frames: usize,
    pub boxes: usize,
}

/// Writes `labels/NNNNNN.txt` for every sparse cloud, from the committed clusters.
pub fn label_dataset(layout: &DatasetLayout, cfg: &RunConfig) -> Result<LabelSummary, PipelineError> {
    let (_, _, clusters) = read_clusters(layout)?;
    let poses = poses_by_frame(layout)?;
    let files = list_frame_files(&layout.sparse_dir(), "ply")?;
    for (k, _) in &files {
        pose_for(&poses, *k)?;
    }
    let boxes = files
        .par_iter()
        .map(|(k, path)| -> Result<usize, PipelineError> {
            let local = read_point_cloud(path, Frame::Camera(*k))?;
            let set = generate_frame_labels(&clusters, &poses[k], &local, cfg.sparsify.max_range)?;
            write_labels(&set.records(), &layout.labels_dir().join(frame_file_name(*k, "txt")))?;
            Ok(set.labels.len())
        })
        .sum::<Result<usize, _>>()?;
    log::info!("wrote labels for {} frames, {} boxes", files.len(), boxes);
    Ok(LabelSummary { frames: files.len(), boxes })
}

/// Runs the baseline detector on every frame and writes `detections/`.
pub fn detect_dataset(layout: &DatasetLayout, cfg: &RunConfig) -> Result<usize, PipelineError> {
    let params = BaselineParams::from_config(cfg);
    let dir = match cfg.baseline.input {
        BaselineInput::Sparse => layout.sparse_dir(),
        BaselineInput::Dense => layout.clouds_dir(),
    };
    let files = list_frame_files(&dir, "ply")?;
    let total = files
        .par_iter()
        .map(|(k, path)| -> Result<usize, PipelineError> {
            let cloud = read_point_cloud(path, Frame::Camera(*k))?;
            let dets = detect_frame(&cloud, &params);
            write_labels(&dets, &layout.detections_dir().join(frame_file_name(*k, "txt")))?;
            Ok(dets.len())
        })
        .sum::<Result<usize, _>>()?;
    Ok(total)
}

fn read_frame_labels(dir: &Path) -> Result<BTreeMap<usize, Vec<LabelRecord>>, DatasetError> {
    list_frame_files(dir, "txt")?
        .into_iter()
        .map(|(k, p)| Ok((k, read_labels(&p)?)))
        .collect()
}

/// Confirmed tracks that are in view of `pose`, as output records.
pub fn visible_track_records(tracker: &Tracker, pose: &Pose) -> Vec<TrackRecord> {
    tracker
        .tracks()
        .iter()
        .filter(|t| t.status == crate::tracker::TrackStatus::Confirmed)
        .filter(|t| !tracker.outside_fov(&t.t, t.base_z, pose))
        .map(|t| TrackRecord {
            label: LabelRecord::from_box(&t.camera_box(pose), 1.0),
            track_id: t.id,
            state: [t.t.x, t.t.y, t.t.z],
        })
        .collect()
}

/// Feeds per-frame detections from `detections_dir` through the tracker in
/// trajectory order and writes `tracks/`. Frames without a detection file
/// count as frames without detections.
pub fn track_dataset(layout: &DatasetLayout, cfg: &RunConfig, detections_dir: &Path) -> Result<usize, PipelineError> {
    let poses = poses_by_frame(layout)?;
    let dets = read_frame_labels(detections_dir)?;
    if let Some(k) = dets.keys().find(|k| !poses.contains_key(k)) {
        return Err(DatasetError::Data(format!("no pose for frame {k}")).into());
    }
    let mut tracker = Tracker::new(TrackerConfig::from_settings(&cfg.tracker, cfg.camera.intrinsics))?;
    let empty = Vec::new();
    let mut written = 0;
    for (k, pose) in &poses {
        let out = tracker.step(dets.get(k).unwrap_or(&empty), pose);
        for (id, e) in &out.errors {
            log::warn!("frame {k}: track {id}: {e}");
        }
        let records = visible_track_records(&tracker, pose);
        written += records.len();
        write_track_records(&records, &layout.tracks_dir().join(frame_file_name(*k, "txt")))?;
    }
    Ok(written)
}

/// Matches every frame of `estimates_dir` against `gt_dir`. Frames are taken
/// from the trajectory; a missing file on either side is an empty set.
pub fn evaluate_dirs(
    layout: &DatasetLayout,
    estimates_dir: &Path,
    gt_dir: &Path,
    cfg: &RunConfig,
) -> Result<(RangeBinnedStats, Vec<MatchResult>), PipelineError> {
    let poses = poses_by_frame(layout)?;
    let est = read_frame_labels(estimates_dir)?;
    let gt = read_frame_labels(gt_dir)?;
    let empty = Vec::new();
    let results: Vec<MatchResult> = poses
        .keys()
        .map(|k| match_frame(*k, est.get(k).unwrap_or(&empty), gt.get(k).unwrap_or(&empty), cfg.eval.cutoff))
        .collect();
    Ok((accumulate(&results, cfg.eval.bin_width, cfg.eval.max_range), results))
}

/// One line per frame: `frame tp fp fn` followed by `est:gt:dist` pairs.
pub fn format_match_dump(results: &[MatchResult]) -> String {
    let mut out = String::from("# frame tp fp fn pairs(est:gt:dist)\n");
    for m in results {
        write!(out, "{} {} {} {}", m.frame_index, m.pairs.len(), m.false_positives.len(), m.false_negatives.len()).unwrap();
        for p in &m.pairs {
            write!(out, " {}:{}:{:.6}", p.estimate, p.gt, p.distance).unwrap();
        }
        out.push('\n');
    }
    out
}
