use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;

use super::{cast_rays, render_frame, NoiseModel, RenderOptions, Scene, SynthError};
use crate::geometry::{CameraIntrinsics, Frame, PointCloud, Pose};
use crate::io::{frame_file_name, write_atomic, write_labels, write_point_cloud, write_trajectory, DatasetLayout, LabelRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct MapOptions {
    /// Render every `frame_stride`-th pose into the map (the last pose is always included).
    pub frame_stride: usize,
    /// Keep points within this range of the camera (m).
    pub max_range: f64,
    /// Voxel edge for downsampling (m).
    pub voxel: f64,
    /// Fuse noisy renders instead of exact surface samples.
    pub noisy: Option<NoiseModel>,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self { frame_stride: 5, max_range: 10.0, voxel: 0.02, noisy: None }
    }
}

/// Keeps the first point that lands in each voxel, in input order.
pub fn voxel_downsample(points: impl IntoIterator<Item = Point3<f64>>, voxel: f64) -> Vec<Point3<f64>> {
    let inv = 1.0 / voxel;
    let mut seen = HashSet::new();
    points
        .into_iter()
        .filter(|p| seen.insert([(p.x * inv).floor() as i64, (p.y * inv).floor() as i64, (p.z * inv).floor() as i64]))
        .collect()
}

fn map_frames(n: usize, stride: usize) -> Vec<usize> {
    let mut frames: Vec<usize> = (0..n).step_by(stride.max(1)).collect();
    if n > 0 && frames.last() != Some(&(n - 1)) {
        frames.push(n - 1);
    }
    frames
}

/// Fuses renders along the trajectory into one world-frame cloud.
pub fn build_global_map(
    scene: &Scene,
    trajectory: &[Pose],
    intrinsics: &CameraIntrinsics,
    opts: &MapOptions,
    seed: u64,
) -> PointCloud {
    let render_opts = RenderOptions { max_depth: opts.max_range, ..RenderOptions::default() };
    let per_frame: Vec<Vec<Point3<f64>>> = map_frames(trajectory.len(), opts.frame_stride)
        .par_iter()
        .map(|&k| {
            let pose = &trajectory[k];
            let cam: Vec<Point3<f64>> = match &opts.noisy {
                None => cast_rays(scene, pose, intrinsics, &render_opts).into_iter().map(|(p, _)| p).collect(),
                Some(noise) => render_frame(scene, pose, intrinsics, noise, &render_opts, seed).cloud.points,
            };
            cam.into_iter()
                .filter(|p| p.coords.norm() <= opts.max_range)
                .map(|p| pose.camera_to_world(&p))
                .collect()
        })
        .collect();
    PointCloud::new(voxel_downsample(per_frame.into_iter().flatten(), opts.voxel), Frame::World)
}

/// Everything `export_dataset` needs besides the scene and trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExportOptions {
    pub intrinsics: CameraIntrinsics,
    pub noise: NoiseModel,
    pub render: RenderOptions,
    pub map: MapOptions,
    pub seed: u64,
}

/// Text listing of the scene: `id x y diameter height` per tree.
pub fn format_scene(scene: &Scene) -> String {
    let mut out = String::from("# id x y diameter height\n");
    for t in &scene.trees {
        writeln!(out, "{} {} {} {} {}", t.id, t.center[0], t.center[1], t.diameter, t.height).unwrap();
    }
    out
}

fn camera_config(c: &CameraIntrinsics) -> String {
    format!(
        "[camera]\nfx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\n",
        c.fx, c.fy, c.cx, c.cy, c.width, c.height
    )
}

/// Writes a complete synthetic dataset: noisy clouds, trajectory, fused
/// global map, ground-truth labels, camera config and a scene listing.
pub fn export_dataset(scene: &Scene, trajectory: &[Pose], opts: &ExportOptions, out_dir: &Path) -> Result<(), SynthError> {
    let layout = DatasetLayout::new(out_dir);
    write_trajectory(trajectory, &layout.trajectory())?;
    write_atomic(&layout.config(), camera_config(&opts.intrinsics).as_bytes())?;
    write_atomic(&layout.root.join("scene.txt"), format_scene(scene).as_bytes())?;

    trajectory.par_iter().try_for_each(|pose| -> Result<(), SynthError> {
        let f = render_frame(scene, pose, &opts.intrinsics, &opts.noise, &opts.render, opts.seed);
        let k = pose.frame_index;
        write_point_cloud(&f.cloud, &layout.clouds_dir().join(frame_file_name(k, "ply")))?;
        let labels: Vec<LabelRecord> = f.labels.iter().map(|l| LabelRecord::from_box(&l.bbox, 1.0)).collect();
        write_labels(&labels, &layout.gt_labels_dir().join(frame_file_name(k, "txt")))?;
        Ok(())
    })?;

    let map = build_global_map(scene, trajectory, &opts.intrinsics, &opts.map, opts.seed);
    write_point_cloud(&map, &layout.global_map())?;
    log::info!("exported {} frames, global map with {} points", trajectory.len(), map.len());
    Ok(())
}
