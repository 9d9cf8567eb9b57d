//! Synthetic forests: trunk placement, camera paths, ray-cast stereo-like
//! clouds with ground truth, and dataset export.

mod export;
mod render;
mod scene;
mod trajectory;

pub use export::{build_global_map, export_dataset, format_scene, voxel_downsample, ExportOptions, MapOptions};
pub use render::{cast_rays, ground_truth_labels, render_frame, GtLabel, NoiseModel, RenderOptions, RenderedFrame, Surface};
pub use scene::{generate_scene, Ground, Scene, SceneSpec, Tree, MAX_PLACEMENT_ATTEMPTS};
pub use trajectory::{generate_trajectory, level_camera_rotation, TrajectorySpec};

use thiserror::Error;

use crate::io::DatasetError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("could only place {placed} of {requested} trees")]
    Packing { placed: usize, requested: usize },
    #[error("camera path hits tree {tree} at frame {frame}")]
    Path { frame: usize, tree: u32 },
    #[error("invalid synthesis parameter: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}
