//! Readers and writers for the on-disk dataset layout.
//!
//! ```text
//! DIR/
//!   clouds/NNNNNN.ply      dense per-frame clouds (camera frame)
//!   sparse/NNNNNN.ply      scan-line sparsified clouds
//!   trajectory.txt         camera-to-world poses
//!   global_map.ply         fused world-frame cloud
//!   clusters.txt           cluster id per global-map point
//!   clusters_meta.txt      one line per cluster
//!   labels/NNNNNN.txt      generated training labels
//!   detections/NNNNNN.txt  detector output
//!   tracks/NNNNNN.txt      confirmed tracks
//!   gt_labels/NNNNNN.txt   synthetic ground truth
//!   config.txt             run configuration
//! ```

mod config;
mod labels;
mod layout;
mod ply;
mod trajectory;

pub use config::{merge_config, parse_config, read_config, ConfigKey, RunConfig, CONFIG_KEYS};
pub use config::{
    BaselineConfig, BaselineInput, CameraConfig, DbscanConfig, EvalConfig, GroundConfig, RansacConfig, SparsifyConfig,
    TrackerSettings,
};
pub use labels::{
    format_labels, parse_labels, read_labels, read_track_records, write_labels, write_track_records, LabelRecord, ObjectClass,
    TrackRecord,
};
pub use layout::{frame_file_name, list_frame_files, parse_frame_file_name, DatasetLayout};
pub use ply::{read_ply, read_point_cloud, write_ply, write_point_cloud};
pub use trajectory::{format_trajectory, parse_trajectory, read_trajectory, write_trajectory};

use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: parse error: {msg}")]
    Parse { path: String, msg: String },
    #[error("data error: {0}")]
    Data(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(path: &Path, msg: impl Into<String>) -> Self {
        DatasetError::Parse { path: path.display().to_string(), msg: msg.into() }
    }
}

/// Writes `contents` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| DatasetError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| DatasetError::io(path, e))
}
