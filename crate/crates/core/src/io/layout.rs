use std::path::{Path, PathBuf};

use super::DatasetError;

/// `NNNNNN.txt`-style name for a frame.
pub fn frame_file_name(frame_index: usize, ext: &str) -> String {
    format!("{frame_index:06}.{ext}")
}

pub fn parse_frame_file_name(name: &str, ext: &str) -> Option<usize> {
    let stem = name.strip_suffix(ext)?.strip_suffix('.')?;
    (stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit())).then(|| stem.parse().ok())?
}

/// Frame-indexed files in `dir` with extension `ext`, sorted by frame.
pub fn list_frame_files(dir: &Path, ext: &str) -> Result<Vec<(usize, PathBuf)>, DatasetError> {
    let entries = std::fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| DatasetError::io(dir, e))?;
        if let Some(k) = entry.file_name().to_str().and_then(|n| parse_frame_file_name(n, ext)) {
            out.push((k, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Paths inside a dataset directory.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn clouds_dir(&self) -> PathBuf {
        self.root.join("clouds")
    }
    pub fn sparse_dir(&self) -> PathBuf {
        self.root.join("sparse")
    }
    pub fn labels_dir(&self) -> PathBuf {
        self.root.join("labels")
    }
    pub fn detections_dir(&self) -> PathBuf {
        self.root.join("detections")
    }
    pub fn tracks_dir(&self) -> PathBuf {
        self.root.join("tracks")
    }
    pub fn gt_labels_dir(&self) -> PathBuf {
        self.root.join("gt_labels")
    }
    pub fn trajectory(&self) -> PathBuf {
        self.root.join("trajectory.txt")
    }
    pub fn global_map(&self) -> PathBuf {
        self.root.join("global_map.ply")
    }
    pub fn clusters(&self) -> PathBuf {
        self.root.join("clusters.txt")
    }
    pub fn clusters_meta(&self) -> PathBuf {
        self.root.join("clusters_meta.txt")
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.txt")
    }
    /// Resolves a directory argument relative to the dataset root.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }
}
