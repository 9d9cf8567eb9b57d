//! Tree labeling and mapping from noisy stereo point clouds.

pub mod assignment;
pub mod baseline;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod labeler;
pub mod pipeline;
pub mod segmentation;
pub mod sparsify;
pub mod synth;
pub mod tracker;
