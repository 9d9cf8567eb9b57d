use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Scene, SynthError};
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpec {
    pub n_frames: usize,
    /// Distance travelled per frame (m).
    pub speed: f64,
    pub camera_height: f64,
    /// Per-frame heading perturbation (rad).
    pub heading_sigma: f64,
    /// Largest allowed heading (rad).
    pub max_heading: f64,
    /// Minimum distance between the camera and any trunk surface (m).
    pub clearance: f64,
    pub seed: u64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            n_frames: 200,
            speed: 0.1,
            camera_height: 1.0,
            heading_sigma: 0.003,
            max_heading: 0.1,
            clearance: 0.3,
            seed: 0,
        }
    }
}

/// Camera-to-world rotation of a level camera with heading `psi` about world z.
pub fn level_camera_rotation(psi: f64) -> Matrix3<f64> {
    let (s, c) = psi.sin_cos();
    Matrix3::from_columns(&[Vector3::new(s, -c, 0.0), Vector3::new(0.0, 0.0, -1.0), Vector3::new(c, s, 0.0)])
}

/// A level camera walking forward from the origin along world +x.
///
/// The heading wanders with small Gaussian steps and is pulled back toward
/// the corridor axis, so the path stays smooth and bounded. Every step covers
/// exactly `speed` meters in the ground plane.
pub fn generate_trajectory(scene: &Scene, spec: &TrajectorySpec) -> Result<Vec<Pose>, SynthError> {
    if spec.n_frames == 0 {
        return Err(SynthError::InvalidSpec("n_frames must be >= 1".into()));
    }
    if !(spec.speed >= 0.0 && spec.camera_height > 0.0 && spec.heading_sigma >= 0.0) {
        return Err(SynthError::InvalidSpec("speed, camera height and heading sigma must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7261_6a65_6374_6f72);
    let noise = Normal::new(0.0, spec.heading_sigma).expect("finite sigma");
    let (mut x, mut y, mut psi) = (0.0f64, 0.0f64, 0.0f64);
    let mut poses = Vec::with_capacity(spec.n_frames);
    for k in 0..spec.n_frames {
        if k > 0 {
            psi += noise.sample(&mut rng) - 0.1 * psi - 0.02 * y;
            psi = psi.clamp(-spec.max_heading, spec.max_heading);
            x += spec.speed * psi.cos();
            y += spec.speed * psi.sin();
        }
        for t in &scene.trees {
            let gap = (t.center[0] - x).hypot(t.center[1] - y) - t.radius();
            if gap < spec.clearance {
                return Err(SynthError::Path { frame: k, tree: t.id });
            }
        }
        poses.push(Pose::from_rotation_matrix(k, Vector3::new(x, y, spec.camera_height), level_camera_rotation(psi)));
    }
    Ok(poses)
}
