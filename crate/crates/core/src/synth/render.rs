use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{Scene, Tree};
use crate::geometry::{cylinder_box_in_camera, Box3, CameraIntrinsics, Frame, Pose};

/// Stereo-like noise. Depth noise follows the disparity error propagation
/// `σ_z = z² σ_d / (f b)`, so it grows quadratically with depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Disparity noise (px).
    pub disparity_sigma: f64,
    /// Focal length used for disparity (px).
    pub focal: f64,
    /// Stereo baseline (m).
    pub baseline: f64,
    /// Lateral jitter on camera x and y (m).
    pub lateral_sigma: f64,
    pub dropout_prob: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { disparity_sigma: 0.5, focal: 530.0, baseline: 0.12, lateral_sigma: 0.01, dropout_prob: 0.02 }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self { disparity_sigma: 0.0, focal: 530.0, baseline: 0.12, lateral_sigma: 0.0, dropout_prob: 0.0 }
    }

    pub fn depth_sigma(&self, z: f64) -> f64 {
        z * z * self.disparity_sigma / (self.focal * self.baseline)
    }

    pub fn is_zero(&self) -> bool {
        self.disparity_sigma == 0.0 && self.lateral_sigma == 0.0 && self.dropout_prob == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    /// Surfaces deeper than this are not returned (m).
    pub max_depth: f64,
    /// Only points within this range count toward ground-truth visibility (m).
    pub label_range: f64,
    /// Render every `stride`-th pixel in each direction.
    pub pixel_stride: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { max_depth: 20.0, label_range: 15.0, pixel_stride: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    Ground,
    Tree(u32),
}

/// Ground-truth box of one visible tree.
#[derive(Debug, Clone, PartialEq)]
pub struct GtLabel {
    pub tree_id: u32,
    pub bbox: Box3,
    /// Rendered points of this tree inside `bbox` and within the label range.
    pub visible_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    /// Noisy camera-frame points.
    pub cloud: crate::geometry::PointCloud,
    /// Noiseless position of every point in `cloud`.
    pub clean: Vec<Point3<f64>>,
    pub surfaces: Vec<Surface>,
    pub labels: Vec<GtLabel>,
}

/// Entry distance along `o + t d` into the side of a vertical cylinder.
fn hit_cylinder(o: &Vector3<f64>, d: &Vector3<f64>, tree: &Tree) -> Option<f64> {
    let (ox, oy) = (o.x - tree.center[0], o.y - tree.center[1]);
    let a = d.x * d.x + d.y * d.y;
    if a <= 0.0 {
        return None;
    }
    let b = 2.0 * (d.x * ox + d.y * oy);
    let r = tree.radius();
    let c = ox * ox + oy * oy - r * r;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    if t <= 0.0 {
        return None;
    }
    let z = o.z + t * d.z;
    (0.0..=tree.height).contains(&z).then_some(t)
}

/// Casts one ray per pixel and returns the noiseless camera-frame hits with
/// their surfaces, in row-major pixel order.
pub fn cast_rays(
    scene: &Scene,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    opts: &RenderOptions,
) -> Vec<(Point3<f64>, Surface)> {
    let o = pose.translation;
    let stride = opts.pixel_stride.max(1);
    // Only trees that can appear in front of the camera within max_depth.
    let fwd = pose.camera_axis_in_world(2);
    let trees: Vec<&Tree> = scene
        .trees
        .iter()
        .filter(|t| {
            let rel = Vector3::new(t.center[0] - o.x, t.center[1] - o.y, 0.0);
            rel.dot(&fwd) > -t.radius() && rel.norm() - t.radius() <= opts.max_depth * 2.0
        })
        .collect();
    let rows: Vec<u32> = (0..intrinsics.height).step_by(stride as usize).collect();
    rows.par_iter()
        .flat_map_iter(|&v| {
            let trees = &trees;
            (0..intrinsics.width).step_by(stride as usize).filter_map(move |u| {
                let dc = Vector3::new(
                    (u as f64 + 0.5 - intrinsics.cx) / intrinsics.fx,
                    (v as f64 + 0.5 - intrinsics.cy) / intrinsics.fy,
                    1.0,
                );
                let dw = pose.rotation * dc;
                let mut best: Option<(f64, Surface)> = None;
                if dw.z < 0.0 {
                    let t = -o.z / dw.z;
                    let p = o + t * dw;
                    if scene.ground.contains(p.x, p.y) {
                        best = Some((t, Surface::Ground));
                    }
                }
                for tree in trees.iter() {
                    if let Some(t) = hit_cylinder(&o, &dw, tree) {
                        if best.is_none_or(|(bt, _)| t < bt) {
                            best = Some((t, Surface::Tree(tree.id)));
                        }
                    }
                }
                // dc has unit depth, so t is the depth of the hit
                let (t, s) = best?;
                (t <= opts.max_depth).then(|| (Point3::from(dc * t), s))
            })
        })
        .collect()
}

/// Renders one noisy camera-frame cloud with its ground-truth labels.
///
/// Noise is drawn from a generator seeded by `(seed, frame_index)`, so frames
/// can be rendered in any order or in parallel with identical output.
pub fn render_frame(
    scene: &Scene,
    pose: &Pose,
    intrinsics: &CameraIntrinsics,
    noise: &NoiseModel,
    opts: &RenderOptions,
    seed: u64,
) -> RenderedFrame {
    let hits = cast_rays(scene, pose, intrinsics, opts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pose.frame_index as u64 + 1);
    let mut points = Vec::with_capacity(hits.len());
    let mut clean = Vec::with_capacity(hits.len());
    let mut surfaces = Vec::with_capacity(hits.len());
    for (p, s) in hits {
        if noise.dropout_prob > 0.0 && rng.random::<f64>() < noise.dropout_prob {
            continue;
        }
        let mut q = p;
        if !noise.is_zero() {
            let n: f64 = StandardNormal.sample(&mut rng);
            let lx: f64 = StandardNormal.sample(&mut rng);
            let ly: f64 = StandardNormal.sample(&mut rng);
            q = Point3::from(p.coords * ((p.z + n * noise.depth_sigma(p.z)) / p.z));
            q.x += lx * noise.lateral_sigma;
            q.y += ly * noise.lateral_sigma;
        }
        points.push(q);
        clean.push(p);
        surfaces.push(s);
    }
    let labels = ground_truth_labels(scene, pose, &clean, &surfaces, opts.label_range);
    RenderedFrame { cloud: crate::geometry::PointCloud::new(points, Frame::Camera(pose.frame_index)), clean, surfaces, labels }
}

/// Boxes of every tree with at least one rendered surface point inside its
/// true box and within `label_range`.
pub fn ground_truth_labels(
    scene: &Scene,
    pose: &Pose,
    clean: &[Point3<f64>],
    surfaces: &[Surface],
    label_range: f64,
) -> Vec<GtLabel> {
    let mut by_tree: HashMap<u32, Vec<usize>> = HashMap::new();
    for (i, s) in surfaces.iter().enumerate() {
        if let Surface::Tree(id) = s {
            if clean[i].coords.norm() <= label_range {
                by_tree.entry(*id).or_default().push(i);
            }
        }
    }
    let mut labels = Vec::new();
    for tree in &scene.trees {
        let Some(idx) = by_tree.get(&tree.id) else { continue };
        let bbox = cylinder_box_in_camera(pose, tree.center, 0.0, tree.diameter, tree.height);
        let visible_points = idx.iter().filter(|&&i| bbox.contains(&clean[i])).count();
        if visible_points > 0 {
            labels.push(GtLabel { tree_id: tree.id, bbox, visible_points });
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{level_camera_rotation, Ground};

    fn one_tree(x: f64, y: f64) -> Scene {
        Scene {
            trees: vec![Tree { id: 0, center: [x, y], diameter: 0.4, height: 4.0 }],
            ground: Ground { x: [-5.0, 30.0], y: [-15.0, 15.0] },
        }
    }

    fn pose() -> Pose {
        Pose::from_rotation_matrix(0, Vector3::new(0.0, 0.0, 1.0), level_camera_rotation(0.0))
    }

    fn small() -> CameraIntrinsics {
        CameraIntrinsics::from_fov(320, 180, 110.0, 70.0)
    }

    #[test]
    fn zero_noise_points_lie_on_surfaces() {
        let scene = one_tree(5.0, 0.5);
        let pose = pose();
        let f = render_frame(&scene, &pose, &small(), &NoiseModel::zero(), &RenderOptions::default(), 1);
        assert_eq!(f.cloud.points, f.clean);
        let mut n_tree = 0;
        for (p, s) in f.clean.iter().zip(&f.surfaces) {
            let w = pose.camera_to_world(p);
            match s {
                Surface::Ground => assert!(w.z.abs() < 1e-6),
                Surface::Tree(_) => {
                    n_tree += 1;
                    assert!(((w.x - 5.0).hypot(w.y - 0.5) - 0.2).abs() < 1e-6);
                    assert!(w.z >= -1e-9 && w.z <= 4.0 + 1e-9);
                }
            }
        }
        assert!(n_tree > 100);
        assert_eq!(f.labels.len(), 1);
        assert!(f.labels[0].bbox.contains(&Point3::new(-0.5, 0.0, 5.0)));
    }

    #[test]
    fn hidden_tree_has_no_label() {
        let mut scene = one_tree(4.0, 0.0);
        scene.trees.push(Tree { id: 1, center: [8.0, 0.0], diameter: 0.2, height: 4.0 });
        let f = render_frame(&scene, &pose(), &small(), &NoiseModel::zero(), &RenderOptions::default(), 1);
        assert!(f.surfaces.iter().all(|s| *s != Surface::Tree(1)));
        assert_eq!(f.labels.iter().map(|l| l.tree_id).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn depth_noise_matches_model_at_seven_meters() {
        let scene = one_tree(7.0, 0.0);
        let noise = NoiseModel::default();
        let f = render_frame(&scene, &pose(), &CameraIntrinsics::zed2_720p(), &noise, &RenderOptions::default(), 3);
        let res: Vec<f64> = (0..f.clean.len())
            .filter(|&i| f.surfaces[i] == Surface::Tree(0))
            .map(|i| f.cloud.points[i].z - f.clean[i].z)
            .collect();
        assert!(res.len() >= 1000);
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let std = (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64).sqrt();
        let want = noise.depth_sigma(6.8);
        assert!((std - want).abs() <= 0.3 * want, "std {std} want {want}");
    }

    #[test]
    fn noise_grows_with_depth() {
        let n = NoiseModel::default();
        assert!((n.depth_sigma(7.0) - 0.385).abs() < 1e-3);
        assert!(n.depth_sigma(2.0) < n.depth_sigma(4.0));
    }

    #[test]
    fn deterministic_per_frame_seed() {
        let scene = one_tree(5.0, 0.5);
        let a = render_frame(&scene, &pose(), &small(), &NoiseModel::default(), &RenderOptions::default(), 9);
        let b = render_frame(&scene, &pose(), &small(), &NoiseModel::default(), &RenderOptions::default(), 9);
        assert_eq!(a, b);
    }
}
