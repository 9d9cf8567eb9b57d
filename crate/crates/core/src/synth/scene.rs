use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SynthError;

/// Maximum placement attempts before giving up on a scene.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_trees: usize,
    /// Forest extent along world x and y (m).
    pub area: [f64; 2],
    /// World x where the forest starts; the camera starts at the origin.
    pub area_start: f64,
    /// Trunk diameter range (m).
    pub diameter: [f64; 2],
    /// Trunk height range (m).
    pub height: [f64; 2],
    /// Minimum distance between trunk centers (m).
    pub min_spacing: f64,
    /// Ground margin around the forest and the camera start (m).
    pub ground_margin: f64,
    /// Half-width of the tree-free lane along world y = 0 (m).
    pub corridor_half_width: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n_trees: 20,
            area: [20.0, 10.0],
            area_start: 2.0,
            diameter: [0.15, 0.6],
            height: [2.0, 6.0],
            min_spacing: 1.0,
            ground_margin: 20.0,
            corridor_half_width: 1.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            return bad("area must be positive");
        }
        if !(self.diameter[0] > 0.0 && self.diameter[0] <= self.diameter[1]) {
            return bad("diameter range must be positive and ordered");
        }
        if !(self.height[0] > 0.0 && self.height[0] <= self.height[1]) {
            return bad("height range must be positive and ordered");
        }
        if !(self.min_spacing >= 0.0 && self.ground_margin >= 0.0 && self.corridor_half_width >= 0.0) {
            return bad("spacing, ground margin and corridor width must be non-negative");
        }
        Ok(())
    }
}

/// A vertical cylindrical trunk standing on the ground plane `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tree {
    pub id: u32,
    pub center: [f64; 2],
    pub diameter: f64,
    pub height: f64,
}

impl Tree {
    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }
}

/// Axis-aligned ground rectangle on `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ground {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Ground {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x[0] && x <= self.x[1] && y >= self.y[0] && y <= self.y[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub trees: Vec<Tree>,
    pub ground: Ground,
}

impl Scene {
    pub fn tree(&self, id: u32) -> Option<&Tree> {
        self.trees.iter().find(|t| t.id == id)
    }
}

/// Places trunks uniformly in the forest area by rejection sampling, keeping
/// them clear of the corridor and at least `min_spacing` apart.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [ax, ay] = spec.area;
    let mut trees: Vec<Tree> = Vec::with_capacity(spec.n_trees);
    let mut attempts = 0;
    while trees.len() < spec.n_trees {
        if attempts >= MAX_PLACEMENT_ATTEMPTS {
            return Err(SynthError::Packing { placed: trees.len(), requested: spec.n_trees });
        }
        attempts += 1;
        let diameter = rng.random_range(spec.diameter[0]..=spec.diameter[1]);
        let height = rng.random_range(spec.height[0]..=spec.height[1]);
        let x = spec.area_start + rng.random_range(0.0..=ax);
        let y = rng.random_range(-ay / 2.0..=ay / 2.0);
        if y.abs() < spec.corridor_half_width + diameter / 2.0 {
            continue;
        }
        if trees.iter().any(|t| (t.center[0] - x).hypot(t.center[1] - y) < spec.min_spacing) {
            continue;
        }
        trees.push(Tree { id: trees.len() as u32, center: [x, y], diameter, height });
    }
    let m = spec.ground_margin;
    let ground = Ground {
        x: [spec.area_start.min(0.0) - m, spec.area_start.max(0.0) + ax + m],
        y: [-ay / 2.0 - m, ay / 2.0 + m],
    };
    Ok(Scene { trees, ground })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_scene_is_ground_only() {
        let s = generate_scene(&SceneSpec { n_trees: 0, ..SceneSpec::default() }).unwrap();
        assert!(s.trees.is_empty());
        assert!(s.ground.contains(0.0, 0.0));
    }

    #[test]
    fn spacing_and_corridor_hold() {
        let spec = SceneSpec { seed: 4, ..SceneSpec::default() };
        let s = generate_scene(&spec).unwrap();
        assert_eq!(s.trees.len(), 20);
        for (i, a) in s.trees.iter().enumerate() {
            assert!(a.center[1].abs() >= spec.corridor_half_width + a.radius());
            assert!(a.diameter >= 0.15 && a.diameter <= 0.6);
            for b in &s.trees[i + 1..] {
                assert!((a.center[0] - b.center[0]).hypot(a.center[1] - b.center[1]) >= 1.0);
            }
        }
        assert_eq!(generate_scene(&spec).unwrap(), s);
    }

    #[test]
    fn infeasible_packing() {
        let spec = SceneSpec { n_trees: 500, area: [5.0, 5.0], ..SceneSpec::default() };
        assert!(matches!(generate_scene(&spec), Err(SynthError::Packing { .. })));
    }
}
