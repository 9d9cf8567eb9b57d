//! Run configuration: `key = value` lines, optional `[section]` headers.
//!
//! Keys are addressed as `section.name`. A bare `name` under a `[section]`
//! header expands to `section.name`. Missing keys keep their defaults and
//! unknown keys are rejected.

use std::fmt::Write as _;
use std::path::Path;

use super::DatasetError;
use crate::geometry::CameraIntrinsics;

#[derive(Debug, Clone, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundConfig {
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_samples: usize,
    pub min_cluster_points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyConfig {
    pub lines: usize,
    pub elev_min: f64,
    pub elev_max: f64,
    /// Degrees; 0 selects the default derived from the camera.
    pub azimuth_res: f64,
    pub max_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineInput {
    Sparse,
    Dense,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub ransac_iterations: usize,
    pub min_cluster_points: usize,
    pub input: BaselineInput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerSettings {
    /// Diagonal of the per-frame process noise (x, y, w), m².
    pub q: [f64; 3],
    /// Diagonal of the measurement noise (x, y, w), m².
    pub r: [f64; 3],
    pub gate_prob: f64,
    pub min_hits: u32,
    pub max_age: u32,
    pub fov_exit_frames: u32,
    pub max_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub cutoff: f64,
    pub bin_width: f64,
    pub max_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraConfig {
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub ransac: RansacConfig,
    pub ground: GroundConfig,
    pub dbscan: DbscanConfig,
    pub sparsify: SparsifyConfig,
    pub baseline: BaselineConfig,
    pub tracker: TrackerSettings,
    pub eval: EvalConfig,
    pub camera: CameraConfig,
    pub review_voxel: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ransac: RansacConfig { iterations: 1000, threshold: 0.5 },
            ground: GroundConfig { margin: 0.5 },
            dbscan: DbscanConfig { eps: 0.1, min_samples: 10, min_cluster_points: 2000 },
            sparsify: SparsifyConfig { lines: 128, elev_min: -35.0, elev_max: 35.0, azimuth_res: 0.0, max_range: 15.0 },
            baseline: BaselineConfig { ransac_iterations: 50, min_cluster_points: 50, input: BaselineInput::Sparse },
            tracker: TrackerSettings {
                q: [1e-4, 1e-4, 1e-5],
                r: [0.09, 0.09, 0.04],
                gate_prob: 0.95,
                min_hits: 3,
                max_age: 100,
                fov_exit_frames: 10,
                max_range: 15.0,
            },
            eval: EvalConfig { cutoff: 1.0, bin_width: 1.0, max_range: 15.0 },
            camera: CameraConfig { intrinsics: CameraIntrinsics::zed2_720p() },
            review_voxel: 0.05,
        }
    }
}

/// One recognized configuration key.
#[derive(Debug, Clone, Copy)]
pub struct ConfigKey {
    pub key: &'static str,
    pub help: &'static str,
}

const fn k(key: &'static str, help: &'static str) -> ConfigKey {
    ConfigKey { key, help }
}

pub const CONFIG_KEYS: &[ConfigKey] = &[
    k("seed", "random seed for RANSAC and synthesis"),
    k("ransac.iterations", "RANSAC iterations for the global map"),
    k("ransac.threshold", "RANSAC inlier distance (m)"),
    k("ground.margin", "height above the ground plane removed as ground (m)"),
    k("dbscan.eps", "DBSCAN neighborhood radius (m)"),
    k("dbscan.min_samples", "DBSCAN core-point neighbor count, including the point"),
    k("dbscan.min_cluster_points", "minimum cluster size kept from the global map"),
    k("sparsify.lines", "number of scan lines"),
    k("sparsify.elev_min", "lowest scan-line elevation (deg)"),
    k("sparsify.elev_max", "highest scan-line elevation (deg)"),
    k("sparsify.azimuth_res", "azimuth cell width (deg); 0 derives it from the camera"),
    k("sparsify.max_range", "points beyond this range are dropped (m)"),
    k("baseline.ransac_iterations", "RANSAC iterations per frame for the baseline detector"),
    k("baseline.min_cluster_points", "minimum cluster size per frame for the baseline detector"),
    k("baseline.input", "cloud fed to the baseline detector: sparse or dense"),
    k("tracker.q_x", "process noise variance on x (m² per frame)"),
    k("tracker.q_y", "process noise variance on y (m² per frame)"),
    k("tracker.q_w", "process noise variance on diameter (m² per frame)"),
    k("tracker.r_x", "measurement noise variance on x (m²)"),
    k("tracker.r_y", "measurement noise variance on y (m²)"),
    k("tracker.r_w", "measurement noise variance on diameter (m²)"),
    k("tracker.gate_prob", "chi-square validation gate probability"),
    k("tracker.min_hits", "associated measurements needed to confirm a track"),
    k("tracker.max_age", "update-free frames before a track is deleted"),
    k("tracker.fov_exit_frames", "consecutive out-of-view frames before a track is deleted"),
    k("tracker.max_range", "tracks farther than this are out of view (m)"),
    k("eval.cutoff", "maximum BEV match distance (m)"),
    k("eval.bin_width", "range bin width (m)"),
    k("eval.max_range", "upper edge of the last range bin (m)"),
    k("camera.fx", "focal length x (px)"),
    k("camera.fy", "focal length y (px)"),
    k("camera.cx", "principal point x (px)"),
    k("camera.cy", "principal point y (px)"),
    k("camera.width", "image width (px)"),
    k("camera.height", "image height (px)"),
    k("review.voxel", "default preview voxel size for the review service (m)"),
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, DatasetError> {
    value
        .parse::<T>()
        .map_err(|_| DatasetError::Config(format!("{key}: cannot parse '{value}'")))
}

fn float(key: &str, value: &str) -> Result<f64, DatasetError> {
    let v: f64 = num(key, value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(DatasetError::Config(format!("{key}: value must be finite")))
    }
}

impl RunConfig {
    /// Sets one key from its textual value. Does not validate ranges.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DatasetError> {
        let value = value.trim();
        let value = value.strip_prefix('"').and_then(|v| v.strip_suffix('"')).unwrap_or(value);
        let cam = &mut self.camera.intrinsics;
        match key {
            "seed" => self.seed = num(key, value)?,
            "ransac.iterations" => self.ransac.iterations = num(key, value)?,
            "ransac.threshold" => self.ransac.threshold = float(key, value)?,
            "ground.margin" => self.ground.margin = float(key, value)?,
            "dbscan.eps" => self.dbscan.eps = float(key, value)?,
            "dbscan.min_samples" => self.dbscan.min_samples = num(key, value)?,
            "dbscan.min_cluster_points" => self.dbscan.min_cluster_points = num(key, value)?,
            "sparsify.lines" => self.sparsify.lines = num(key, value)?,
            "sparsify.elev_min" => self.sparsify.elev_min = float(key, value)?,
            "sparsify.elev_max" => self.sparsify.elev_max = float(key, value)?,
            "sparsify.azimuth_res" => self.sparsify.azimuth_res = float(key, value)?,
            "sparsify.max_range" => self.sparsify.max_range = float(key, value)?,
            "baseline.ransac_iterations" => self.baseline.ransac_iterations = num(key, value)?,
            "baseline.min_cluster_points" => self.baseline.min_cluster_points = num(key, value)?,
            "baseline.input" => {
                self.baseline.input = match value {
                    "sparse" => BaselineInput::Sparse,
                    "dense" => BaselineInput::Dense,
                    _ => return Err(DatasetError::Config(format!("{key}: expected 'sparse' or 'dense'"))),
                }
            }
            "tracker.q_x" => self.tracker.q[0] = float(key, value)?,
            "tracker.q_y" => self.tracker.q[1] = float(key, value)?,
            "tracker.q_w" => self.tracker.q[2] = float(key, value)?,
            "tracker.r_x" => self.tracker.r[0] = float(key, value)?,
            "tracker.r_y" => self.tracker.r[1] = float(key, value)?,
            "tracker.r_w" => self.tracker.r[2] = float(key, value)?,
            "tracker.gate_prob" => self.tracker.gate_prob = float(key, value)?,
            "tracker.min_hits" => self.tracker.min_hits = num(key, value)?,
            "tracker.max_age" => self.tracker.max_age = num(key, value)?,
            "tracker.fov_exit_frames" => self.tracker.fov_exit_frames = num(key, value)?,
            "tracker.max_range" => self.tracker.max_range = float(key, value)?,
            "eval.cutoff" => self.eval.cutoff = float(key, value)?,
            "eval.bin_width" => self.eval.bin_width = float(key, value)?,
            "eval.max_range" => self.eval.max_range = float(key, value)?,
            "camera.fx" => cam.fx = float(key, value)?,
            "camera.fy" => cam.fy = float(key, value)?,
            "camera.cx" => cam.cx = float(key, value)?,
            "camera.cy" => cam.cy = float(key, value)?,
            "camera.width" => cam.width = num(key, value)?,
            "camera.height" => cam.height = num(key, value)?,
            "review.voxel" => self.review_voxel = float(key, value)?,
            _ => return Err(DatasetError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Range checks on every value.
    pub fn validate(&self) -> Result<(), DatasetError> {
        fn check(ok: bool, msg: &str) -> Result<(), DatasetError> {
            if ok {
                Ok(())
            } else {
                Err(DatasetError::Config(msg.to_string()))
            }
        }
        check(self.ransac.iterations >= 1, "ransac.iterations must be >= 1")?;
        check(self.ransac.threshold > 0.0, "ransac.threshold must be > 0")?;
        check(self.ground.margin > 0.0, "ground.margin must be > 0")?;
        check(self.dbscan.eps > 0.0, "dbscan.eps must be > 0")?;
        check(self.dbscan.min_samples >= 1, "dbscan.min_samples must be >= 1")?;
        check(self.dbscan.min_cluster_points >= 1, "dbscan.min_cluster_points must be >= 1")?;
        let s = &self.sparsify;
        check(s.lines >= 1, "sparsify.lines must be >= 1")?;
        check(s.elev_min >= -90.0 && s.elev_max <= 90.0, "sparsify elevations must lie in [-90, 90]")?;
        check(s.elev_min < s.elev_max, "sparsify.elev_min must be < sparsify.elev_max")?;
        check(s.azimuth_res >= 0.0, "sparsify.azimuth_res must be >= 0")?;
        check(s.max_range > 0.0, "sparsify.max_range must be > 0")?;
        check(self.baseline.ransac_iterations >= 1, "baseline.ransac_iterations must be >= 1")?;
        check(self.baseline.min_cluster_points >= 1, "baseline.min_cluster_points must be >= 1")?;
        let t = &self.tracker;
        check(t.q.iter().all(|&q| q >= 0.0), "tracker.q_* must be >= 0")?;
        check(t.r.iter().all(|&r| r > 0.0), "tracker.r_* must be > 0")?;
        check(t.gate_prob > 0.0 && t.gate_prob < 1.0, "tracker.gate_prob must lie in (0, 1)")?;
        check(t.min_hits >= 1, "tracker.min_hits must be >= 1")?;
        check(t.max_age >= 1, "tracker.max_age must be >= 1")?;
        check(t.fov_exit_frames >= 1, "tracker.fov_exit_frames must be >= 1")?;
        check(t.max_range > 0.0, "tracker.max_range must be > 0")?;
        check(self.eval.cutoff > 0.0, "eval.cutoff must be > 0")?;
        check(self.eval.bin_width > 0.0, "eval.bin_width must be > 0")?;
        check(self.eval.max_range >= self.eval.bin_width, "eval.max_range must be >= eval.bin_width")?;
        check(self.review_voxel > 0.0, "review.voxel must be > 0")?;
        self.camera
            .intrinsics
            .validate()
            .map_err(|e| DatasetError::Config(format!("camera: {e}")))
    }

    /// Renders every key, grouped by section. `parse_config` reads it back.
    pub fn to_text(&self) -> String {
        let t = &self.tracker;
        let c = &self.camera.intrinsics;
        let input = match self.baseline.input {
            BaselineInput::Sparse => "sparse",
            BaselineInput::Dense => "dense",
        };
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "seed = {}", self.seed).unwrap();
        writeln!(w, "\n[ransac]\niterations = {}\nthreshold = {}", self.ransac.iterations, self.ransac.threshold).unwrap();
        writeln!(w, "\n[ground]\nmargin = {}", self.ground.margin).unwrap();
        writeln!(
            w,
            "\n[dbscan]\neps = {}\nmin_samples = {}\nmin_cluster_points = {}",
            self.dbscan.eps, self.dbscan.min_samples, self.dbscan.min_cluster_points
        )
        .unwrap();
        let s = &self.sparsify;
        writeln!(
            w,
            "\n[sparsify]\nlines = {}\nelev_min = {}\nelev_max = {}\nazimuth_res = {}\nmax_range = {}",
            s.lines, s.elev_min, s.elev_max, s.azimuth_res, s.max_range
        )
        .unwrap();
        writeln!(
            w,
            "\n[baseline]\nransac_iterations = {}\nmin_cluster_points = {}\ninput = {}",
            self.baseline.ransac_iterations, self.baseline.min_cluster_points, input
        )
        .unwrap();
        writeln!(
            w,
            "\n[tracker]\nq_x = {}\nq_y = {}\nq_w = {}\nr_x = {}\nr_y = {}\nr_w = {}\ngate_prob = {}\nmin_hits = {}\nmax_age = {}\nfov_exit_frames = {}\nmax_range = {}",
            t.q[0], t.q[1], t.q[2], t.r[0], t.r[1], t.r[2], t.gate_prob, t.min_hits, t.max_age, t.fov_exit_frames, t.max_range
        )
        .unwrap();
        writeln!(
            w,
            "\n[eval]\ncutoff = {}\nbin_width = {}\nmax_range = {}",
            self.eval.cutoff, self.eval.bin_width, self.eval.max_range
        )
        .unwrap();
        writeln!(
            w,
            "\n[camera]\nfx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}",
            c.fx, c.fy, c.cx, c.cy, c.width, c.height
        )
        .unwrap();
        writeln!(w, "\n[review]\nvoxel = {}", self.review_voxel).unwrap();
        out
    }
}

/// Parses configuration text on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, DatasetError> {
    let mut cfg = RunConfig::default();
    merge_config(&mut cfg, text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies every key in `text` to `cfg` without validating the result.
pub fn merge_config(cfg: &mut RunConfig, text: &str) -> Result<(), DatasetError> {
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            section = (!name.is_empty()).then(|| name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| DatasetError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim();
        let full = match &section {
            Some(s) if !key.contains('.') => format!("{s}.{key}"),
            _ => key.to_string(),
        };
        cfg.set(&full, value)?;
    }
    Ok(())
}

pub fn read_config(path: &Path) -> Result<RunConfig, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.dbscan.eps, 0.1);
        assert_eq!(cfg.dbscan.min_samples, 10);
        assert_eq!(cfg.dbscan.min_cluster_points, 2000);
        assert_eq!(cfg.ransac.iterations, 1000);
        assert_eq!(cfg.ground.margin, 0.5);
        assert_eq!(cfg.baseline.ransac_iterations, 50);
        assert_eq!(cfg.sparsify.lines, 128);
        assert_eq!((cfg.sparsify.elev_min, cfg.sparsify.elev_max), (-35.0, 35.0));
        assert_eq!(cfg.sparsify.max_range, 15.0);
        assert_eq!(cfg.tracker.min_hits, 3);
        assert_eq!(cfg.tracker.max_age, 100);
        assert_eq!(cfg.tracker.gate_prob, 0.95);
        assert_eq!(cfg.eval.cutoff, 1.0);
    }

    #[test]
    fn dotted_and_sectioned_keys() {
        let cfg = parse_config("tracker.min_hits = 3\n[dbscan]\neps = 0.2 # wider\n").unwrap();
        assert_eq!(cfg.tracker.min_hits, 3);
        assert_eq!(cfg.dbscan.eps, 0.2);
        let cfg = parse_config("[tracker]\nmin_hits = 5\n").unwrap();
        assert_eq!(cfg.tracker.min_hits, 5);
    }

    #[test]
    fn rejects_out_of_range_and_unknown() {
        for bad in [
            "dbscan.eps = -1",
            "tracker.min_hits = 0",
            "tracker.gate_prob = 1.0",
            "bogus = 1",
            "[dbscan]\nepsilon = 0.1",
            "dbscan.eps",
            "dbscan.min_samples = 2.5",
            "baseline.input = both",
            "sparsify.elev_min = 40",
        ] {
            assert!(matches!(parse_config(bad), Err(DatasetError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 42;
        cfg.tracker.q = [1e-3, 2e-3, 3e-6];
        cfg.baseline.input = BaselineInput::Dense;
        cfg.camera.intrinsics = CameraIntrinsics::from_fov(640, 360, 110.0, 70.0);
        assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn every_listed_key_is_settable() {
        let defaults = RunConfig::default();
        let text = defaults.to_text();
        for key in CONFIG_KEYS {
            let mut cfg = RunConfig::default();
            let (section, name) = key.key.split_once('.').unwrap_or(("", key.key));
            // pull the default value out of the rendered text
            let mut current = "";
            let value = text
                .lines()
                .find_map(|l| {
                    if let Some(s) = l.strip_prefix('[') {
                        current = s.trim_end_matches(']');
                        return None;
                    }
                    let (k, v) = l.split_once('=')?;
                    (current == section && k.trim() == name).then(|| v.trim().to_string())
                })
                .unwrap_or_else(|| panic!("{} not rendered", key.key));
            cfg.set(key.key, &value).unwrap();
            assert_eq!(cfg, defaults, "{}", key.key);
        }
    }
}
