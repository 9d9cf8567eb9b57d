//! Scan-line sparsification of dense camera-frame clouds.
//!
//! Each point gets an elevation `atan2(-y, hypot(x, z))` and an azimuth
//! `atan2(x, z)`. Points are binned into (scan line, azimuth cell) and the
//! closest point of each occupied cell survives, like a lidar first return.

use std::collections::HashMap;

use crate::geometry::{CameraIntrinsics, PointCloud};
use crate::io::SparsifyConfig;

/// Azimuth cells across the horizontal field of view when no explicit
/// resolution is configured.
pub const DEFAULT_AZIMUTH_CELLS: f64 = 512.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyParams {
    pub n_lines: usize,
    /// Degrees.
    pub elev_min: f64,
    /// Degrees.
    pub elev_max: f64,
    /// Degrees.
    pub azimuth_res: f64,
    /// Meters.
    pub max_range: f64,
}

impl SparsifyParams {
    /// 128 lines over ±35°, 15 m range, azimuth cells spanning the camera's
    /// horizontal FOV in [`DEFAULT_AZIMUTH_CELLS`] steps.
    pub fn for_camera(intrinsics: &CameraIntrinsics) -> Self {
        Self {
            n_lines: 128,
            elev_min: -35.0,
            elev_max: 35.0,
            azimuth_res: intrinsics.h_fov() / DEFAULT_AZIMUTH_CELLS,
            max_range: 15.0,
        }
    }

    pub fn from_config(cfg: &SparsifyConfig, intrinsics: &CameraIntrinsics) -> Self {
        Self {
            n_lines: cfg.lines,
            elev_min: cfg.elev_min,
            elev_max: cfg.elev_max,
            azimuth_res: if cfg.azimuth_res > 0.0 {
                cfg.azimuth_res
            } else {
                intrinsics.h_fov() / DEFAULT_AZIMUTH_CELLS
            },
            max_range: cfg.max_range,
        }
    }

    /// Angular distance between neighbouring line centers (degrees).
    pub fn line_spacing(&self) -> f64 {
        if self.n_lines > 1 {
            (self.elev_max - self.elev_min) / (self.n_lines - 1) as f64
        } else {
            self.elev_max - self.elev_min
        }
    }

    /// Elevation of a line center (degrees).
    pub fn line_center(&self, line: usize) -> f64 {
        if self.n_lines > 1 {
            self.elev_min + line as f64 * self.line_spacing()
        } else {
            0.5 * (self.elev_min + self.elev_max)
        }
    }

    /// Nearest line for an elevation inside `[elev_min, elev_max]`.
    pub fn line_of(&self, elev_deg: f64) -> usize {
        if self.n_lines == 1 {
            return 0;
        }
        let l = ((elev_deg - self.elev_min) / self.line_spacing()).round();
        (l.max(0.0) as usize).min(self.n_lines - 1)
    }
}

/// Elevation and azimuth of a camera-frame point, in degrees.
#[inline]
pub fn angles(p: &nalgebra::Point3<f64>) -> (f64, f64) {
    let elev = (-p.y).atan2(p.x.hypot(p.z)).to_degrees();
    let azim = p.x.atan2(p.z).to_degrees();
    (elev, azim)
}

/// Indices of the surviving points, ascending.
pub fn sparsify_indices(cloud: &PointCloud, params: &SparsifyParams) -> Vec<usize> {
    let mut best: HashMap<(usize, i64), (f64, usize)> = HashMap::new();
    for (i, p) in cloud.points.iter().enumerate() {
        let range = p.coords.norm();
        if range > params.max_range {
            continue;
        }
        let (elev, azim) = angles(p);
        if elev < params.elev_min || elev > params.elev_max {
            continue;
        }
        let cell = (params.line_of(elev), (azim / params.azimuth_res).floor() as i64);
        best.entry(cell)
            .and_modify(|b| {
                if range < b.0 {
                    *b = (range, i);
                }
            })
            .or_insert((range, i));
    }
    let mut kept: Vec<usize> = best.into_values().map(|(_, i)| i).collect();
    kept.sort_unstable();
    kept
}

/// Keeps one point per occupied (line, azimuth) cell: the closest one, ties
/// to the lowest input index. Output preserves input order.
pub fn sparsify(cloud: &PointCloud, params: &SparsifyParams) -> PointCloud {
    cloud.select(&sparsify_indices(cloud, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use nalgebra::Point3;
    use proptest::prelude::*;

    fn params() -> SparsifyParams {
        SparsifyParams::for_camera(&CameraIntrinsics::zed2_720p())
    }

    fn cam(points: Vec<Point3<f64>>) -> PointCloud {
        PointCloud::new(points, Frame::Camera(0))
    }

    #[test]
    fn level_point_in_range_is_kept() {
        let out = sparsify(&cam(vec![Point3::new(0.0, 0.0, 5.0)]), &params());
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn points_above_fov_are_dropped() {
        let t = 40f64.to_radians().tan();
        let pts = (0..20).map(|i| Point3::new(0.1 * i as f64, -t * (5.0f64.powi(2) + (0.1 * i as f64).powi(2)).sqrt(), 5.0)).collect();
        let c = cam(pts);
        for p in &c.points {
            assert!((angles(p).0 - 40.0).abs() < 1e-9);
        }
        assert!(sparsify(&c, &params()).is_empty());
    }

    #[test]
    fn range_cutoff() {
        let out = sparsify(&cam(vec![Point3::new(0.0, 0.0, 15.0), Point3::new(0.0, 0.0, 15.01)]), &params());
        assert_eq!(out.points, vec![Point3::new(0.0, 0.0, 15.0)]);
    }

    #[test]
    fn nearest_point_wins_and_ties_keep_first() {
        let c = cam(vec![Point3::new(0.0, 0.0, 6.0), Point3::new(0.0, 0.0, 4.0), Point3::new(0.0, 0.0, 4.0)]);
        assert_eq!(sparsify_indices(&c, &params()), vec![1]);
    }

    #[test]
    fn line_geometry() {
        let p = params();
        assert_eq!(p.line_of(-35.0), 0);
        assert_eq!(p.line_of(35.0), 127);
        assert!((p.line_center(127) - 35.0).abs() < 1e-12);
        assert!((p.azimuth_res - 110.0 / 512.0).abs() < 1e-9);
        let one = SparsifyParams { n_lines: 1, ..p };
        assert_eq!(one.line_of(20.0), 0);
        assert_eq!(one.line_center(0), 0.0);
    }

    fn arb_cloud() -> impl Strategy<Value = PointCloud> {
        proptest::collection::vec((-8.0f64..8.0, -4.0f64..4.0, -2.0f64..20.0), 0..400)
            .prop_map(|v| cam(v.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect()))
    }

    proptest! {
        #[test]
        fn output_is_subset_one_per_cell_and_idempotent(c in arb_cloud()) {
            let p = params();
            let idx = sparsify_indices(&c, &p);
            let out = c.select(&idx);
            let half = p.line_spacing() / 2.0 + 1e-9;
            let mut lines = std::collections::HashSet::new();
            for q in &out.points {
                let (e, _) = angles(q);
                let l = p.line_of(e);
                prop_assert!((e - p.line_center(l)).abs() <= half);
                lines.insert(l);
            }
            prop_assert!(lines.len() <= p.n_lines);
            let twice = sparsify(&out, &p);
            prop_assert_eq!(twice, out.clone());
        }

        #[test]
        fn larger_range_keeps_previous_cells(c in arb_cloud(), r1 in 1.0f64..10.0, extra in 0.0f64..10.0) {
            let near = SparsifyParams { max_range: r1, ..params() };
            let far = SparsifyParams { max_range: r1 + extra, ..params() };
            let cell = |q: &Point3<f64>| { let (e, a) = angles(q); (near.line_of(e), (a / near.azimuth_res).floor() as i64) };
            let far_cells: std::collections::HashSet<_> = sparsify(&c, &far).points.iter().map(cell).collect();
            for q in sparsify(&c, &near).points.iter() {
                prop_assert!(far_cells.contains(&cell(q)));
            }
        }
    }
}
