use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{up_vector, SegmentationError};
use crate::geometry::PointCloud;

/// Plane `{p : normal · p = offset}` with `normal` pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
    /// Inliers of the winning RANSAC hypothesis.
    pub inlier_count: usize,
}

impl Plane {
    #[inline]
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    fn through(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<(Vector3<f64>, f64)> {
        let u = b - a;
        let v = c - a;
        let n = u.cross(&v);
        let norm = n.norm();
        if norm <= 1e-12 * u.norm() * v.norm() || norm == 0.0 {
            return None;
        }
        let n = n / norm;
        Some((n, n.dot(&a.coords)))
    }
}

fn count_inliers(points: &[Point3<f64>], normal: &Vector3<f64>, offset: f64, thresh: f64) -> usize {
    points
        .iter()
        .filter(|p| (normal.dot(&p.coords) - offset).abs() <= thresh)
        .count()
}

/// Total-least-squares plane through `points`.
fn least_squares_plane(points: &[Point3<f64>]) -> Option<(Vector3<f64>, f64)> {
    let n = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    // With fewer than two spread directions the smallest eigenvector is ambiguous.
    let mut sorted: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    if sorted[1] <= 1e-12 * sorted[2].max(f64::MIN_POSITIVE) {
        return None;
    }
    let normal = eig.eigenvectors.column(imin).normalize();
    Some((normal, normal.dot(&centroid)))
}

/// Fits the dominant plane with RANSAC, then refits it once by least squares
/// over the winning hypothesis' inliers. The normal is oriented to the frame's
/// up direction. Hypotheses are drawn sequentially from `seed`; scoring runs in
/// parallel and ties go to the earliest hypothesis, so the result does not
/// depend on thread count.
pub fn ransac_ground_plane(
    cloud: &PointCloud,
    n_iters: usize,
    dist_thresh: f64,
    seed: u64,
) -> Result<Plane, SegmentationError> {
    let points = &cloud.points;
    if points.len() < 3 {
        return Err(SegmentationError::InsufficientPoints(points.len()));
    }
    if n_iters == 0 {
        return Err(SegmentationError::InvalidParameter("n_iters must be >= 1"));
    }
    if !(dist_thresh > 0.0) {
        return Err(SegmentationError::InvalidParameter("dist_thresh must be > 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<[usize; 3]> = (0..n_iters)
        .map(|_| {
            let s = rand::seq::index::sample(&mut rng, points.len(), 3);
            [s.index(0), s.index(1), s.index(2)]
        })
        .collect();

    let best = samples
        .par_iter()
        .enumerate()
        .filter_map(|(it, s)| {
            let (n, d) = Plane::through(&points[s[0]], &points[s[1]], &points[s[2]])?;
            Some((count_inliers(points, &n, d, dist_thresh), it, n, d))
        })
        .reduce_with(|a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let (inlier_count, _, mut normal, mut offset) = best.ok_or(SegmentationError::DegenerateInput)?;

    let inliers: Vec<Point3<f64>> = points
        .iter()
        .filter(|p| (normal.dot(&p.coords) - offset).abs() <= dist_thresh)
        .copied()
        .collect();
    if let Some((n, d)) = least_squares_plane(&inliers) {
        normal = n;
        offset = d;
    }
    if normal.dot(&up_vector(cloud.frame)) < 0.0 {
        normal = -normal;
        offset = -offset;
    }
    Ok(Plane { normal, offset, inlier_count })
}
