use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{TrackState, TrackerError};

/// Largest accepted condition number for an innovation covariance.
pub const MAX_CONDITION: f64 = 1e12;

/// Prediction under identity dynamics: the state stays, the covariance grows by `q`.
pub fn predict(track: &mut TrackState, q: &Matrix3<f64>) {
    track.sigma += q;
    track.frames_since_update += 1;
}

/// Residual `d - t` and innovation covariance `Sigma + R` (H = I).
pub fn innovation(track: &TrackState, d: &Vector3<f64>, r: &Matrix3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
    (d - track.t, track.sigma + r)
}

fn check_conditioning(s: &Matrix3<f64>) -> Result<(), TrackerError> {
    let eig = SymmetricEigen::new(*s);
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    if !(min > 0.0) || max / min > MAX_CONDITION {
        let cond = if min > 0.0 { max / min } else { f64::INFINITY };
        return Err(TrackerError::Numerical { cond });
    }
    Ok(())
}

/// Solves `S x = b` for symmetric positive-definite `S`.
fn solve_spd(s: &Matrix3<f64>, b: &Vector3<f64>) -> Result<Vector3<f64>, TrackerError> {
    check_conditioning(s)?;
    let chol = s.cholesky().ok_or(TrackerError::Numerical { cond: f64::INFINITY })?;
    Ok(chol.solve(b))
}

/// Squared Mahalanobis distance `residualᵀ S⁻¹ residual`.
pub fn mahalanobis(residual: &Vector3<f64>, s: &Matrix3<f64>) -> Result<f64, TrackerError> {
    let x = solve_spd(s, residual)?;
    Ok(residual.dot(&x).max(0.0))
}

/// Kalman update with the Joseph-form covariance.
pub fn update(track: &mut TrackState, d: &Vector3<f64>, r: &Matrix3<f64>) -> Result<(), TrackerError> {
    let (residual, s) = innovation(track, d, r);
    check_conditioning(&s)?;
    let chol = s.cholesky().ok_or(TrackerError::Numerical { cond: f64::INFINITY })?;
    // K = Sigma S^-1, and S, Sigma are symmetric, so K^T = S^-1 Sigma.
    let k = chol.solve(&track.sigma).transpose();
    let i_k = Matrix3::identity() - k;
    let sigma = i_k * track.sigma * i_k.transpose() + k * r * k.transpose();
    track.t += k * residual;
    track.t.z = track.t.z.max(0.0);
    track.sigma = 0.5 * (sigma + sigma.transpose());
    track.hits += 1;
    track.frames_since_update = 0;
    Ok(())
}
