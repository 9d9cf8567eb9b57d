use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Quantile of the χ² distribution with `dof` degrees of freedom. Pairs with
/// a squared Mahalanobis distance above it fall outside the validation gate.
pub fn chi2_gate_threshold(dof: u32, prob: f64) -> f64 {
    assert!(dof >= 1, "dof must be >= 1");
    assert!(prob > 0.0 && prob < 1.0, "prob must lie in (0, 1)");
    ChiSquared::new(dof as f64)
        .expect("dof >= 1 is a valid χ² parameter")
        .inverse_cdf(prob)
}
