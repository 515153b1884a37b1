//! Standard normal CDF and quantile function.

use statrs::distribution::{ContinuousCDF, Normal};
use std::sync::OnceLock;

fn standard() -> &'static Normal {
    static STD: OnceLock<Normal> = OnceLock::new();
    STD.get_or_init(|| Normal::standard())
}

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "quantile outside (0,1): {p}");
    standard().inverse_cdf(p)
}
