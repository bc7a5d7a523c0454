use serde::Serialize;

use super::wasserstein::{barycenter_1d, check_weights, wasserstein2_1d};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure1D;

/// Upper bounds on the excess risk of a `K`-Lipschitz classifier trained on
/// repaired data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceBound {
    /// `2 sqrt(2) K sqrt(sum_s pi_s W2^2)`, valid for any common target.
    pub generic: f64,
    /// `sqrt(2) K sqrt(sum_s pi_s W2^2)`, the form stated for the barycenter target.
    pub barycenter: f64,
}

/// Both bound forms from per-group squared distances `w2s` to the target.
pub fn classification_price_bound(k: f64, pis: &[f64], w2s: &[f64]) -> Result<PriceBound> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::invalid("Lipschitz constant must be positive"));
    }
    check_weights(pis, w2s.len())?;
    if w2s.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::invalid("squared distances must be nonnegative"));
    }
    let root = pis.iter().zip(w2s).map(|(p, w)| p * w).sum::<f64>().sqrt();
    Ok(PriceBound {
        generic: 2.0 * std::f64::consts::SQRT_2 * k * root,
        barycenter: std::f64::consts::SQRT_2 * k * root,
    })
}

/// Price of statistical parity for regression: `sum_s pi_s W2^2(mu_s, barycenter)`.
pub fn sp_price_regression(measures: &[EmpiricalMeasure1D], pis: &[f64]) -> Result<f64> {
    let bary = barycenter_1d(measures, pis)?;
    Ok(measures
        .iter()
        .zip(pis)
        .map(|(m, p)| p * wasserstein2_1d(m, &bary))
        .sum())
}
