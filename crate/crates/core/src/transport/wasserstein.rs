use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure1D;

/// Squared Wasserstein-2 distance, `\int_0^1 (Q_P(t) - Q_Q(t))^2 dt`.
///
/// Both quantile functions are step functions, so the integral is a finite
/// sum over the merged cumulative breakpoints and is exact up to rounding.
pub fn wasserstein2_1d(p: &EmpiricalMeasure1D, q: &EmpiricalMeasure1D) -> f64 {
    let (xp, cp) = (p.points(), p.cumulative());
    let (xq, cq) = (q.points(), q.cumulative());
    let (mut i, mut j) = (0, 0);
    let mut t = 0.0;
    let mut total = 0.0;
    while i < xp.len() && j < xq.len() {
        let next = cp[i].min(cq[j]);
        let d = xp[i] - xq[j];
        total += (next - t) * d * d;
        t = next;
        if cp[i] <= next {
            i += 1;
        }
        if cq[j] <= next {
            j += 1;
        }
    }
    total
}

/// Weighted Wasserstein-2 barycenter of one-dimensional measures.
///
/// The barycenter quantile is `sum_s pi_s Q_s`, evaluated on the union of all
/// cumulative breakpoints, where it is constant between consecutive breakpoints.
pub fn barycenter_1d(measures: &[EmpiricalMeasure1D], weights: &[f64]) -> Result<EmpiricalMeasure1D> {
    if measures.is_empty() {
        return Err(Error::invalid("barycenter of an empty family"));
    }
    check_weights(weights, measures.len())?;

    let mut breaks: Vec<f64> = measures.iter().flat_map(|m| m.cumulative().iter().copied()).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut cursor = vec![0usize; measures.len()];
    let mut points = Vec::with_capacity(breaks.len());
    let mut masses = Vec::with_capacity(breaks.len());
    let mut t = 0.0;
    for &b in &breaks {
        if b <= t {
            continue;
        }
        let mut x = 0.0;
        for ((m, c), &w) in measures.iter().zip(cursor.iter_mut()).zip(weights) {
            // atom of m carrying the interval (t, b]
            while *c + 1 < m.len() && m.cumulative()[*c] <= t {
                *c += 1;
            }
            x += w * m.points()[*c];
        }
        points.push(x);
        masses.push(b - t);
        t = b;
    }
    EmpiricalMeasure1D::from_weighted(&points, &masses)
}

/// `sum_s pi_s W2^2(mu_s, nu)`
pub fn barycenter_objective(measures: &[EmpiricalMeasure1D], weights: &[f64], nu: &EmpiricalMeasure1D) -> f64 {
    measures
        .iter()
        .zip(weights)
        .map(|(m, w)| w * wasserstein2_1d(m, nu))
        .sum()
}

pub(crate) fn check_weights(weights: &[f64], n: usize) -> Result<()> {
    if weights.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("group weights must be positive"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("group weights sum to {total}, not 1")));
    }
    Ok(())
}
