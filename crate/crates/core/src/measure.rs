//! Weighted empirical measures on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A discrete probability measure with sorted, distinct support points.
///
/// Quantiles use the left-continuous generalized inverse of the CDF:
/// `Q(p)` is the smallest support point whose cumulative weight is `>= p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct EmpiricalMeasure1D {
    points: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    /// `first_moment[k]` = sum over atoms `0..=k` of point * weight.
    first_moment: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure> for EmpiricalMeasure1D {
    type Error = Error;

    fn try_from(raw: RawMeasure) -> Result<Self> {
        Self::from_weighted(&raw.points, &raw.weights)
    }
}

impl From<EmpiricalMeasure1D> for RawMeasure {
    fn from(m: EmpiricalMeasure1D) -> Self {
        RawMeasure {
            points: m.points,
            weights: m.weights,
        }
    }
}

impl EmpiricalMeasure1D {
    /// Uniform weights over `samples`; ties are merged into one atom.
    ///
    /// Cumulative weights are formed as `count / n` so that they are the
    /// correctly rounded values of the exact rationals.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empirical measure needs at least one sample"));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut points = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for x in sorted {
            match points.last() {
                Some(&last) if last == x => *counts.last_mut().unwrap() += 1,
                _ => {
                    points.push(x);
                    counts.push(1);
                }
            }
        }
        let mut running = 0usize;
        let mut cumulative = Vec::with_capacity(points.len());
        for &c in &counts {
            running += c;
            cumulative.push(running as f64 / n);
        }
        let weights = counts.iter().map(|&c| c as f64 / n).collect();
        Ok(Self::assemble(points, weights, cumulative))
    }

    /// Arbitrary positive weights; they are normalized to sum to one.
    pub fn from_weighted(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("support points must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("weights must be positive and finite"));
        }
        let mut pairs: Vec<(f64, f64)> = points.iter().copied().zip(weights.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();

        let mut merged_points = Vec::with_capacity(pairs.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (x, w) in pairs {
            match merged_points.last() {
                Some(&last) if last == x => *merged_weights.last_mut().unwrap() += w,
                _ => {
                    merged_points.push(x);
                    merged_weights.push(w);
                }
            }
        }
        let weights: Vec<f64> = merged_weights.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut running = 0.0;
        for w in &merged_weights {
            running += w;
            cumulative.push(running / total);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self::assemble(merged_points, weights, cumulative))
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::from_weighted(&[x], &[1.0])
    }

    fn assemble(points: Vec<f64>, weights: Vec<f64>, mut cumulative: Vec<f64>) -> Self {
        // Monotone even under rounding.
        for k in 1..cumulative.len() {
            if cumulative[k] < cumulative[k - 1] {
                cumulative[k] = cumulative[k - 1];
            }
        }
        let mut first_moment = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        for (x, w) in points.iter().zip(&weights) {
            acc += x * w;
            first_moment.push(acc);
        }
        Self {
            points,
            weights,
            cumulative,
            first_moment,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `F(x_k)` for each support point.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> f64 {
        *self.first_moment.last().unwrap()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    /// Index of the atom carrying the quantile level `p`.
    fn quantile_index(&self, p: f64) -> usize {
        self.cumulative.partition_point(|&c| c < p).min(self.points.len() - 1)
    }

    /// Left-continuous quantile; `p` must lie in `[0, 1]`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("quantile level {p} outside [0, 1]")));
        }
        Ok(self.points[self.quantile_index(p)])
    }

    /// `\int_0^t Q(u) du` for `t` in `[0, 1]`, exact for the step quantile.
    pub fn quantile_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.quantile_index(t.min(1.0));
        let before_mass = if k == 0 { 0.0 } else { self.cumulative[k - 1] };
        let before = if k == 0 { 0.0 } else { self.first_moment[k - 1] };
        before + (t.min(1.0) - before_mass) * self.points[k]
    }

    /// Mean of `Q` over `(a, b]`, with `a < b`.
    pub fn quantile_average(&self, a: f64, b: f64) -> f64 {
        (self.quantile_integral(b) - self.quantile_integral(a)) / (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn point_mass_quantile() {
        let m = EmpiricalMeasure1D::dirac(3.0).unwrap();
        for p in [0.0, 0.2, 0.5, 1.0] {
            assert_eq!(m.quantile(p).unwrap(), 3.0);
        }
    }

    #[test]
    fn uniform_four_points_median() {
        let m = EmpiricalMeasure1D::from_samples(&[4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(m.quantile(0.5).unwrap(), 2.0);
        assert_eq!(m.quantile(0.0).unwrap(), 1.0);
        assert_eq!(m.quantile(0.51).unwrap(), 3.0);
        assert_eq!(m.quantile(1.0).unwrap(), 4.0);
        assert!(m.quantile(1.5).is_err());
    }

    #[test]
    fn ties_merge_into_atoms() {
        let m = EmpiricalMeasure1D::from_samples(&[1.0, 1.0, 2.0, 1.0]).unwrap();
        assert_eq!(m.points(), &[1.0, 2.0]);
        assert_eq!(m.weights(), &[0.75, 0.25]);
        let w = EmpiricalMeasure1D::from_weighted(&[2.0, 1.0, 2.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(w.points(), &[1.0, 2.0]);
        assert_eq!(w.cumulative(), &[0.5, 1.0]);
    }

    #[test]
    fn quantile_integral_matches_mean() {
        let m = EmpiricalMeasure1D::from_samples(&[0.0, 1.0, 5.0, 10.0]).unwrap();
        assert!((m.quantile_integral(1.0) - 4.0).abs() < 1e-15);
        assert!((m.quantile_integral(0.5) - 0.25).abs() < 1e-15);
        assert!((m.quantile_average(0.25, 0.75) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_weights() {
        assert!(EmpiricalMeasure1D::from_weighted(&[1.0], &[0.0]).is_err());
        assert!(EmpiricalMeasure1D::from_weighted(&[1.0, 2.0], &[1.0]).is_err());
        assert!(EmpiricalMeasure1D::from_samples(&[]).is_err());
    }

    proptest! {
        #[test]
        fn quantile_is_monotone_and_inverts_cdf(
            samples in prop::collection::vec(-100.0f64..100.0, 1..60),
            mut levels in prop::collection::vec(0.0f64..=1.0, 2..20),
        ) {
            let m = EmpiricalMeasure1D::from_samples(&samples).unwrap();
            levels.sort_by(f64::total_cmp);
            let q: Vec<f64> = levels.iter().map(|&p| m.quantile(p).unwrap()).collect();
            for w in q.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            for (&p, &x) in levels.iter().zip(&q) {
                prop_assert!(m.cdf(x) >= p);
            }
            let total: f64 = m.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
