use num_traits::{Num, Signed};
use serde::Serialize;

use crate::error::{Error, Result};

/// Total variation between two discrete laws of a feature, and the best
/// balanced error any classifier can reach when predicting the group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvBer<T> {
    pub tv: T,
    pub min_ber: T,
    /// Per-cell decision of a minimizing classifier: `1` where group 1 is
    /// strictly more likely.
    pub classifier: Vec<u8>,
}

/// `tv = 1/2 sum |p0 - p1|` and `min_ber = (1 - tv) / 2` on a shared finite support.
///
/// Generic so that exact rationals can be used.
pub fn tv_ber_relation<T>(mu0: &[T], mu1: &[T]) -> Result<TvBer<T>>
where
    T: Num + Signed + PartialOrd + Clone,
{
    if mu0.len() != mu1.len() {
        return Err(Error::LengthMismatch {
            expected: mu0.len(),
            found: mu1.len(),
        });
    }
    if mu0.is_empty() {
        return Err(Error::invalid("empty support"));
    }
    if mu0.iter().chain(mu1).any(|p| p.is_negative()) {
        return Err(Error::invalid("probabilities must be nonnegative"));
    }
    let two = T::one() + T::one();
    let mut abs_sum = T::zero();
    let mut ber = T::zero();
    let mut classifier = Vec::with_capacity(mu0.len());
    for (p0, p1) in mu0.iter().zip(mu1) {
        abs_sum = abs_sum + (p0.clone() - p1.clone()).abs();
        // BER(g) = 1/2 [sum_{g=0} p1 + sum_{g=1} p0]: each cell pays the smaller mass
        if p1 > p0 {
            classifier.push(1);
            ber = ber + p0.clone();
        } else {
            classifier.push(0);
            ber = ber + p1.clone();
        }
    }
    Ok(TvBer {
        tv: abs_sum / two.clone(),
        min_ber: ber / two,
        classifier,
    })
}

/// TV between the two groups' empirical laws after binning `values` at the
/// pooled deciles. Ties at a cut point go to the lower bin.
pub fn decile_tv(values: &[f64], groups: &[u8]) -> Result<f64> {
    if values.len() != groups.len() {
        return Err(Error::LengthMismatch {
            expected: values.len(),
            found: groups.len(),
        });
    }
    let n = [0u8, 1].map(|g| groups.iter().filter(|&&s| s == g).count());
    if n.contains(&0) {
        return Err(Error::invalid("both groups must be nonempty"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cuts: Vec<f64> = (1..10)
        .map(|k| sorted[(k * sorted.len()).div_ceil(10).saturating_sub(1)])
        .collect();
    let mut mass = [[0.0; 10]; 2];
    for (&v, &s) in values.iter().zip(groups) {
        let bin = cuts.partition_point(|&c| c < v);
        mass[s as usize][bin] += 1.0 / n[s as usize] as f64;
    }
    Ok(tv_ber_relation(&mass[0], &mass[1])?.tv)
}
