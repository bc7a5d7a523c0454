//! Group-fairness metrics for a binary sensitive attribute.
//!
//! Sign conventions, fixed crate-wide:
//!
//! | metric                      | value                                  |
//! |-----------------------------|----------------------------------------|
//! | statistical parity gap      | `P(Yhat=1|S=1) - P(Yhat=1|S=0)`        |
//! | disparate impact            | `P(Yhat=1|S=0) / P(Yhat=1|S=1)`        |
//! | equalized odds gaps         | `(TPR_1 - TPR_0, FPR_1 - FPR_0)`       |
//! | disparate mistreatment gap  | `P(Yhat!=Y|S=0) - P(Yhat!=Y|S=1)`      |
//! | predictive parity gap       | `PPV_0 - PPV_1`                        |
//! | balance for class `i`       | `E(R|Y=i,S=0) - E(R|Y=i,S=1)`          |
//!
//! Every metric refuses (returns [`Error::UndefinedRate`]) when a rate it
//! needs has an empty denominator.

use serde::Serialize;

use crate::confusion::{GroupConfusion, Rate};
use crate::error::{Error, Result};

/// The four-fifths rule threshold.
pub const LEGAL_DI_THRESHOLD: f64 = 0.8;

fn binary(conf: &GroupConfusion) -> Result<()> {
    if conf.n_groups() != 2 {
        return Err(Error::invalid(format!(
            "binary sensitive attribute required, got {} groups",
            conf.n_groups()
        )));
    }
    Ok(())
}

fn defined(rate: Rate, metric: &'static str, group: usize) -> Result<f64> {
    rate.value().ok_or(Error::UndefinedRate { metric, group })
}

pub fn statistical_parity_gap(conf: &GroupConfusion) -> Result<f64> {
    binary(conf)?;
    let q0 = defined(conf.group(0).positive_rate, "positive rate", 0)?;
    let q1 = defined(conf.group(1).positive_rate, "positive rate", 1)?;
    Ok(q1 - q0)
}

/// Ratio of acceptance rates. Both rates must be positive.
pub fn disparate_impact(conf: &GroupConfusion) -> Result<f64> {
    binary(conf)?;
    let a = defined(conf.group(0).positive_rate, "positive rate", 0)?;
    let b = defined(conf.group(1).positive_rate, "positive rate", 1)?;
    if a <= 0.0 {
        return Err(Error::UndefinedRate {
            metric: "disparate impact (zero acceptance rate)",
            group: 0,
        });
    }
    if b <= 0.0 {
        return Err(Error::UndefinedRate {
            metric: "disparate impact (zero acceptance rate)",
            group: 1,
        });
    }
    Ok(a / b)
}

/// A classifier is free of disparate impact at level `tau` when `DI > tau`.
pub fn free_of_disparate_impact(di: f64, tau: f64) -> bool {
    di > tau
}

/// Denominator group for disparate impact with more than two groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiReference {
    /// The group with the largest acceptance rate.
    #[default]
    MaxRate,
    /// A fixed group index.
    Group(usize),
}

/// `min_s P(Yhat=1|S=s) / P(Yhat=1|S=ref)` over per-group acceptance rates.
pub fn disparate_impact_multiclass(rates: &[f64], reference: DiReference) -> Result<f64> {
    if rates.len() < 2 {
        return Err(Error::invalid("at least two groups are required"));
    }
    if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid("acceptance rates must lie in [0, 1]"));
    }
    let (ref_group, denom) = match reference {
        DiReference::MaxRate => {
            rates.iter().copied().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |best, (g, r)| if r > best.1 { (g, r) } else { best },
            )
        }
        DiReference::Group(g) => (
            g,
            *rates
                .get(g)
                .ok_or_else(|| Error::invalid(format!("reference group {g} out of range")))?,
        ),
    };
    if denom <= 0.0 {
        return Err(Error::UndefinedRate {
            metric: "disparate impact (zero acceptance rate)",
            group: ref_group,
        });
    }
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min / denom)
}

/// `(TPR_1 - TPR_0, FPR_1 - FPR_0)`; the first component is the
/// equal-opportunity gap.
pub fn equalized_odds_gaps(conf: &GroupConfusion) -> Result<(f64, f64)> {
    binary(conf)?;
    let t0 = defined(conf.group(0).tpr, "true positive rate", 0)?;
    let t1 = defined(conf.group(1).tpr, "true positive rate", 1)?;
    let f0 = defined(conf.group(0).fpr, "false positive rate", 0)?;
    let f1 = defined(conf.group(1).fpr, "false positive rate", 1)?;
    Ok((t1 - t0, f1 - f0))
}

pub fn disparate_mistreatment_gap(conf: &GroupConfusion) -> Result<f64> {
    binary(conf)?;
    let e0 = defined(conf.group(0).error_rate, "misclassification rate", 0)?;
    let e1 = defined(conf.group(1).error_rate, "misclassification rate", 1)?;
    Ok(e0 - e1)
}

pub fn predictive_parity_gap(conf: &GroupConfusion) -> Result<f64> {
    binary(conf)?;
    let p0 = defined(conf.group(0).ppv, "positive predictive value", 0)?;
    let p1 = defined(conf.group(1).ppv, "positive predictive value", 1)?;
    Ok(p0 - p1)
}

fn check_lengths(n: usize, others: &[usize]) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    for &len in others {
        if len != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

/// `E(R | Y=class, S=0) - E(R | Y=class, S=1)`.
pub fn balance_for_class(scores: &[f64], truth: &[u8], sensitive: &[u8], class: u8) -> Result<f64> {
    check_lengths(scores.len(), &[truth.len(), sensitive.len()])?;
    let mut sum = [0.0; 2];
    let mut count = [0usize; 2];
    for ((&r, &y), &s) in scores.iter().zip(truth).zip(sensitive) {
        if s > 1 {
            return Err(Error::NonBinaryLabel { value: s as f64 });
        }
        if y == class {
            sum[s as usize] += r;
            count[s as usize] += 1;
        }
    }
    for g in 0..2 {
        if count[g] == 0 {
            return Err(Error::UndefinedRate {
                metric: "class-conditional mean score",
                group: g,
            });
        }
    }
    Ok(sum[0] / count[0] as f64 - sum[1] / count[1] as f64)
}

/// One score bin of a [`CalibrationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub lower: f64,
    pub upper: f64,
    /// Rows per group falling in the bin.
    pub counts: [usize; 2],
    /// Fraction of `Y=1` per group.
    pub positive_fraction: [Rate; 2],
    /// `|fraction - bin midpoint|` per group.
    pub calibration_residual: [Rate; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub bins: Vec<CalibrationBin>,
    /// Largest `|fraction_0 - fraction_1|` over bins where both groups are present.
    pub max_discrepancy: Rate,
    /// Largest well-calibration residual over all nonempty (bin, group) cells.
    pub max_calibration_residual: Rate,
    /// Indices of bins with no rows from at least one group.
    pub skipped_bins: Vec<usize>,
}

/// Per-bin, per-group positive fractions on equal-width bins over `[0, 1]`.
pub fn calibration_report(scores: &[f64], truth: &[u8], sensitive: &[u8], bins: usize) -> Result<CalibrationReport> {
    check_lengths(scores.len(), &[truth.len(), sensitive.len()])?;
    if bins == 0 {
        return Err(Error::invalid("bins must be at least 1"));
    }
    if scores.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::invalid("scores must lie in [0, 1]"));
    }
    let mut counts = vec![[0usize; 2]; bins];
    let mut positives = vec![[0usize; 2]; bins];
    for ((&r, &y), &s) in scores.iter().zip(truth).zip(sensitive) {
        if s > 1 || y > 1 {
            return Err(Error::NonBinaryLabel { value: s.max(y) as f64 });
        }
        let b = ((r * bins as f64) as usize).min(bins - 1);
        counts[b][s as usize] += 1;
        positives[b][s as usize] += y as usize;
    }

    let width = 1.0 / bins as f64;
    let mut out = Vec::with_capacity(bins);
    let mut max_discrepancy: Option<f64> = None;
    let mut max_residual: Option<f64> = None;
    let mut skipped = Vec::new();
    for b in 0..bins {
        let (lower, upper) = (b as f64 * width, (b + 1) as f64 * width);
        let mid = 0.5 * (lower + upper);
        let frac = [0, 1].map(|g| Rate::ratio(positives[b][g] as u64, counts[b][g] as u64));
        let resid = frac.map(|f| match f {
            Rate::Defined(v) => Rate::Defined((v - mid).abs()),
            Rate::Undefined => Rate::Undefined,
        });
        for r in resid.iter().filter_map(|r| r.value()) {
            max_residual = Some(max_residual.map_or(r, |m| m.max(r)));
        }
        match (frac[0].value(), frac[1].value()) {
            (Some(a), Some(c)) => {
                let d = (a - c).abs();
                max_discrepancy = Some(max_discrepancy.map_or(d, |m| m.max(d)));
            }
            _ => skipped.push(b),
        }
        out.push(CalibrationBin {
            lower,
            upper,
            counts: counts[b],
            positive_fraction: frac,
            calibration_residual: resid,
        });
    }
    let to_rate = |v: Option<f64>| v.map_or(Rate::Undefined, Rate::Defined);
    Ok(CalibrationReport {
        bins: out,
        max_discrepancy: to_rate(max_discrepancy),
        max_calibration_residual: to_rate(max_residual),
        skipped_bins: skipped,
    })
}

/// Balanced error rate of `pred_sensitive` as a predictor of `S`:
/// `(P(g=0|S=1) + P(g=1|S=0)) / 2`.
pub fn ber(pred_sensitive: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_lengths(pred_sensitive.len(), &[sensitive.len()])?;
    let mut wrong = [0usize; 2];
    let mut count = [0usize; 2];
    for (&g, &s) in pred_sensitive.iter().zip(sensitive) {
        if g > 1 || s > 1 {
            return Err(Error::NonBinaryLabel { value: g.max(s) as f64 });
        }
        count[s as usize] += 1;
        if g != s {
            wrong[s as usize] += 1;
        }
    }
    for g in 0..2 {
        if count[g] == 0 {
            return Err(Error::UndefinedRate {
                metric: "balanced error rate",
                group: g,
            });
        }
    }
    Ok(0.5 * (wrong[1] as f64 / count[1] as f64 + wrong[0] as f64 / count[0] as f64))
}

/// The level `eps = 1/2 - (a/2)(1/tau - 1)` at which `S` is predictable from
/// the classifier, where `tau` is the classifier's disparate impact and
/// `a = P(Yhat=1 | S=0)`.
pub fn di_predictability_level(conf: &GroupConfusion) -> Result<f64> {
    let tau = disparate_impact(conf)?;
    let a = defined(conf.group(0).positive_rate, "positive rate", 0)?;
    predictability_from_di(a, tau)
}

pub fn predictability_from_di(a: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("disparate impact level must be positive"));
    }
    Ok(0.5 - 0.5 * a * (1.0 / tau - 1.0))
}

/// Inverse of [`predictability_from_di`] in `tau`: `a / (a + 1 - 2 eps)`.
pub fn di_from_predictability(a: f64, eps: f64) -> Result<f64> {
    let denom = a + 1.0 - 2.0 * eps;
    if !(denom > 0.0) {
        return Err(Error::invalid("predictability level out of range"));
    }
    Ok(a / denom)
}
