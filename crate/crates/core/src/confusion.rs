//! Per-group confusion counts and the rates derived from them.

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// A ratio of counts that may have an empty denominator.
///
/// Undefined rates are kept distinct from zero so that gap metrics can refuse
/// to compare them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Defined(f64),
    Undefined,
}

impl Rate {
    pub fn ratio(numerator: u64, denominator: u64) -> Self {
        if denominator == 0 {
            Rate::Undefined
        } else {
            Rate::Defined(numerator as f64 / denominator as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Defined(v) => Some(v),
            Rate::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Rate::Defined(_))
    }
}

impl Serialize for Rate {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Rate::Defined(v) => serializer.serialize_f64(*v),
            Rate::Undefined => serializer.serialize_str("undefined"),
        }
    }
}

/// Raw 2x2 confusion counts of one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CellCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn positives(&self) -> u64 {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> u64 {
        self.false_pos + self.true_neg
    }

    pub fn predicted_positive(&self) -> u64 {
        self.true_pos + self.false_pos
    }

    pub fn predicted_negative(&self) -> u64 {
        self.true_neg + self.false_neg
    }

    pub fn errors(&self) -> u64 {
        self.false_pos + self.false_neg
    }

    /// `P(Yhat=1 | Y=1)`
    pub fn tpr(&self) -> Rate {
        Rate::ratio(self.true_pos, self.positives())
    }

    /// `P(Yhat=1 | Y=0)`
    pub fn fpr(&self) -> Rate {
        Rate::ratio(self.false_pos, self.negatives())
    }

    /// `P(Y=1 | Yhat=1)`
    pub fn ppv(&self) -> Rate {
        Rate::ratio(self.true_pos, self.predicted_positive())
    }

    /// `P(Y=0 | Yhat=0)`
    pub fn npv(&self) -> Rate {
        Rate::ratio(self.true_neg, self.predicted_negative())
    }

    /// `P(Y=1)` within the group.
    pub fn base_rate(&self) -> Rate {
        Rate::ratio(self.positives(), self.total())
    }

    /// `P(Yhat=1)` within the group.
    pub fn positive_rate(&self) -> Rate {
        Rate::ratio(self.predicted_positive(), self.total())
    }

    /// `P(Yhat != Y)` within the group.
    pub fn error_rate(&self) -> Rate {
        Rate::ratio(self.errors(), self.total())
    }
}

/// Counts and rates of one sensitive group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub n: u64,
    pub counts: CellCounts,
    pub tpr: Rate,
    pub fpr: Rate,
    pub ppv: Rate,
    pub npv: Rate,
    pub base_rate: Rate,
    pub positive_rate: Rate,
    pub error_rate: Rate,
}

impl From<CellCounts> for GroupStats {
    fn from(counts: CellCounts) -> Self {
        Self {
            n: counts.total(),
            counts,
            tpr: counts.tpr(),
            fpr: counts.fpr(),
            ppv: counts.ppv(),
            npv: counts.npv(),
            base_rate: counts.base_rate(),
            positive_rate: counts.positive_rate(),
            error_rate: counts.error_rate(),
        }
    }
}

impl GroupStats {
    /// `positive_rate - (base_rate * tpr + (1 - base_rate) * fpr)`, when all
    /// three rates are defined. The decomposition holds exactly on counts.
    pub fn success_identity_residual(&self) -> Option<f64> {
        let pi = self.base_rate.value()?;
        let t = self.tpr.value()?;
        let f = self.fpr.value()?;
        let q = self.positive_rate.value()?;
        Some(q - (pi * t + (1.0 - pi) * f))
    }
}

/// Confusion statistics for every sensitive group, indexed by group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupConfusion {
    pub groups: Vec<GroupStats>,
}

impl GroupConfusion {
    pub fn group(&self, s: usize) -> &GroupStats {
        &self.groups[s]
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }
}

fn check_binary(values: &[u8]) -> Result<()> {
    match values.iter().find(|&&v| v > 1) {
        Some(&v) => Err(Error::NonBinaryLabel { value: v as f64 }),
        None => Ok(()),
    }
}

/// Confusion statistics for a binary sensitive attribute (groups 0 and 1).
pub fn confusion_by_group(truth: &[u8], pred: &[u8], sensitive: &[u8]) -> Result<GroupConfusion> {
    check_binary(sensitive)?;
    let groups: Vec<usize> = sensitive.iter().map(|&s| s as usize).collect();
    confusion_by_groups(truth, pred, &groups, 2)
}

/// Confusion statistics for a sensitive attribute with `n_groups` classes.
pub fn confusion_by_groups(truth: &[u8], pred: &[u8], groups: &[usize], n_groups: usize) -> Result<GroupConfusion> {
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for len in [pred.len(), groups.len()] {
        if len != truth.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                found: len,
            });
        }
    }
    check_binary(truth)?;
    check_binary(pred)?;
    if let Some(&g) = groups.iter().find(|&&g| g >= n_groups) {
        return Err(Error::invalid(format!("group index {g} out of range 0..{n_groups}")));
    }

    let mut counts = vec![CellCounts::default(); n_groups];
    for ((&y, &yhat), &g) in truth.iter().zip(pred).zip(groups) {
        let c = &mut counts[g];
        match (y, yhat) {
            (1, 1) => c.true_pos += 1,
            (0, 1) => c.false_pos += 1,
            (0, 0) => c.true_neg += 1,
            _ => c.false_neg += 1,
        }
    }
    Ok(GroupConfusion {
        groups: counts.into_iter().map(GroupStats::from).collect(),
    })
}
