use serde::Serialize;

use super::{GroupPriors, ThetaPair};

/// Set of scores a classifier accepts within one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum AcceptRegion {
    All,
    Nothing,
    AtLeast(f64),
    AtMost(f64),
    /// Scores in the closed interval.
    Between(f64, f64),
}

impl AcceptRegion {
    pub fn contains(self, eta: f64) -> bool {
        match self {
            AcceptRegion::All => true,
            AcceptRegion::Nothing => false,
            AcceptRegion::AtLeast(t) => eta >= t,
            AcceptRegion::AtMost(t) => eta <= t,
            AcceptRegion::Between(a, b) => a <= eta && eta <= b,
        }
    }
}

/// A rule `g(x, s)` that looks at `x` only through the score `eta(x, s)`.
pub trait Classifier {
    fn decide(&self, eta: f64, s: usize) -> bool;

    /// The accepted scores of group `s`, as a region.
    fn region(&self, s: usize) -> AcceptRegion;
}

/// A fixed region for one group, used where the recalibrated statistic of
/// that group does not depend on the score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinnedGroup {
    pub group: usize,
    pub region: AcceptRegion,
}

/// Recalibrated Bayes rule; `theta = (0, 0)` is the Bayes rule itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecalibratedClassifier {
    pub priors: GroupPriors,
    pub theta: ThetaPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pinned: Option<PinnedGroup>,
}

impl RecalibratedClassifier {
    /// The acceptance condition is `1 <= b + k eta`; returns `(b, k)`.
    fn affine(&self, s: usize) -> (f64, f64) {
        let j = &self.priors.joint;
        let ThetaPair { theta0, theta1 } = self.theta;
        let (a, b) = if s == 1 {
            (-theta1 / j[1][1], theta0 / j[0][1])
        } else {
            (theta1 / j[1][0], -theta0 / j[0][0])
        };
        (b, 2.0 + a - b)
    }

    /// The right-hand side of the acceptance inequality at score `eta`.
    pub fn statistic(&self, eta: f64, s: usize) -> f64 {
        let j = &self.priors.joint;
        let ThetaPair { theta0, theta1 } = self.theta;
        if s == 1 {
            2.0 * eta - theta1 * eta / j[1][1] + theta0 * (1.0 - eta) / j[0][1]
        } else {
            2.0 * eta + theta1 * eta / j[1][0] - theta0 * (1.0 - eta) / j[0][0]
        }
    }
}

impl RecalibratedClassifier {
    fn pinned_region(&self, s: usize) -> Option<AcceptRegion> {
        self.pinned.filter(|p| p.group == s).map(|p| p.region)
    }
}

impl Classifier for RecalibratedClassifier {
    fn decide(&self, eta: f64, s: usize) -> bool {
        match self.pinned_region(s) {
            Some(region) => region.contains(eta),
            None => 1.0 <= self.statistic(eta, s),
        }
    }

    fn region(&self, s: usize) -> AcceptRegion {
        if let Some(region) = self.pinned_region(s) {
            return region;
        }
        let (b, k) = self.affine(s);
        if k > 0.0 {
            AcceptRegion::AtLeast((1.0 - b) / k)
        } else if k < 0.0 {
            AcceptRegion::AtMost((1.0 - b) / k)
        } else if b >= 1.0 {
            AcceptRegion::All
        } else {
            AcceptRegion::Nothing
        }
    }
}

/// `g(x, s) = 1{eta(x, s) >= 1/2}`
pub fn bayes_classifier(priors: GroupPriors) -> RecalibratedClassifier {
    recalibrated_classifier(priors, ThetaPair::default())
}

pub fn recalibrated_classifier(priors: GroupPriors, theta: ThetaPair) -> RecalibratedClassifier {
    RecalibratedClassifier {
        priors,
        theta,
        pinned: None,
    }
}
