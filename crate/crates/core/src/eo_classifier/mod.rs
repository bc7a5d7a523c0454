//! Optimal equality-of-odds classifier by recalibrating the Bayes rule.
//!
//! With `eta(x, s) = P(Y=1 | X=x, S=s)` and joint priors `p_ys = P(Y=y, S=s)`,
//! the optimal classifier under equal TPR and FPR across two groups accepts
//!
//! ```text
//! s = 1:  1 <= 2 eta - theta1 eta / p_11 + theta0 (1 - eta) / p_01
//! s = 0:  1 <= 2 eta + theta1 eta / p_10 - theta0 (1 - eta) / p_00
//! ```
//!
//! for the pair `(theta0, theta1)` that equalizes both rates. `theta = (0, 0)`
//! is the Bayes rule. Everything here depends on `x` only through `eta`, so
//! the distribution of `X | S` enters as the per-group law of `eta`.

mod classifier;
mod law;
mod logistic;
mod solve;

pub use classifier::{
    bayes_classifier, recalibrated_classifier, AcceptRegion, Classifier, PinnedGroup, RecalibratedClassifier,
};
pub use law::{DiscreteLaw, EtaLaw, EtaSample, JitteredAtoms};
pub use logistic::{
    fit_eta_logistic, fit_logistic_group, log_loss, log_loss_gradient, LogisticGroup, LogisticScoreModel,
};
pub use solve::{group_rates, moment_residuals, risk_of, solve_theta, GroupRates, SolveOptions, ThetaSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint law of `(Y, S)`: `joint[y][s] = P(Y=y, S=s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPriors {
    pub joint: [[f64; 2]; 2],
}

impl GroupPriors {
    /// Every cell must lie in `(0, 1)` and the cells must sum to one.
    pub fn new(joint: [[f64; 2]; 2]) -> Result<Self> {
        let cells = joint.iter().flatten();
        if cells.clone().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::invalid("every joint prior P(Y=y, S=s) must lie in (0, 1)"));
        }
        let total: f64 = cells.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("joint priors sum to {total}, not 1")));
        }
        Ok(Self { joint })
    }

    /// From `P(S=1)` and the group base rates `P(Y=1 | S=s)`.
    pub fn from_base_rates(p_s1: f64, base: [f64; 2]) -> Result<Self> {
        let ps = [1.0 - p_s1, p_s1];
        Self::new([
            [ps[0] * (1.0 - base[0]), ps[1] * (1.0 - base[1])],
            [ps[0] * base[0], ps[1] * base[1]],
        ])
    }

    pub fn p_s(&self, s: usize) -> f64 {
        self.joint[0][s] + self.joint[1][s]
    }

    pub fn p_y(&self, y: usize) -> f64 {
        self.joint[y][0] + self.joint[y][1]
    }

    /// `P(Y=y | S=s)`
    pub fn p_y_given_s(&self, y: usize, s: usize) -> f64 {
        self.joint[y][s] / self.p_s(s)
    }
}

/// Recalibration parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThetaPair {
    pub theta0: f64,
    pub theta1: f64,
}

impl ThetaPair {
    pub fn new(theta0: f64, theta1: f64) -> Self {
        Self { theta0, theta1 }
    }
}
