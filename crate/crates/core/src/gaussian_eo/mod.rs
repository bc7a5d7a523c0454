//! Optimal equality-of-odds linear predictor under a Gaussian linear model.
//!
//! With `(X, S, Y)` jointly Gaussian, a linear predictor `b0 S + b^T X`
//! satisfies equality of odds exactly when
//! `b^T (Sigma_XS Sigma_Y - Sigma_SY Sigma_XY) + b0 (Sigma_S Sigma_Y - Sigma_SY^2) = 0`.
//! Solving the constraint for `b0 = -b^T C` turns the constrained problem
//! into ordinary least squares on `Z = X - S C`.
//!
//! Predictors carry an intercept so that risks include the means; slopes do
//! not depend on the means.

mod simulation;

pub use simulation::{
    simulate_excess_risk, write_long_csv, CurvePoint, ExcessRiskCurve, GaussianConfig, Sample, DEFAULT_SIZES,
};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};

/// Largest accepted condition number of a normal-equation matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative size below which `Sigma_S Sigma_Y - Sigma_SY^2` counts as zero.
const DEPENDENCE_TOL: f64 = 1e-12;

/// `f(X, S) = intercept + beta0 S + beta^T X`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub intercept: f64,
}

impl LinearPredictor {
    pub fn zero(p: usize) -> Self {
        Self {
            beta0: 0.0,
            beta: vec![0.0; p],
            intercept: 0.0,
        }
    }

    /// Slopes with the intercept that makes the mean residual zero under `cm`.
    pub fn centered(cm: &CovarianceModel, beta0: f64, beta: DVector<f64>) -> Self {
        let intercept = cm.mu_y - beta0 * cm.mu_s - beta.dot(&cm.mu_x);
        Self {
            beta0,
            beta: beta.iter().copied().collect(),
            intercept,
        }
    }

    pub fn predict(&self, x: &[f64], s: f64) -> f64 {
        self.intercept + self.beta0 * s + self.beta.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

/// `C = (Sigma_XS Sigma_Y - Sigma_SY Sigma_XY) / (Sigma_S Sigma_Y - Sigma_SY^2)`
pub fn correction_vector(cm: &CovarianceModel) -> Result<DVector<f64>> {
    let det = cm.sy_determinant();
    if det <= DEPENDENCE_TOL * cm.sigma_s * cm.sigma_y {
        return Err(Error::LinearlyDependent { determinant: det });
    }
    Ok((&cm.sigma_xs * cm.sigma_y - &cm.sigma_xy * cm.sigma_sy) / det)
}

/// `Sigma_Z = Cov(X - S C)` and `Sigma_ZY = Cov(X - S C, Y)`.
pub fn substitution_moments(cm: &CovarianceModel, c: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let sigma_z =
        &cm.sigma_x + c * c.transpose() * cm.sigma_s - c * cm.sigma_xs.transpose() - &cm.sigma_xs * c.transpose();
    let sigma_zy = &cm.sigma_xy - c * cm.sigma_sy;
    (sigma_z, sigma_zy)
}

/// Solve `a x = b` for symmetric positive definite `a`, refusing
/// ill-conditioned systems.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>, what: &'static str) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular { what, condition });
    }
    let chol = a.clone().cholesky().ok_or(Error::Singular { what, condition })?;
    Ok(chol.solve(b))
}

/// The risk-minimizing linear predictor among those satisfying equality of odds.
pub fn fit_eo_fair_linear(cm: &CovarianceModel) -> Result<LinearPredictor> {
    let c = correction_vector(cm)?;
    let (sigma_z, sigma_zy) = substitution_moments(cm, &c);
    let beta = solve_spd(&sigma_z, &sigma_zy, "Sigma_Z")?;
    let beta0 = -beta.dot(&c);
    Ok(LinearPredictor::centered(cm, beta0, beta))
}

/// Population least squares on `(X, S)` jointly.
pub fn fit_unconstrained_linear(cm: &CovarianceModel) -> Result<LinearPredictor> {
    let p = cm.dim();
    let rhs = DVector::from_fn(p + 1, |i, _| if i < p { cm.sigma_xy[i] } else { cm.sigma_sy });
    let coef = solve_spd(&cm.regressor_covariance(), &rhs, "Cov(X, S)")?;
    Ok(LinearPredictor::centered(cm, coef[p], coef.rows(0, p).into_owned()))
}

/// `E (Y - f(X, S))^2`: residual variance plus squared mean residual.
pub fn population_risk(cm: &CovarianceModel, pred: &LinearPredictor) -> Result<f64> {
    let p = cm.dim();
    if pred.beta.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            found: pred.beta.len(),
        });
    }
    let a = DVector::from_fn(p + 2, |i, _| match i {
        i if i < p => -pred.beta[i],
        i if i == p => -pred.beta0,
        _ => 1.0,
    });
    let variance = (a.transpose() * cm.joint_covariance() * &a)[(0, 0)];
    let bias = a.dot(&cm.joint_mean()) - pred.intercept;
    Ok(variance.max(0.0) + bias * bias)
}

/// `beta^T (Sigma_XS Sigma_Y - Sigma_SY Sigma_XY) + beta0 (Sigma_S Sigma_Y - Sigma_SY^2)`
pub fn constraint_residual(cm: &CovarianceModel, pred: &LinearPredictor) -> f64 {
    let v = &cm.sigma_xs * cm.sigma_y - &cm.sigma_xy * cm.sigma_sy;
    pred.beta.iter().zip(v.iter()).map(|(b, x)| b * x).sum::<f64>() + pred.beta0 * cm.sy_determinant()
}

/// Both fits and their risks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceOfFairness {
    pub fair: LinearPredictor,
    pub unconstrained: LinearPredictor,
    pub fair_risk: f64,
    pub unconstrained_risk: f64,
    pub excess_risk: f64,
    pub constraint_residual: f64,
}

pub fn price_of_fairness(cm: &CovarianceModel) -> Result<PriceOfFairness> {
    let fair = fit_eo_fair_linear(cm)?;
    let unconstrained = fit_unconstrained_linear(cm)?;
    let fair_risk = population_risk(cm, &fair)?;
    let unconstrained_risk = population_risk(cm, &unconstrained)?;
    Ok(PriceOfFairness {
        constraint_residual: constraint_residual(cm, &fair),
        excess_risk: (fair_risk - unconstrained_risk).max(0.0),
        fair,
        unconstrained,
        fair_risk,
        unconstrained_risk,
    })
}

/// Risk of the best fair predictor minus the risk of the best predictor.
pub fn excess_risk(cm: &CovarianceModel) -> Result<f64> {
    Ok(price_of_fairness(cm)?.excess_risk)
}

/// Sample moments of `(X, S, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceEstimate {
    pub model: CovarianceModel,
    /// Negative eigenvalues were clipped to make the estimate PSD.
    pub projected: bool,
    pub min_eigenvalue: f64,
}

/// Unbiased sample moments; `x` is column-major (one vector per feature).
pub fn estimate_covariance(x: &[Vec<f64>], s: &[f64], y: &[f64]) -> Result<CovarianceEstimate> {
    let n = s.len();
    let p = x.len();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if let Some(col) = x.iter().find(|c| c.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            found: col.len(),
        });
    }
    if p == 0 {
        return Err(Error::invalid("at least one feature is required"));
    }
    if n < p + 3 {
        return Err(Error::InsufficientSamples { n, required: p + 3 });
    }
    let d = p + 2;
    let column = |k: usize| -> &[f64] {
        match k {
            k if k < p => &x[k],
            k if k == p => s,
            _ => y,
        }
    };
    let mean = DVector::from_fn(d, |k, _| column(k).iter().sum::<f64>() / n as f64);
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let (ca, cb) = (column(a), column(b));
            let v = ca
                .iter()
                .zip(cb)
                .map(|(u, w)| (u - mean[a]) * (w - mean[b]))
                .sum::<f64>()
                / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    if cov[(p, p)] <= 0.0 {
        return Err(Error::Degenerate(
            "sensitive attribute is constant in the sample".into(),
        ));
    }
    if cov[(p + 1, p + 1)] <= 0.0 {
        return Err(Error::Degenerate("target is constant in the sample".into()));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let min_eigenvalue = eig.eigenvalues.min();
    let projected = min_eigenvalue < 0.0;
    if projected {
        let clipped = eig.eigenvalues.map(|l| l.max(0.0));
        cov = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
    }
    Ok(CovarianceEstimate {
        model: CovarianceModel::from_joint(&mean, &cov)?,
        projected,
        min_eigenvalue,
    })
}
