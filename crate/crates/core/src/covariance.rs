//! First and second moments of a jointly distributed `(X, S, Y)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Means and block covariance of `(X, S, Y)` with `X` in `R^p` and scalar `S`, `Y`.
///
/// The assembled `(p+2) x (p+2)` covariance is symmetric positive
/// semidefinite; construction checks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct CovarianceModel {
    pub mu_x: DVector<f64>,
    pub mu_s: f64,
    pub mu_y: f64,
    pub sigma_x: DMatrix<f64>,
    pub sigma_xs: DVector<f64>,
    pub sigma_xy: DVector<f64>,
    pub sigma_s: f64,
    pub sigma_sy: f64,
    pub sigma_y: f64,
}

/// Plain-vector form used on the wire.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawModel {
    mu_x: Vec<f64>,
    mu_s: f64,
    mu_y: f64,
    sigma_x: Vec<Vec<f64>>,
    sigma_xs: Vec<f64>,
    sigma_xy: Vec<f64>,
    sigma_s: f64,
    sigma_sy: f64,
    sigma_y: f64,
}

impl TryFrom<RawModel> for CovarianceModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let p = raw.mu_x.len();
        if raw.sigma_x.len() != p || raw.sigma_x.iter().any(|r| r.len() != p) {
            return Err(Error::invalid(format!("sigma_x must be {p}x{p}")));
        }
        let sigma_x = DMatrix::from_fn(p, p, |i, j| raw.sigma_x[i][j]);
        CovarianceModel::new(
            DVector::from_vec(raw.mu_x),
            raw.mu_s,
            raw.mu_y,
            sigma_x,
            DVector::from_vec(raw.sigma_xs),
            DVector::from_vec(raw.sigma_xy),
            raw.sigma_s,
            raw.sigma_sy,
            raw.sigma_y,
        )
    }
}

impl From<CovarianceModel> for RawModel {
    fn from(m: CovarianceModel) -> Self {
        let p = m.dim();
        RawModel {
            mu_x: m.mu_x.iter().copied().collect(),
            mu_s: m.mu_s,
            mu_y: m.mu_y,
            sigma_x: (0..p).map(|i| (0..p).map(|j| m.sigma_x[(i, j)]).collect()).collect(),
            sigma_xs: m.sigma_xs.iter().copied().collect(),
            sigma_xy: m.sigma_xy.iter().copied().collect(),
            sigma_s: m.sigma_s,
            sigma_sy: m.sigma_sy,
            sigma_y: m.sigma_y,
        }
    }
}

/// Relative tolerance for symmetry and for negative eigenvalues.
const PSD_TOL: f64 = 1e-10;

impl CovarianceModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu_x: DVector<f64>,
        mu_s: f64,
        mu_y: f64,
        sigma_x: DMatrix<f64>,
        sigma_xs: DVector<f64>,
        sigma_xy: DVector<f64>,
        sigma_s: f64,
        sigma_sy: f64,
        sigma_y: f64,
    ) -> Result<Self> {
        let p = mu_x.len();
        if p == 0 {
            return Err(Error::invalid("at least one non-sensitive feature is required"));
        }
        if sigma_x.shape() != (p, p) || sigma_xs.len() != p || sigma_xy.len() != p {
            return Err(Error::invalid(format!("block shapes inconsistent with p = {p}")));
        }
        let model = Self {
            mu_x,
            mu_s,
            mu_y,
            sigma_x,
            sigma_xs,
            sigma_xy,
            sigma_s,
            sigma_sy,
            sigma_y,
        };
        model.validate()?;
        Ok(model)
    }

    /// Split an assembled `(p+2)`-dimensional mean and covariance, ordered `(X, S, Y)`.
    pub fn from_joint(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d < 3 || cov.shape() != (d, d) {
            return Err(Error::invalid("joint moments must have dimension p + 2 >= 3"));
        }
        let p = d - 2;
        Self::new(
            mean.rows(0, p).into_owned(),
            mean[p],
            mean[p + 1],
            cov.view((0, 0), (p, p)).into_owned(),
            cov.view((0, p), (p, 1)).column(0).into_owned(),
            cov.view((0, p + 1), (p, 1)).column(0).into_owned(),
            cov[(p, p)],
            cov[(p, p + 1)],
            cov[(p + 1, p + 1)],
        )
    }

    fn validate(&self) -> Result<()> {
        let joint = self.joint_covariance();
        if joint.iter().any(|v| !v.is_finite())
            || self.mu_x.iter().any(|v| !v.is_finite())
            || !self.mu_s.is_finite()
            || !self.mu_y.is_finite()
        {
            return Err(Error::invalid("moments must be finite"));
        }
        let scale = joint.amax().max(f64::MIN_POSITIVE);
        let asym = (&self.sigma_x - self.sigma_x.transpose()).amax();
        if asym > PSD_TOL * scale {
            return Err(Error::invalid("sigma_x is not symmetric"));
        }
        if self.sigma_s <= 0.0 || self.sigma_y <= 0.0 {
            return Err(Error::invalid("sigma_s and sigma_y must be positive"));
        }
        let min_eig = SymmetricEigen::new(joint).eigenvalues.min();
        if min_eig < -PSD_TOL * scale {
            return Err(Error::invalid(format!(
                "joint covariance is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(())
    }

    /// Number of non-sensitive features.
    pub fn dim(&self) -> usize {
        self.mu_x.len()
    }

    /// `Sigma_S Sigma_Y - Sigma_SY^2`, nonnegative by Cauchy-Schwarz.
    pub fn sy_determinant(&self) -> f64 {
        self.sigma_s * self.sigma_y - self.sigma_sy * self.sigma_sy
    }

    pub fn joint_mean(&self) -> DVector<f64> {
        let p = self.dim();
        DVector::from_fn(p + 2, |i, _| match i {
            i if i < p => self.mu_x[i],
            i if i == p => self.mu_s,
            _ => self.mu_y,
        })
    }

    /// Assembled covariance of `(X, S, Y)`.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mut c = DMatrix::zeros(p + 2, p + 2);
        c.view_mut((0, 0), (p, p)).copy_from(&self.sigma_x);
        for i in 0..p {
            c[(i, p)] = self.sigma_xs[i];
            c[(p, i)] = self.sigma_xs[i];
            c[(i, p + 1)] = self.sigma_xy[i];
            c[(p + 1, i)] = self.sigma_xy[i];
        }
        c[(p, p)] = self.sigma_s;
        c[(p, p + 1)] = self.sigma_sy;
        c[(p + 1, p)] = self.sigma_sy;
        c[(p + 1, p + 1)] = self.sigma_y;
        c
    }

    /// Covariance of the regressors `(X, S)`.
    pub fn regressor_covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        self.joint_covariance().view((0, 0), (p + 1, p + 1)).into_owned()
    }

    /// Same covariance with the means replaced.
    pub fn with_means(&self, mu_x: DVector<f64>, mu_s: f64, mu_y: f64) -> Result<Self> {
        Self::new(
            mu_x,
            mu_s,
            mu_y,
            self.sigma_x.clone(),
            self.sigma_xs.clone(),
            self.sigma_xy.clone(),
            self.sigma_s,
            self.sigma_sy,
            self.sigma_y,
        )
    }
}
