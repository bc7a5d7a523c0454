//! Monte Carlo estimate of the plug-in excess risk as the sample grows.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{estimate_covariance, excess_risk};
use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};
use crate::SCHEMA_VERSION;

/// Generating law: `(X, S)` jointly normal and
/// `Y = beta0 S + beta^T X + noise_sd * eps` with standard normal `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianConfig {
    pub mu_x: Vec<f64>,
    pub mu_s: f64,
    pub sigma_x: Vec<Vec<f64>>,
    pub sigma_xs: Vec<f64>,
    pub sigma_s: f64,
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub noise_sd: f64,
}

impl Default for GaussianConfig {
    /// `S ~ N(0, 10)`, `Sigma_X = diag(2, 3)`, `Cov(X_j, S) = 0.1`,
    /// `beta0 = 1`, `beta = (1, 1)`, unit noise.
    fn default() -> Self {
        Self {
            mu_x: vec![0.0, 0.0],
            mu_s: 0.0,
            sigma_x: vec![vec![2.0, 0.0], vec![0.0, 3.0]],
            sigma_xs: vec![0.1, 0.1],
            sigma_s: 10.0,
            beta0: 1.0,
            beta: vec![1.0, 1.0],
            noise_sd: 1.0,
        }
    }
}

/// Sample sizes used when none are given.
/// Column-major draws `(x, s, y)`, one vector per feature in `x`.
pub type Sample = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

pub const DEFAULT_SIZES: [usize; 10] = [100, 200, 400, 800, 1000, 1500, 2000, 3000, 5000, 10000];

impl GaussianConfig {
    pub fn dim(&self) -> usize {
        self.mu_x.len()
    }

    fn sigma_x_matrix(&self) -> DMatrix<f64> {
        let p = self.dim();
        DMatrix::from_fn(p, p, |i, j| self.sigma_x[i][j])
    }

    /// Exact moments of `(X, S, Y)` implied by the configuration.
    pub fn model(&self) -> Result<CovarianceModel> {
        let p = self.dim();
        if self.sigma_x.len() != p || self.sigma_x.iter().any(|r| r.len() != p) {
            return Err(Error::invalid(format!("sigma_x must be {p}x{p}")));
        }
        if self.sigma_xs.len() != p || self.beta.len() != p {
            return Err(Error::invalid(format!("sigma_xs and beta must have length {p}")));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::invalid("noise_sd must be nonnegative"));
        }
        let sx = self.sigma_x_matrix();
        let sxs = DVector::from_vec(self.sigma_xs.clone());
        let beta = DVector::from_vec(self.beta.clone());
        let sigma_xy = &sx * &beta + &sxs * self.beta0;
        let sigma_sy = sxs.dot(&beta) + self.sigma_s * self.beta0;
        let sigma_y = (beta.transpose() * &sx * &beta)[(0, 0)]
            + 2.0 * self.beta0 * sxs.dot(&beta)
            + self.beta0 * self.beta0 * self.sigma_s
            + self.noise_sd * self.noise_sd;
        let mu_x = DVector::from_vec(self.mu_x.clone());
        let mu_y = self.beta0 * self.mu_s + beta.dot(&mu_x);
        CovarianceModel::new(
            mu_x,
            self.mu_s,
            mu_y,
            sx,
            sxs,
            sigma_xy,
            self.sigma_s,
            sigma_sy,
            sigma_y,
        )
    }

    /// Draw `n` observations.
    pub fn sample(&self, n: usize, rng: &mut impl rand::Rng) -> Result<Sample> {
        let p = self.dim();
        let cm = self.model()?;
        let cov = cm.regressor_covariance();
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::invalid("covariance of (X, S) must be positive definite"))?;
        let l = chol.l();
        let mut x = vec![Vec::with_capacity(n); p];
        let mut s = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut z = DVector::zeros(p + 1);
        for _ in 0..n {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let w = &l * &z;
            let si = self.mu_s + w[p];
            let mut yi = self.beta0 * si;
            for j in 0..p {
                let xj = self.mu_x[j] + w[j];
                yi += self.beta[j] * xj;
                x[j].push(xj);
            }
            let eps: f64 = StandardNormal.sample(rng);
            s.push(si);
            y.push(yi + self.noise_sd * eps);
        }
        Ok((x, s, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    /// Mean over successful replications; `None` when all failed.
    pub mean: Option<f64>,
    /// Sample standard deviation; zero with a single success.
    pub sd: Option<f64>,
    pub reps: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcessRiskCurve {
    pub schema_version: u32,
    pub seed: u64,
    pub config: GaussianConfig,
    /// Excess risk of the generating model itself.
    pub population_excess_risk: f64,
    pub points: Vec<CurvePoint>,
    /// Per size, the estimate of every replication (`None` on failure).
    #[serde(skip)]
    pub estimates: Vec<Vec<Option<f64>>>,
}

/// Replication `rep` at size index `k` uses its own ChaCha stream, so results
/// do not depend on scheduling.
fn replication_rng(seed: u64, k: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | rep as u64);
    rng
}

/// For each size, draw `reps` samples, estimate the moments and evaluate the
/// excess risk of the estimated model.
pub fn simulate_excess_risk(
    config: &GaussianConfig,
    sizes: &[usize],
    reps: usize,
    seed: u64,
) -> Result<ExcessRiskCurve> {
    if sizes.is_empty() {
        return Err(Error::invalid("at least one sample size is required"));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("sample sizes must be strictly increasing"));
    }
    if reps == 0 {
        return Err(Error::invalid("at least one replication is required"));
    }
    let population_excess_risk = excess_risk(&config.model()?)?;

    let mut points = Vec::with_capacity(sizes.len());
    let mut estimates = Vec::with_capacity(sizes.len());
    for (k, &n) in sizes.iter().enumerate() {
        let runs: Vec<Option<f64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut rng = replication_rng(seed, k, rep);
                let (x, s, y) = config.sample(n, &mut rng).ok()?;
                let est = estimate_covariance(&x, &s, &y).ok()?;
                excess_risk(&est.model).ok()
            })
            .collect();
        let ok: Vec<f64> = runs.iter().flatten().copied().collect();
        let (mean, sd) = match ok.len() {
            0 => (None, None),
            m => {
                let mean = ok.iter().sum::<f64>() / m as f64;
                let sd = if m == 1 {
                    0.0
                } else {
                    (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
                };
                (Some(mean), Some(sd))
            }
        };
        points.push(CurvePoint {
            n,
            mean,
            sd,
            reps,
            failures: reps - ok.len(),
        });
        estimates.push(runs);
    }
    Ok(ExcessRiskCurve {
        schema_version: SCHEMA_VERSION,
        seed,
        config: config.clone(),
        population_excess_risk,
        points,
        estimates,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), crate::dataset::format_real)
}

impl ExcessRiskCurve {
    /// `n,mean,sd,reps,failures`
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "mean", "sd", "reps", "failures"])?;
        for p in &self.points {
            w.write_record([
                p.n.to_string(),
                opt(p.mean),
                opt(p.sd),
                p.reps.to_string(),
                p.failures.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// One row per replication: `n,rep,excess_risk`.
    pub fn write_replicates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "rep", "excess_risk"])?;
        for (p, runs) in self.points.iter().zip(&self.estimates) {
            for (rep, v) in runs.iter().enumerate() {
                w.write_record([p.n.to_string(), rep.to_string(), opt(*v)])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// Long format for plotting: `n,series,value` with series `mean`,
    /// `lower`, `upper` (mean -/+ sd) and `population`.
    pub fn write_long_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_long_csv(
            writer,
            self.population_excess_risk,
            self.points.iter().map(|p| (p.n, p.mean, p.sd)),
        )
    }
}

/// Long-format plotting table: one row per size and series
/// (`mean`, `lower`, `upper` at one standard deviation, `population`).
pub fn write_long_csv<W: Write>(
    writer: W,
    population: f64,
    points: impl Iterator<Item = (usize, Option<f64>, Option<f64>)>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["n", "series", "value"])?;
    for (n, mean, sd) in points {
        let n = n.to_string();
        let lower = mean.zip(sd).map(|(m, s)| m - s);
        let upper = mean.zip(sd).map(|(m, s)| m + s);
        for (series, v) in [
            ("mean", mean),
            ("lower", lower),
            ("upper", upper),
            ("population", Some(population)),
        ] {
            w.write_record([n.as_str(), series, &opt(v)])?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
