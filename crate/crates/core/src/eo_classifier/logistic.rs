//! Plug-in estimate of `eta` by per-group logistic regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GroupPriors;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const GRADIENT_TOL: f64 = 1e-8;

/// Logistic model of one group on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticGroup {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Coefficients on the standardized features.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogisticGroup {
    pub fn eta(&self, x: &[f64]) -> f64 {
        let z = self.bias
            + self
                .weights
                .iter()
                .zip(x)
                .zip(self.mean.iter().zip(&self.scale))
                .map(|((w, v), (m, s))| w * (v - m) / s)
                .sum::<f64>();
        sigmoid(z)
    }
}

/// `eta(x, s)` from one logistic model per group, with the priors of the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticScoreModel {
    pub features: Vec<String>,
    pub group_labels: Vec<String>,
    pub groups: [LogisticGroup; 2],
    pub priors: GroupPriors,
}

impl LogisticScoreModel {
    pub fn eta(&self, x: &[f64], s: usize) -> f64 {
        self.groups[s].eta(x)
    }

    /// Scores of every row of `ds`.
    pub fn eta_of(&self, ds: &Dataset) -> Result<Vec<f64>> {
        let groups = ds.binary_groups()?;
        Ok((0..ds.n_rows())
            .map(|i| self.eta(&ds.row_features(i), groups[i] as usize))
            .collect())
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean log-loss; `params` holds the weights followed by the bias.
pub fn log_loss(params: &[f64], rows: &[Vec<f64>], y: &[u8]) -> f64 {
    let p = params.len() - 1;
    rows.iter()
        .zip(y)
        .map(|(x, &yi)| {
            let z = params[p] + x.iter().zip(&params[..p]).map(|(a, b)| a * b).sum::<f64>();
            softplus(z) - f64::from(yi) * z
        })
        .sum::<f64>()
        / rows.len() as f64
}

/// Gradient of [`log_loss`].
pub fn log_loss_gradient(params: &[f64], rows: &[Vec<f64>], y: &[u8]) -> Vec<f64> {
    let p = params.len() - 1;
    let mut g = vec![0.0; p + 1];
    for (x, &yi) in rows.iter().zip(y) {
        let z = params[p] + x.iter().zip(&params[..p]).map(|(a, b)| a * b).sum::<f64>();
        let r = sigmoid(z) - f64::from(yi);
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += r * xj;
        }
        g[p] += r;
    }
    let n = rows.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Hessian of [`log_loss`].
fn log_loss_hessian(params: &[f64], rows: &[Vec<f64>]) -> DMatrix<f64> {
    let p = params.len() - 1;
    let mut h = DMatrix::zeros(p + 1, p + 1);
    let mut xa = vec![1.0; p + 1];
    for x in rows {
        xa[..p].copy_from_slice(x);
        let z = params[p] + x.iter().zip(&params[..p]).map(|(a, b)| a * b).sum::<f64>();
        let w = sigmoid(z) * (1.0 - sigmoid(z));
        for i in 0..=p {
            for j in 0..=i {
                h[(i, j)] += w * xa[i] * xa[j];
            }
        }
    }
    let n = rows.len() as f64;
    for i in 0..=p {
        for j in 0..i {
            h[(j, i)] = h[(i, j)];
        }
    }
    h / n
}

/// Damped Newton iterations with a backtracking line search; falls back to
/// the negative gradient when the Hessian is not numerically positive definite.
fn minimize(rows: &[Vec<f64>], y: &[u8], p: usize) -> Result<(Vec<f64>, usize, f64)> {
    let mut params = vec![0.0; p + 1];
    let mut loss = log_loss(&params, rows, y);
    let mut gn = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        let grad = log_loss_gradient(&params, rows, y);
        gn = norm(&grad);
        if gn < GRADIENT_TOL {
            return Ok((params, it, gn));
        }
        let g = DVector::from_column_slice(&grad);
        let dir = match log_loss_hessian(&params, rows).cholesky() {
            Some(c) => -c.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&dir);
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = params.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
            let trial_loss = log_loss(&trial, rows, y);
            // near the optimum the decrease drops below rounding of the loss
            if trial_loss <= loss + 1e-4 * step * slope || (step == 1.0 && trial_loss <= loss) {
                params = trial;
                loss = trial_loss;
                break;
            }
            step /= 2.0;
            if step < 1e-20 {
                return Err(Error::NotConverged {
                    iterations: it,
                    gradient_norm: gn,
                });
            }
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        gradient_norm: gn,
    })
}

/// Fit one logistic model per group on rows `x` (row-major) with labels `y`.
pub fn fit_logistic_group(x: &[Vec<f64>], y: &[u8]) -> Result<LogisticGroup> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let p = x[0].len();
    let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let scale: Vec<f64> = (0..p)
        .map(|j| {
            let sd = (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..p).map(|j| (r[j] - mean[j]) / scale[j]).collect())
        .collect();
    let (params, iterations, gradient_norm) = minimize(&rows, y, p)?;
    Ok(LogisticGroup {
        mean,
        scale,
        weights: params[..p].to_vec(),
        bias: params[p],
        iterations,
        gradient_norm,
    })
}

/// Per-group logistic regression of the binary target on the feature
/// columns, with priors from the group and label frequencies.
pub fn fit_eta_logistic(ds: &Dataset) -> Result<LogisticScoreModel> {
    let groups = ds.binary_groups()?;
    let y = ds.binary_target()?;
    let mut counts = [[0usize; 2]; 2];
    for (&yi, &s) in y.iter().zip(&groups) {
        counts[yi as usize][s as usize] += 1;
    }
    let n = ds.n_rows() as f64;
    let priors = GroupPriors::new(counts.map(|row| row.map(|c| c as f64 / n)))
        .map_err(|_| Error::Degenerate("every (label, group) combination needs at least one row".into()))?;
    let fit = |s: u8| {
        let idx: Vec<usize> = (0..ds.n_rows()).filter(|&i| groups[i] == s).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| ds.row_features(i)).collect();
        let labels: Vec<u8> = idx.iter().map(|&i| y[i]).collect();
        fit_logistic_group(&rows, &labels)
    };
    Ok(LogisticScoreModel {
        features: ds.schema().features.clone(),
        group_labels: ds.group_labels().to_vec(),
        groups: [fit(0)?, fit(1)?],
        priors,
    })
}
