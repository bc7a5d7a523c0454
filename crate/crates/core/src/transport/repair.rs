use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::wasserstein::{check_weights, wasserstein2_1d};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure1D;
use crate::SCHEMA_VERSION;

/// Monotone map of one group on one coordinate: `support[k] -> mapped[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMap {
    pub support: Vec<f64>,
    pub mapped: Vec<f64>,
}

impl GroupMap {
    /// Exact lookup on the support, linear interpolation between atoms and
    /// clamping outside.
    pub fn apply(&self, x: f64) -> f64 {
        let k = self.support.partition_point(|&s| s < x);
        if k < self.support.len() && self.support[k] == x {
            return self.mapped[k];
        }
        if k == 0 {
            return self.mapped[0];
        }
        if k == self.support.len() {
            return self.mapped[k - 1];
        }
        let (x0, x1) = (self.support[k - 1], self.support[k]);
        let w = (x - x0) / (x1 - x0);
        self.mapped[k - 1] + w * (self.mapped[k] - self.mapped[k - 1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateMap {
    pub feature: String,
    /// One map per group, in the order of [`RepairPlan::group_labels`].
    pub groups: Vec<GroupMap>,
}

/// Replayable description of a repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairPlan {
    pub schema_version: u32,
    pub lambda: f64,
    pub seed: u64,
    pub sensitive: String,
    pub group_labels: Vec<String>,
    pub group_weights: Vec<f64>,
    pub coordinates: Vec<CoordinateMap>,
}

/// Fit per-coordinate maps of every group onto the weighted barycenter of the
/// group marginals. `weights` defaults to the group frequencies.
///
/// Atom `k` of group `s`, carrying quantile levels `(c_{k-1}, c_k]`, is sent
/// to the barycenter quantile averaged over that interval,
/// `sum_r pi_r (I_r(c_k) - I_r(c_{k-1})) / (c_k - c_{k-1})` with
/// `I_r(t) = \int_0^t Q_r`. For continuous marginals this is the usual
/// `F_B^{-1} o F_s` map; with atoms it keeps tied inputs tied.
pub fn fit_repair_plan(ds: &Dataset, weights: Option<&[f64]>, lambda: f64, seed: u64) -> Result<RepairPlan> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("repair amount {lambda} outside [0, 1]")));
    }
    if ds.n_features() == 0 {
        return Err(Error::invalid("no feature columns to repair"));
    }
    let counts = ds.group_counts();
    let pis: Vec<f64> = match weights {
        Some(w) => w.to_vec(),
        None => counts.iter().map(|&c| c as f64 / ds.n_rows() as f64).collect(),
    };
    check_weights(&pis, ds.n_groups())?;

    let coordinates = (0..ds.n_features())
        .into_par_iter()
        .map(|j| {
            let measures = group_measures(ds, j)?;
            let groups = measures
                .iter()
                .map(|m| {
                    let cum = m.cumulative();
                    let mapped = (0..m.len())
                        .map(|k| {
                            let a = if k == 0 { 0.0 } else { cum[k - 1] };
                            let b = cum[k];
                            measures
                                .iter()
                                .zip(&pis)
                                .map(|(r, p)| p * r.quantile_average(a, b))
                                .sum()
                        })
                        .collect::<Vec<f64>>();
                    GroupMap {
                        support: m.points().to_vec(),
                        mapped: monotone(mapped),
                    }
                })
                .collect();
            Ok(CoordinateMap {
                feature: ds.schema().features[j].clone(),
                groups,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RepairPlan {
        schema_version: SCHEMA_VERSION,
        lambda,
        seed,
        sensitive: ds.schema().sensitive.clone(),
        group_labels: ds.group_labels().to_vec(),
        group_weights: pis,
        coordinates,
    })
}

/// Guard against rounding making a map decrease between adjacent atoms.
fn monotone(mut v: Vec<f64>) -> Vec<f64> {
    for k in 1..v.len() {
        if v[k] < v[k - 1] {
            v[k] = v[k - 1];
        }
    }
    v
}

fn group_measures(ds: &Dataset, j: usize) -> Result<Vec<EmpiricalMeasure1D>> {
    let mut by_group = vec![Vec::new(); ds.n_groups()];
    for (&x, &g) in ds.feature(j).iter().zip(ds.groups()) {
        by_group[g].push(x);
    }
    by_group.iter().map(|v| EmpiricalMeasure1D::from_samples(v)).collect()
}

/// Rows selected for repair: one uniform draw per row, selected when `u < lambda`.
/// Selections are nested in `lambda` for a fixed seed.
fn selection(n: usize, lambda: f64, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() < lambda).collect()
}

/// Apply `plan` to `ds`, possibly a different sample than the plan was fit on.
///
/// Groups are matched by label; a group absent from the plan is an error.
pub fn apply_plan(ds: &Dataset, plan: &RepairPlan) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&plan.lambda) {
        return Err(Error::invalid(format!("repair amount {} outside [0, 1]", plan.lambda)));
    }
    let group_of_plan: Vec<usize> = ds
        .group_labels()
        .iter()
        .map(|l| {
            plan.group_labels
                .iter()
                .position(|p| p == l)
                .ok_or_else(|| Error::invalid(format!("group {l:?} is not covered by the repair plan")))
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(ds.n_features());
    for (j, name) in ds.schema().features.iter().enumerate() {
        let coord = plan
            .coordinates
            .iter()
            .find(|c| &c.feature == name)
            .ok_or_else(|| Error::MissingColumn { column: name.clone() })?;
        values.push(
            ds.feature(j)
                .iter()
                .zip(ds.groups())
                .map(|(&x, &g)| coord.groups[group_of_plan[g]].apply(x))
                .collect::<Vec<f64>>(),
        );
    }
    let replace = selection(ds.n_rows(), plan.lambda, plan.seed);
    ds.with_feature_values(&values, &replace)
}

/// Move every feature coordinate of every group onto the barycenter.
pub fn total_repair(ds: &Dataset) -> Result<(Dataset, RepairPlan)> {
    random_repair(ds, 1.0, 0)
}

/// Repair each row with probability `lambda`, all coordinates of a row together.
pub fn random_repair(ds: &Dataset, lambda: f64, seed: u64) -> Result<(Dataset, RepairPlan)> {
    let plan = fit_repair_plan(ds, None, lambda, seed)?;
    Ok((apply_plan(ds, &plan)?, plan))
}

/// Largest pairwise group `W2` (not squared) on each feature coordinate.
pub fn group_w2_by_coordinate(ds: &Dataset) -> Result<Vec<f64>> {
    (0..ds.n_features())
        .map(|j| {
            let ms = group_measures(ds, j)?;
            let mut worst: f64 = 0.0;
            for a in 0..ms.len() {
                for b in a + 1..ms.len() {
                    worst = worst.max(wasserstein2_1d(&ms[a], &ms[b]).sqrt());
                }
            }
            Ok(worst)
        })
        .collect()
}
