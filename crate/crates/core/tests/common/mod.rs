#![allow(dead_code)]

use fairprice::covariance::CovarianceModel;
use fairprice::dataset::{Dataset, Schema};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Random `(X, S, Y)` moments: covariance `A A^T + 0.1 I` with Gaussian `A`,
/// which is well conditioned and never has `Y` and `S` linearly dependent.
pub fn random_model(rng: &mut impl Rng, p: usize) -> CovarianceModel {
    let d = p + 2;
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    let mean = DVector::from_fn(d, |_, _| normal(rng));
    CovarianceModel::from_joint(&mean, &cov).unwrap()
}

/// Dataset from named numeric columns.
pub fn dataset(columns: &[(&str, Vec<f64>)], features: &[&str], sensitive: &str, target: Option<&str>) -> Dataset {
    let header: Vec<String> = columns.iter().map(|c| c.0.to_string()).collect();
    let n = columns[0].1.len();
    let records = (0..n)
        .map(|i| columns.iter().map(|c| format!("{}", c.1[i])).collect())
        .collect();
    let schema = Schema::new(
        features.iter().map(|f| f.to_string()).collect(),
        sensitive,
        target.map(str::to_string),
    );
    Dataset::from_table(header, records, schema).unwrap()
}

/// Two-group Gaussian feature data: group `s` has mean `means[s]` and sd `sds[s]` per coordinate.
pub fn gaussian_groups(rng: &mut impl Rng, n: usize, means: [[f64; 2]; 2], sds: [[f64; 2]; 2]) -> Dataset {
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for i in 0..n {
        let g = i % 2;
        x1.push(means[g][0] + sds[g][0] * normal(rng));
        x2.push(means[g][1] + sds[g][1] * normal(rng));
        s.push(g as f64);
    }
    dataset(&[("x1", x1), ("x2", x2), ("s", s)], &["x1", "x2"], "s", None)
}

/// Regressor weights `(beta, beta0)` of the least-squares fit of `Y` on
/// `(X, S)` subject to `v^T a = 0`, from the KKT system
/// `[[Sigma_R, v], [v^T, 0]] [a; mu] = [r; 0]`.
pub fn constrained_least_squares(cm: &CovarianceModel, v: &DVector<f64>) -> DVector<f64> {
    let p = cm.dim();
    let joint = cm.joint_covariance();
    let mut kkt = DMatrix::zeros(p + 2, p + 2);
    kkt.view_mut((0, 0), (p + 1, p + 1))
        .copy_from(&joint.view((0, 0), (p + 1, p + 1)));
    for i in 0..=p {
        kkt[(i, p + 1)] = v[i];
        kkt[(p + 1, i)] = v[i];
    }
    let mut rhs = DVector::zeros(p + 2);
    for i in 0..=p {
        rhs[i] = joint[(i, p + 1)];
    }
    kkt.lu().solve(&rhs).unwrap().rows(0, p + 1).into_owned()
}

/// Normal of the equal-odds constraint on `(beta, beta0)`: a linear score
/// `a^T (X, S)` has `Cov(score, S | Y) = 0` iff `a^T v = 0`, with
/// `v = Cov((X, S), S) Sigma_Y - Cov((X, S), Y) Sigma_SY`.
pub fn odds_constraint_normal(cm: &CovarianceModel) -> DVector<f64> {
    let p = cm.dim();
    let joint = cm.joint_covariance();
    DVector::from_fn(p + 1, |i, _| {
        joint[(i, p)] * cm.sigma_y - joint[(i, p + 1)] * cm.sigma_sy
    })
}

/// `E (Y - a^T (X, S))^2` for centered variables.
pub fn centered_risk(cm: &CovarianceModel, a: &DVector<f64>) -> f64 {
    let p = cm.dim();
    let joint = cm.joint_covariance();
    let sr = joint.view((0, 0), (p + 1, p + 1));
    let r = joint.view((0, p + 1), (p + 1, 1));
    cm.sigma_y - 2.0 * (a.transpose() * r)[(0, 0)] + (a.transpose() * sr * a)[(0, 0)]
}

/// Two groups with `X | Y=y ~ N(2y - 1, 1)` in both and base rates `base`;
/// groups alternate row by row. Columns `x`, `s`, `y`.
pub fn score_model_data(rng: &mut impl Rng, n: usize, base: [f64; 2]) -> Dataset {
    let mut x = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let g = i % 2;
        let label = rng.random::<f64>() < base[g];
        let mean = if label { 1.0 } else { -1.0 };
        x.push(mean + normal(rng));
        s.push(g as f64);
        y.push(f64::from(u8::from(label)));
    }
    dataset(&[("x", x), ("s", s), ("y", y)], &["x"], "s", Some("y"))
}

/// `atoms` distinct scores per group on the lattice `{1/20, ..., 19/20}` with
/// random masses. The group base rates are the mean scores.
pub fn lattice_atoms(rng: &mut impl Rng, atoms: usize) -> [Vec<(f64, f64)>; 2] {
    [0, 1].map(|_| {
        let mut picks: Vec<usize> = (1..20).collect();
        for k in 0..atoms {
            let j = rng.random_range(k..picks.len());
            picks.swap(k, j);
        }
        let raw: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        picks[..atoms]
            .iter()
            .zip(&raw)
            .map(|(&k, &m)| (k as f64 / 20.0, m / total))
            .collect()
    })
}

pub fn mean_score(group: &[(f64, f64)]) -> f64 {
    group.iter().map(|(e, m)| e * m).sum()
}

/// Smallest risk over every deterministic rule that accepts or rejects each
/// atom whole and keeps both rate gaps within `eps`. `p_s1` is `P(S=1)`.
pub fn best_fair_enumerated(atoms: &[Vec<(f64, f64)>; 2], p_s1: f64, eps: f64) -> Option<f64> {
    let ps = [1.0 - p_s1, p_s1];
    let base = [mean_score(&atoms[0]), mean_score(&atoms[1])];
    let k0 = atoms[0].len();
    let total = k0 + atoms[1].len();
    let mut best: Option<f64> = None;
    for mask in 0u32..1 << total {
        let mut tpr = [0.0; 2];
        let mut fpr = [0.0; 2];
        let mut risk = 0.0;
        for s in 0..2 {
            for (k, &(e, m)) in atoms[s].iter().enumerate() {
                let bit = if s == 0 { k } else { k0 + k };
                if mask >> bit & 1 == 1 {
                    tpr[s] += m * e / base[s];
                    fpr[s] += m * (1.0 - e) / (1.0 - base[s]);
                    risk += ps[s] * m * (1.0 - e);
                } else {
                    risk += ps[s] * m * e;
                }
            }
        }
        if (tpr[1] - tpr[0]).abs() <= eps && (fpr[1] - fpr[0]).abs() <= eps {
            best = Some(best.map_or(risk, |b: f64| b.min(risk)));
        }
    }
    best
}
