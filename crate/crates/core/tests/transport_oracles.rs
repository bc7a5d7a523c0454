mod common;

use fairprice::transport::{
    apply_plan, barycenter_1d, barycenter_objective, decile_tv, group_w2_by_coordinate, random_repair,
    sp_price_regression, total_repair, tv_ber_relation, wasserstein2_1d,
};
use fairprice::EmpiricalMeasure1D;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::Rng;

fn samples(rng: &mut impl Rng, n: usize, shift: f64, scale: f64) -> Vec<f64> {
    (0..n).map(|_| shift + scale * common::normal(rng)).collect()
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

#[test]
fn quantiles_match_sort_and_index() {
    let mut rng = common::rng(1);
    // 499 is coprime to 100, so no grid level lands on a cumulative breakpoint
    let xs = samples(&mut rng, 499, 0.0, 3.0);
    let m = EmpiricalMeasure1D::from_samples(&xs).unwrap();
    let s = sorted(&xs);
    for k in 0..=100 {
        let p = k as f64 / 100.0;
        let idx = ((p * s.len() as f64).ceil() as usize).saturating_sub(1);
        assert_eq!(m.quantile(p).unwrap(), s[idx], "level {p}");
    }
}

/// With `n` and `m` equally weighted atoms both quantile functions are
/// constant on cells of width `1 / (n m)`, so a midpoint sum is exact.
fn w2_squared_on_cells(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (sorted(a), sorted(b));
    let (n, m) = (a.len(), b.len());
    let cells = n * m;
    (0..cells).map(|k| (a[k / m] - b[k / n]).powi(2)).sum::<f64>() / cells as f64
}

#[test]
fn wasserstein_matches_cell_integral() {
    let mut rng = common::rng(2);
    for (n, m) in [(37, 53), (1, 20), (64, 64), (10, 7)] {
        let a = samples(&mut rng, n, 0.0, 1.0);
        let b = samples(&mut rng, m, 1.5, 0.4);
        let got = wasserstein2_1d(
            &EmpiricalMeasure1D::from_samples(&a).unwrap(),
            &EmpiricalMeasure1D::from_samples(&b).unwrap(),
        );
        let want = w2_squared_on_cells(&a, &b);
        assert!((got - want).abs() < 1e-8 * want.max(1.0), "{n}x{m}: {got} vs {want}");
    }
}

#[test]
fn wasserstein_closed_forms() {
    let d = |x| EmpiricalMeasure1D::dirac(x).unwrap();
    assert_eq!(wasserstein2_1d(&d(1.0), &d(4.0)), 9.0);

    let mut rng = common::rng(3);
    let xs = samples(&mut rng, 300, 0.0, 1.0);
    let shifted: Vec<f64> = xs.iter().map(|x| x + 0.75).collect();
    let w = wasserstein2_1d(
        &EmpiricalMeasure1D::from_samples(&xs).unwrap(),
        &EmpiricalMeasure1D::from_samples(&shifted).unwrap(),
    );
    assert!((w - 0.5625).abs() < 1e-12);
}

#[test]
fn two_measure_barycenter_cost_is_geodesic() {
    let mut rng = common::rng(4);
    let a = EmpiricalMeasure1D::from_samples(&samples(&mut rng, 40, 0.0, 1.0)).unwrap();
    let b = EmpiricalMeasure1D::from_samples(&samples(&mut rng, 25, 3.0, 2.0)).unwrap();
    let w2 = wasserstein2_1d(&a, &b);
    for w in [0.2, 0.5, 0.9] {
        let ms = [a.clone(), b.clone()];
        let bary = barycenter_1d(&ms, &[w, 1.0 - w]).unwrap();
        let obj = barycenter_objective(&ms, &[w, 1.0 - w], &bary);
        assert!((obj - w * (1.0 - w) * w2).abs() < 1e-10);
    }
}

#[test]
fn barycenter_beats_random_candidates() {
    let mut rng = common::rng(5);
    let ms: Vec<EmpiricalMeasure1D> = [(30, -1.0, 0.5), (45, 2.0, 1.0), (20, 0.0, 2.0)]
        .iter()
        .map(|&(n, mu, sd)| EmpiricalMeasure1D::from_samples(&samples(&mut rng, n, mu, sd)).unwrap())
        .collect();
    let pis = [0.5, 0.3, 0.2];
    let bary = barycenter_1d(&ms, &pis).unwrap();
    let best = barycenter_objective(&ms, &pis, &bary);
    for i in 0..100 {
        let candidate = if i % 2 == 0 {
            let shift = rng.random_range(-1.0..2.0);
            EmpiricalMeasure1D::from_samples(&samples(&mut rng, 50, shift, 1.0)).unwrap()
        } else {
            let jittered: Vec<f64> = bary
                .points()
                .iter()
                .map(|x| x + 0.05 * common::normal(&mut rng))
                .collect();
            EmpiricalMeasure1D::from_weighted(&jittered, bary.weights()).unwrap()
        };
        assert!(best <= barycenter_objective(&ms, &pis, &candidate) + 1e-12);
    }
}

#[test]
fn min_ber_matches_enumeration_exactly() {
    let mut rng = common::rng(6);
    for _ in 0..200 {
        let k = rng.random_range(1..=10);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let raw: Vec<i64> = (0..k).map(|_| rng.random_range(0..8)).collect();
            let total: i64 = raw.iter().sum::<i64>().max(1);
            let mut v: Vec<Ratio<i64>> = raw.iter().map(|&r| Ratio::new(r, total)).collect();
            if raw.iter().all(|&r| r == 0) {
                v[0] = Ratio::from_integer(1);
            }
            v
        };
        let (p0, p1) = (draw(&mut rng), draw(&mut rng));
        let out = tv_ber_relation(&p0, &p1).unwrap();
        let half = Ratio::new(1, 2);
        let brute = (0u32..1 << k)
            .map(|g| {
                (0..k)
                    .map(|c| if g >> c & 1 == 1 { p0[c] } else { p1[c] })
                    .fold(Ratio::from_integer(0), |a, b| a + b)
                    * half
            })
            .min()
            .unwrap();
        assert_eq!(out.min_ber, brute);
        assert_eq!(out.min_ber, (Ratio::from_integer(1) - out.tv) * half);
    }
}

#[test]
fn decile_tv_extremes() {
    let values: Vec<f64> = (0..200).map(|i| (i / 2) as f64).collect();
    let alternating: Vec<u8> = (0..200).map(|i| (i % 2) as u8).collect();
    assert!(decile_tv(&values, &alternating).unwrap() < 1e-12);
    let split: Vec<u8> = (0..200).map(|i| u8::from(i >= 100)).collect();
    assert!((decile_tv(&values, &split).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn regression_price_of_shifted_gaussians() {
    // N(0, 1) and N(2, 1) meet at N(1, 1); each group pays 1
    let mut rng = common::rng(7);
    let ms = [
        EmpiricalMeasure1D::from_samples(&samples(&mut rng, 20_000, 0.0, 1.0)).unwrap(),
        EmpiricalMeasure1D::from_samples(&samples(&mut rng, 20_000, 2.0, 1.0)).unwrap(),
    ];
    let price = sp_price_regression(&ms, &[0.5, 0.5]).unwrap();
    assert!((price - 1.0).abs() < 0.05, "{price}");
}

fn gaussian_pair(seed: u64) -> fairprice::Dataset {
    let mut rng = common::rng(seed);
    common::gaussian_groups(&mut rng, 2000, [[0.0, 0.0], [2.0, -1.0]], [[1.0, 1.0], [1.5, 0.5]])
}

#[test]
fn total_repair_removes_group_differences() {
    let ds = gaussian_pair(8);
    let before = group_w2_by_coordinate(&ds).unwrap();
    let (out, _) = total_repair(&ds).unwrap();
    let after = group_w2_by_coordinate(&out).unwrap();
    for (b, a) in before.iter().zip(&after) {
        assert!(*a <= 0.01 * b, "{a} vs {b}");
    }

    // a median cut on x1 + x2 accepts both groups at the same rate, up to
    // sampling noise of about 0.022 with 1000 rows per group
    let parity_gap = |d: &fairprice::Dataset| {
        let score: Vec<f64> = (0..d.n_rows()).map(|i| d.feature(0)[i] + d.feature(1)[i]).collect();
        let cut = sorted(&score)[d.n_rows() / 2];
        let rate = |g: usize| {
            let members: Vec<usize> = (0..d.n_rows()).filter(|&i| d.groups()[i] == g).collect();
            members.iter().filter(|&&i| score[i] > cut).count() as f64 / members.len() as f64
        };
        rate(1) - rate(0)
    };
    assert!(parity_gap(&ds).abs() > 0.2);
    let sp = parity_gap(&out);
    assert!(sp.abs() < 0.07, "{sp}");
}

#[test]
fn partial_repair_is_monotone_in_amount() {
    let ds = gaussian_pair(9);
    let mut last = f64::INFINITY;
    for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (out, _) = random_repair(&ds, lambda, 11).unwrap();
        let w = group_w2_by_coordinate(&out).unwrap().iter().sum::<f64>();
        assert!(w <= last + 1e-12, "lambda {lambda}: {w} > {last}");
        last = w;
    }
}

#[test]
fn full_random_repair_is_total_repair() {
    let ds = gaussian_pair(10);
    assert_eq!(random_repair(&ds, 1.0, 123).unwrap().0, total_repair(&ds).unwrap().0);
}

#[test]
fn repair_leaves_other_columns_alone() {
    let mut rng = common::rng(12);
    let n = 300;
    let x: Vec<f64> = samples(&mut rng, n, 0.0, 1.0);
    let keep: Vec<f64> = samples(&mut rng, n, 5.0, 1.0);
    let s: Vec<f64> = (0..n).map(|i| (i % 3 == 0) as u8 as f64).collect();
    let y: Vec<f64> = (0..n).map(|i| (i % 5 == 0) as u8 as f64).collect();
    let ds = common::dataset(&[("x", x), ("keep", keep), ("s", s), ("y", y)], &["x"], "s", Some("y"));
    let (out, plan) = random_repair(&ds, 0.6, 2).unwrap();
    assert_eq!(out.groups(), ds.groups());
    assert_eq!(out.target(), ds.target());
    assert_eq!(out.column_f64("keep").unwrap(), ds.column_f64("keep").unwrap());
    assert_eq!(apply_plan(&ds, &plan).unwrap(), out);
}

proptest! {
    #[test]
    fn wasserstein_is_symmetric_and_zero_on_self(
        a in prop::collection::vec(-10.0f64..10.0, 1..30),
        b in prop::collection::vec(-10.0f64..10.0, 1..30),
    ) {
        let (ma, mb) = (EmpiricalMeasure1D::from_samples(&a).unwrap(), EmpiricalMeasure1D::from_samples(&b).unwrap());
        let (ab, ba) = (wasserstein2_1d(&ma, &mb), wasserstein2_1d(&mb, &ma));
        prop_assert!((ab - ba).abs() <= 1e-9 * ab.max(1.0));
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(wasserstein2_1d(&ma, &ma), 0.0);
    }

    #[test]
    fn barycenter_mean_is_weighted_mean(
        a in prop::collection::vec(-10.0f64..10.0, 1..30),
        b in prop::collection::vec(-10.0f64..10.0, 1..30),
        w in 0.0f64..=1.0,
    ) {
        let ms = [EmpiricalMeasure1D::from_samples(&a).unwrap(), EmpiricalMeasure1D::from_samples(&b).unwrap()];
        let bary = barycenter_1d(&ms, &[w, 1.0 - w]).unwrap();
        let want = w * ms[0].mean() + (1.0 - w) * ms[1].mean();
        prop_assert!((bary.mean() - want).abs() < 1e-9);
    }
}
