mod common;

use fairprice::eo_classifier::{
    bayes_classifier, fit_eta_logistic, fit_logistic_group, group_rates, log_loss, log_loss_gradient, moment_residuals,
    recalibrated_classifier, risk_of, solve_theta, AcceptRegion, Classifier, EtaSample, GroupPriors, JitteredAtoms,
    SolveOptions, ThetaPair,
};
use proptest::prelude::*;
use rand::Rng;

fn priors_of(atoms: &[Vec<(f64, f64)>; 2], p_s1: f64) -> GroupPriors {
    GroupPriors::from_base_rates(p_s1, [common::mean_score(&atoms[0]), common::mean_score(&atoms[1])]).unwrap()
}

#[test]
fn held_out_rates_are_equal_across_groups() {
    let mut rng = common::rng(41);
    let base = [0.3, 0.6];
    let train = common::score_model_data(&mut rng, 50_000, base);
    let model = fit_eta_logistic(&train).unwrap();
    let law = EtaSample::new(&model.eta_of(&train).unwrap(), &train.binary_groups().unwrap()).unwrap();
    // two samples of 25k rows never share an empirical ROC curve exactly
    let opts = SolveOptions {
        tolerance: 0.01,
        ..SolveOptions::default()
    };
    let sol = solve_theta(&law, model.priors, &opts).unwrap();
    let g = sol.classifier(model.priors);

    let test = common::score_model_data(&mut rng, 50_000, base);
    let eta = model.eta_of(&test).unwrap();
    let (s, y) = (test.binary_groups().unwrap(), test.binary_target().unwrap());
    let mut counts = [[[0usize; 2]; 2]; 2]; // [s][y][accepted]
    for i in 0..test.n_rows() {
        counts[s[i] as usize][y[i] as usize][usize::from(g.decide(eta[i], s[i] as usize))] += 1;
    }
    let rate = |s: usize, y: usize| counts[s][y][1] as f64 / (counts[s][y][0] + counts[s][y][1]) as f64;
    let (tpr_gap, fpr_gap) = (rate(1, 1) - rate(0, 1), rate(1, 0) - rate(0, 0));
    assert!(tpr_gap.abs() <= 0.02 && fpr_gap.abs() <= 0.02, "{tpr_gap} {fpr_gap}");

    // the unadjusted rule is far from equal odds here
    let bayes = group_rates(&bayes_classifier(model.priors), &law, &model.priors);
    assert!((bayes.tpr[1] - bayes.tpr[0]).abs() > 0.05);
}

#[test]
fn recalibrated_rule_dominates_enumerated_fair_rules() {
    let mut rng = common::rng(42);
    for case in 0..40 {
        let atoms = common::lattice_atoms(&mut rng, 7);
        let priors = priors_of(&atoms, 0.5);
        let law = JitteredAtoms::new(atoms.clone(), 0.01).unwrap();
        let sol = solve_theta(&law, priors, &SolveOptions::default()).unwrap();
        if let Some(best) = common::best_fair_enumerated(&atoms, 0.5, 1e-9) {
            assert!(sol.risk <= best + 1e-9, "case {case}: {} > {best}", sol.risk);
        }
        // rules with gaps up to eps can undercut by at most the multipliers times eps
        let eps = 0.01;
        let slack = (sol.theta.theta0.abs() + sol.theta.theta1.abs()) * eps;
        if let Some(best) = common::best_fair_enumerated(&atoms, 0.5, eps) {
            assert!(
                sol.risk <= best + slack + 1e-9,
                "case {case}: {} > {best} + {slack}",
                sol.risk
            );
        }
    }
}

#[test]
fn interior_rates_pin_one_group_to_an_interval() {
    // group 1 scores are more informative, so matching group 0 needs an
    // operating point strictly inside group 1's ROC region
    let atoms = [
        vec![(0.3, 0.25), (0.45, 0.25), (0.55, 0.25), (0.7, 0.25)],
        vec![(0.05, 0.25), (0.35, 0.25), (0.65, 0.25), (0.95, 0.25)],
    ];
    let priors = priors_of(&atoms, 0.5);
    let law = JitteredAtoms::new(atoms, 0.02).unwrap();
    let sol = solve_theta(&law, priors, &SolveOptions::default()).unwrap();
    assert!(sol.max_residual() < 1e-9);
    let pinned = sol.pinned.expect("interior operating point");
    assert_eq!(pinned.group, 1);
    assert!(matches!(pinned.region, AcceptRegion::Between(..)));
    let g = sol.classifier(priors);
    let (a, b) = moment_residuals(&g, &law, &priors);
    assert!(a.abs() < 1e-9 && b.abs() < 1e-9);
}

#[test]
fn zero_theta_thresholds_at_one_half() {
    let priors = GroupPriors::from_base_rates(0.3, [0.2, 0.7]).unwrap();
    let g = recalibrated_classifier(priors, ThetaPair::new(0.0, 0.0));
    for k in 0..=1000 {
        let eta = k as f64 / 1000.0;
        for s in 0..2 {
            assert_eq!(g.decide(eta, s), eta >= 0.5);
        }
    }
}

#[test]
fn rate_only_slice_has_closed_form_thresholds() {
    // theta0 = 0: group 1 accepts eta >= p11 / (2 p11 - theta1),
    // group 0 accepts eta >= p10 / (2 p10 + theta1)
    let priors = GroupPriors::from_base_rates(0.4, [0.3, 0.6]).unwrap();
    let (p10, p11) = (priors.joint[1][0], priors.joint[1][1]);
    for theta1 in [-0.3, -0.1, 0.05, 0.2] {
        let g = recalibrated_classifier(priors, ThetaPair::new(0.0, theta1));
        let t1 = p11 / (2.0 * p11 - theta1);
        let t0 = p10 / (2.0 * p10 + theta1);
        match (g.region(1), g.region(0)) {
            (AcceptRegion::AtLeast(a), AcceptRegion::AtLeast(b)) => {
                assert!((a - t1).abs() < 1e-12 && (b - t0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn residuals_move_against_their_multipliers() {
    let mut rng = common::rng(43);
    let atoms = common::lattice_atoms(&mut rng, 7);
    let priors = priors_of(&atoms, 0.4);
    let law = JitteredAtoms::new(atoms, 0.02).unwrap();
    let grid: Vec<f64> = (-20..=20).map(|k| k as f64 * 0.01).collect();
    let tpr_gaps: Vec<f64> = grid
        .iter()
        .map(|&t| moment_residuals(&recalibrated_classifier(priors, ThetaPair::new(0.0, t)), &law, &priors).0)
        .collect();
    assert!(tpr_gaps.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    let fpr_gaps: Vec<f64> = grid
        .iter()
        .map(|&t| moment_residuals(&recalibrated_classifier(priors, ThetaPair::new(t, 0.0)), &law, &priors).1)
        .collect();
    assert!(fpr_gaps.windows(2).all(|w| w[1] >= w[0] - 1e-15));
}

#[test]
fn solution_has_the_smallest_residual_among_informative_grid_rules() {
    let mut rng = common::rng(44);
    let (law, priors, sol) = loop {
        let atoms = common::lattice_atoms(&mut rng, 7);
        let priors = priors_of(&atoms, 0.5);
        let law = JitteredAtoms::new(atoms, 0.01).unwrap();
        if let Ok(sol) = solve_theta(&law, priors, &SolveOptions::default()) {
            break (law, priors, sol);
        }
    };
    let trivial = |r: AcceptRegion| matches!(r, AcceptRegion::All | AcceptRegion::Nothing);
    let mut compared = 0;
    for i in -40..=40 {
        for j in -40..=40 {
            let g = recalibrated_classifier(priors, ThetaPair::new(i as f64 * 0.05, j as f64 * 0.05));
            let (lo, hi) = [0, 1].map(|s| law_acceptance(&g, &law, &priors, s)).into();
            if trivial(g.region(0)) || trivial(g.region(1)) || lo <= 0.0 || hi <= 0.0 {
                continue;
            }
            let (a, b) = moment_residuals(&g, &law, &priors);
            assert!(sol.max_residual() <= a.abs().max(b.abs()) + 1e-12);
            compared += 1;
        }
    }
    assert!(compared > 100);
    assert!(sol.risk >= risk_of(&bayes_classifier(priors), &law, &priors) - 1e-12);
}

fn law_acceptance(g: &impl Classifier, law: &JitteredAtoms, priors: &GroupPriors, s: usize) -> f64 {
    group_rates(g, law, priors).acceptance[s]
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = common::rng(45);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| (0..3).map(|_| common::normal(&mut rng)).collect())
        .collect();
    let y: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(r[0] - 0.5 * r[2] + common::normal(&mut rng) > 0.0))
        .collect();
    let params = [0.3, -0.2, 0.7, 0.1];
    let grad = log_loss_gradient(&params, &rows, &y);
    let h = 1e-6;
    for k in 0..params.len() {
        let (mut up, mut down) = (params, params);
        up[k] += h;
        down[k] -= h;
        let fd = (log_loss(&up, &rows, &y) - log_loss(&down, &rows, &y)) / (2.0 * h);
        assert!((fd - grad[k]).abs() < 1e-7, "{k}: {fd} vs {}", grad[k]);
    }
}

#[test]
fn logistic_fit_zeroes_the_gradient() {
    let mut rng = common::rng(46);
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| vec![common::normal(&mut rng), rng.random_range(0.0..4.0)])
        .collect();
    let y: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-(r[0] + r[1] - 2.0)).exp())))
        .collect();
    let fit = fit_logistic_group(&rows, &y).unwrap();
    // the fit is in standardized coordinates; map back and check the raw gradient
    let w: Vec<f64> = (0..2).map(|j| fit.weights[j] / fit.scale[j]).collect();
    let b = fit.bias - (0..2).map(|j| w[j] * fit.mean[j]).sum::<f64>();
    let grad = log_loss_gradient(&[w[0], w[1], b], &rows, &y);
    assert!(grad.iter().all(|g| g.abs() < 1e-6), "{grad:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn solved_rule_is_fair_and_no_better_than_bayes(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let atoms = common::lattice_atoms(&mut rng, 5);
        let priors = priors_of(&atoms, 0.5);
        let law = JitteredAtoms::new(atoms, 0.02).unwrap();
        if let Ok(sol) = solve_theta(&law, priors, &SolveOptions::default()) {
            let (a, b) = moment_residuals(&sol.classifier(priors), &law, &priors);
            prop_assert!(a.abs() <= 1e-3 && b.abs() <= 1e-3);
            prop_assert!(sol.risk >= risk_of(&bayes_classifier(priors), &law, &priors) - 1e-12);
        }
    }
}
