use rayon::prelude::*;
use serde::Serialize;

use super::classifier::{recalibrated_classifier, AcceptRegion, Classifier, PinnedGroup, RecalibratedClassifier};
use super::law::EtaLaw;
use super::{GroupPriors, ThetaPair};
use crate::error::{Error, Result};

/// Per-group rates of a score-based classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroupRates {
    pub tpr: [f64; 2],
    pub fpr: [f64; 2],
    pub acceptance: [f64; 2],
}

/// `TPR_s = E[eta g | s] / P(Y=1 | s)`, `FPR_s = E[(1 - eta) g | s] / P(Y=0 | s)`.
pub fn group_rates(g: &impl Classifier, law: &impl EtaLaw, priors: &GroupPriors) -> GroupRates {
    let mut out = GroupRates {
        tpr: [0.0; 2],
        fpr: [0.0; 2],
        acceptance: [0.0; 2],
    };
    for s in 0..2 {
        let (eg, eeta) = law.region_moments(s, g.region(s));
        out.tpr[s] = eeta / priors.p_y_given_s(1, s);
        out.fpr[s] = (eg - eeta) / priors.p_y_given_s(0, s);
        out.acceptance[s] = eg;
    }
    out
}

/// `(TPR_1 - TPR_0, FPR_1 - FPR_0)`: the two rate conditions as residuals.
pub fn moment_residuals(g: &impl Classifier, law: &impl EtaLaw, priors: &GroupPriors) -> (f64, f64) {
    let r = group_rates(g, law, priors);
    (r.tpr[1] - r.tpr[0], r.fpr[1] - r.fpr[0])
}

/// Misclassification probability,
/// `P(Y=1) - sum_s P(S=s) E[(2 eta - 1) g | S=s]`.
pub fn risk_of(g: &impl Classifier, law: &impl EtaLaw, priors: &GroupPriors) -> f64 {
    let mut risk = priors.p_y(1);
    for s in 0..2 {
        let (eg, eeta) = law.region_moments(s, g.region(s));
        risk -= priors.p_s(s) * (2.0 * eeta - eg);
    }
    risk
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    /// Half width of the initial square `[-r, r]^2`.
    pub radius: f64,
    /// Grid points per axis.
    pub grid: usize,
    /// Times the square may double when the best grid point is on its edge.
    pub max_doublings: u32,
    /// Pattern search stops once the step falls below this.
    pub min_step: f64,
    /// Largest accepted `max(|TPR gap|, |FPR gap|)`.
    pub tolerance: f64,
    /// Largest accepted probability of a single score value within a group.
    pub max_atom: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            radius: 2.0,
            grid: 81,
            max_doublings: 3,
            min_step: 1e-6,
            tolerance: 1e-3,
            max_atom: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaSolution {
    pub theta: ThetaPair,
    pub tpr_residual: f64,
    pub fpr_residual: f64,
    pub risk: f64,
    /// Radius of the last grid searched.
    pub radius: f64,
    /// Set when the optimum needs a group whose statistic is constant at `theta`.
    pub pinned: Option<PinnedGroup>,
}

impl ThetaSolution {
    pub fn max_residual(&self) -> f64 {
        self.tpr_residual.abs().max(self.fpr_residual.abs())
    }

    pub fn classifier(&self, priors: GroupPriors) -> RecalibratedClassifier {
        RecalibratedClassifier {
            pinned: self.pinned,
            ..recalibrated_classifier(priors, self.theta)
        }
    }
}

/// Halvings per bisection; the bracket shrinks below `1e-15` of its width.
const BISECTION_STEPS: usize = 52;

/// Distance from a degenerate point, relative to the priors.
const PENCIL_STEP: f64 = 1e-7;

struct Problem<'a, L> {
    law: &'a L,
    priors: GroupPriors,
}

#[derive(Clone, Copy)]
struct Eval {
    theta: ThetaPair,
    residuals: (f64, f64),
    risk: f64,
    /// Lagrangian `risk + theta1 (TPR gap) - theta0 (FPR gap)` at its minimizer.
    dual: f64,
    pinned: Option<PinnedGroup>,
}

impl Eval {
    fn max_residual(&self) -> f64 {
        self.residuals.0.abs().max(self.residuals.1.abs())
    }
}

impl<L: EtaLaw + Sync> Problem<'_, L> {
    fn eval(&self, theta: ThetaPair) -> Eval {
        self.eval_pinned(theta, None)
    }

    fn eval_pinned(&self, theta: ThetaPair, pinned: Option<PinnedGroup>) -> Eval {
        let g = RecalibratedClassifier {
            pinned,
            ..recalibrated_classifier(self.priors, theta)
        };
        let residuals = moment_residuals(&g, self.law, &self.priors);
        let risk = risk_of(&g, self.law, &self.priors);
        Eval {
            theta,
            residuals,
            risk,
            dual: risk + theta.theta1 * residuals.0 - theta.theta0 * residuals.1,
            pinned,
        }
    }

    /// `(TPR, FPR)` of group `s` when it accepts `region`.
    fn rates(&self, s: usize, region: AcceptRegion) -> (f64, f64) {
        let (eg, eeta) = self.law.region_moments(s, region);
        (
            eeta / self.priors.p_y_given_s(1, s),
            (eg - eeta) / self.priors.p_y_given_s(0, s),
        )
    }

    /// At the point where group `s` has a constant statistic every rule of
    /// that group minimizes the Lagrangian. Pin it to an interval of scores
    /// reproducing the other group's rates there: for each lower end `a` the
    /// upper end matches the true positive rate, and lowering `a` trades in
    /// low scores, which raises the false positive rate.
    fn pinned_interval(&self, s: usize) -> Option<Eval> {
        let j = &self.priors.joint;
        let center = if s == 1 {
            ThetaPair::new(j[0][1], j[1][1])
        } else {
            ThetaPair::new(-j[0][0], -j[1][0])
        };
        let other = 1 - s;
        let (tpr, fpr) = self.rates(other, recalibrated_classifier(self.priors, center).region(other));

        let upper_end = |a: f64| {
            let (mut lo, mut hi) = (a, 1.0);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if self.rates(s, AcceptRegion::Between(a, mid)).0 >= tpr {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        if self.rates(s, AcceptRegion::Between(0.0, 1.0)).0 < tpr {
            return None;
        }
        // largest lower end that can still reach the rate
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.rates(s, AcceptRegion::Between(mid, 1.0)).0 >= tpr {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (mut a_lo, mut a_hi) = (0.0, lo);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (a_lo + a_hi);
            if self.rates(s, AcceptRegion::Between(mid, upper_end(mid))).1 > fpr {
                a_lo = mid;
            } else {
                a_hi = mid;
            }
        }
        let region = |a: f64| {
            let b = upper_end(a);
            if b >= 1.0 {
                AcceptRegion::AtLeast(a)
            } else {
                AcceptRegion::Between(a, b)
            }
        };
        [a_lo, a_hi]
            .into_iter()
            .map(|a| {
                self.eval_pinned(
                    center,
                    Some(PinnedGroup {
                        group: s,
                        region: region(a),
                    }),
                )
            })
            .min_by(|x, y| x.max_residual().total_cmp(&y.max_residual()))
    }

    fn grid(&self, radius: f64, n: usize) -> Vec<Eval> {
        let step = 2.0 * radius / (n - 1) as f64;
        (0..n * n)
            .into_par_iter()
            .map(|k| {
                let t0 = -radius + (k / n) as f64 * step;
                let t1 = -radius + (k % n) as f64 * step;
                self.eval(ThetaPair::new(t0, t1))
            })
            .collect()
    }

    /// Compass search maximizing the dual.
    fn pattern_search(&self, start: Eval, mut step: f64, min_step: f64) -> Eval {
        const DIRS: [(f64, f64); 8] = [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
        ];
        let mut best = start;
        while step >= min_step {
            let improved = DIRS
                .iter()
                .map(|(d0, d1)| {
                    self.eval(ThetaPair::new(
                        best.theta.theta0 + d0 * step,
                        best.theta.theta1 + d1 * step,
                    ))
                })
                .filter(|e| e.dual > best.dual)
                .max_by(|a, b| a.dual.total_cmp(&b.dual));
            match improved {
                Some(e) => best = e,
                None => step /= 2.0,
            }
        }
        best
    }

    /// Maximize the dual on `[-r, r]^2` by nested bisection. The dual is
    /// concave with supergradient `(-FPR gap, TPR gap)`, so for fixed `theta0`
    /// the best `theta1` is where the TPR gap changes sign, and the
    /// partially maximized dual is concave in `theta0` with slope `-FPR gap`.
    fn nested_bisection(&self, radius: f64) -> Eval {
        let inner = |theta0: f64| {
            let (mut lo, mut hi) = (-radius, radius);
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (lo + hi);
                if self.eval(ThetaPair::new(theta0, mid)).residuals.0 > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (a, b) = (
                self.eval(ThetaPair::new(theta0, lo)),
                self.eval(ThetaPair::new(theta0, hi)),
            );
            if a.residuals.0.abs() <= b.residuals.0.abs() {
                a
            } else {
                b
            }
        };
        let (mut lo, mut hi) = (-radius, radius);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if inner(mid).residuals.1 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (inner(lo), inner(hi));
        if a.max_residual() <= b.max_residual() {
            a
        } else {
            b
        }
    }

    /// Rules approaching the point where group `s` has a constant acceptance
    /// statistic, `(p_01, p_11)` for group 1 and `(-p_00, -p_10)` for group 0.
    /// There every rule of group `s` minimizes the Lagrangian, and the
    /// direction of approach sets its threshold `t`: group `s` accepts
    /// `eta >= t` at `theta = center + PENCIL_STEP * d(t)`. Both gaps move in
    /// the same direction with `t`, so the larger gap is smallest where their
    /// sum changes sign.
    fn pencil_limit(&self, s: usize) -> Eval {
        let j = &self.priors.joint;
        let at = |t: f64| {
            let theta = if s == 1 {
                ThetaPair::new(
                    j[0][1] - PENCIL_STEP * t * j[0][1],
                    j[1][1] - PENCIL_STEP * (1.0 - t) * j[1][1],
                )
            } else {
                ThetaPair::new(
                    -j[0][0] + PENCIL_STEP * t * j[0][0],
                    -j[1][0] + PENCIL_STEP * (1.0 - t) * j[1][0],
                )
            };
            self.eval(theta)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        let sum = |e: Eval| e.residuals.0 + e.residuals.1;
        let rising = sum(at(hi)) > sum(at(lo));
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if (sum(at(mid)) > 0.0) == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (a, b) = (at(lo), at(hi));
        if a.max_residual() <= b.max_residual() {
            a
        } else {
            b
        }
    }

    /// Damped Newton on the residual system with a finite-difference Jacobian.
    fn polish(&self, start: Eval) -> Eval {
        let mut best = start;
        for _ in 0..40 {
            if best.max_residual() < 1e-14 {
                break;
            }
            let ThetaPair { theta0, theta1 } = best.theta;
            let h = 1e-7 * (1.0 + theta0.abs().max(theta1.abs()));
            let col = |d0: f64, d1: f64| {
                let p = self.eval(ThetaPair::new(theta0 + d0, theta1 + d1)).residuals;
                let m = self.eval(ThetaPair::new(theta0 - d0, theta1 - d1)).residuals;
                ((p.0 - m.0) / (2.0 * h), (p.1 - m.1) / (2.0 * h))
            };
            let (a, c) = col(h, 0.0);
            let (b, d) = col(0.0, h);
            let det = a * d - b * c;
            if !(det.abs() > 1e-300) || !det.is_finite() {
                break;
            }
            let (r0, r1) = best.residuals;
            let dt0 = -(d * r0 - b * r1) / det;
            let dt1 = -(-c * r0 + a * r1) / det;
            let mut scale = 1.0;
            let mut moved = false;
            for _ in 0..30 {
                let trial = self.eval(ThetaPair::new(theta0 + scale * dt0, theta1 + scale * dt1));
                if trial.max_residual() < best.max_residual() {
                    best = trial;
                    moved = true;
                    break;
                }
                scale /= 2.0;
            }
            if !moved {
                break;
            }
        }
        best
    }
}

/// Find `theta` for which the recalibrated rule has equal TPR and equal FPR
/// across the two groups.
///
/// The search maximizes the concave dual `theta -> min_g L(g, theta)`, whose
/// minimizer for each `theta` is the recalibrated rule: coarse grid (doubling
/// the square while the best point sits on its edge), compass search from the
/// best grid points, and nested bisection over the final square, each
/// followed by Newton on the residuals. When the dual peaks where one group's
/// acceptance statistic is constant, that group may need a rule outside the
/// threshold family: a threshold reached by approaching the point along the
/// right direction, or an interval of scores pinned at the point. Maximizing the dual rather
/// than shrinking residuals directly avoids the trivial accept-all and
/// reject-all rules, which satisfy both conditions for a whole region of
/// `theta`.
pub fn solve_theta(law: &(impl EtaLaw + Sync), priors: GroupPriors, opts: &SolveOptions) -> Result<ThetaSolution> {
    if opts.grid < 3 || !(opts.radius > 0.0) || !(opts.min_step > 0.0) {
        return Err(Error::invalid(
            "theta search needs a grid of at least 3 points and positive radius/step",
        ));
    }
    for s in 0..2 {
        let atom = law.largest_atom(s);
        if atom > opts.max_atom {
            return Err(Error::AssumptionViolation {
                group: s,
                atom_mass: atom,
            });
        }
    }
    let problem = Problem { law, priors };

    let mut radius = opts.radius;
    let mut grid;
    let mut doublings = 0;
    loop {
        grid = problem.grid(radius, opts.grid);
        let best = grid.iter().max_by(|a, b| a.dual.total_cmp(&b.dual)).unwrap();
        let on_edge = best.theta.theta0.abs() >= radius - 1e-12 || best.theta.theta1.abs() >= radius - 1e-12;
        if !on_edge || doublings >= opts.max_doublings {
            break;
        }
        radius *= 2.0;
        doublings += 1;
    }

    let spacing = 2.0 * radius / (opts.grid - 1) as f64;
    let mut starts = grid.clone();
    starts.sort_by(|a, b| b.dual.total_cmp(&a.dual));
    let compass = starts
        .iter()
        .take(3)
        .map(|&e| problem.pattern_search(e, spacing, opts.min_step))
        .max_by(|a, b| a.dual.total_cmp(&b.dual))
        .unwrap();
    let mut candidates = vec![
        problem.polish(compass),
        problem.polish(problem.nested_bisection(radius)),
        problem.pencil_limit(0),
        problem.pencil_limit(1),
    ];
    candidates.extend((0..2).filter_map(|s| problem.pinned_interval(s)));
    // every candidate minimizes the Lagrangian at its theta, so a fair one is
    // optimal up to the tolerance; prefer the lowest risk among fair ones
    let best = candidates
        .iter()
        .copied()
        .filter(|e| e.max_residual() <= opts.tolerance)
        .min_by(|a, b| a.risk.total_cmp(&b.risk))
        .unwrap_or_else(|| {
            candidates
                .into_iter()
                .min_by(|a, b| a.max_residual().total_cmp(&b.max_residual()))
                .unwrap()
        });

    if best.max_residual() > opts.tolerance {
        return Err(Error::ThetaNotFound {
            theta0: best.theta.theta0,
            theta1: best.theta.theta1,
            tpr_residual: best.residuals.0,
            fpr_residual: best.residuals.1,
        });
    }
    Ok(ThetaSolution {
        theta: best.theta,
        tpr_residual: best.residuals.0,
        fpr_residual: best.residuals.1,
        risk: best.risk,
        radius,
        pinned: best.pinned,
    })
}
