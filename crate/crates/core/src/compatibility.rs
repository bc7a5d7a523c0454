//! Which fairness criteria can hold at the same time.
//!
//! Works on exact joint distributions of `(Y, Yhat, S)` over `{0,1}^3`.
//! Three results are certified here:
//!
//! * statistical parity and equalized odds hold together only when `S` is
//!   independent of `Y` or the prediction carries no information (`TPR = FPR`);
//! * statistical parity and predictive parity (`Y ⊥ S | Yhat`) hold together
//!   only when `S` is independent of `Y` (the PPV-only variant can hold with
//!   unequal base rates, given `TPR_0 / TPR_1 = base_1 / base_0`);
//! * equalized odds and predictive parity hold together only when `S` is
//!   independent of `Y`, apart from perfect (or perfectly inverted) prediction.
//!
//! The search enumerates a lattice over the probability simplex; it certifies
//! at the lattice resolution, it does not prove anything in between.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Probability mass over the eight cells `(y, yhat, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointPmf {
    /// `p[y][yhat][s]`
    p: [[[f64; 2]; 2]; 2],
}

/// Cell order used by [`JointPmf::from_cells`] and [`JointPmf::cells`]:
/// lexicographic in `(y, yhat, s)`.
pub const CELL_ORDER: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (0, 0, 1),
    (0, 1, 0),
    (0, 1, 1),
    (1, 0, 0),
    (1, 0, 1),
    (1, 1, 0),
    (1, 1, 1),
];

impl JointPmf {
    pub fn new(p: [[[f64; 2]; 2]; 2]) -> Result<Self> {
        let flat = p.iter().flatten().flatten();
        let mut total = 0.0;
        for &v in flat {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid("cell probabilities must be nonnegative"));
            }
            total += v;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("cell probabilities sum to {total}, not 1")));
        }
        Ok(Self { p })
    }

    pub fn from_cells(cells: [f64; 8]) -> Result<Self> {
        let mut p = [[[0.0; 2]; 2]; 2];
        for (&(y, yh, s), v) in CELL_ORDER.iter().zip(cells) {
            p[y][yh][s] = v;
        }
        Self::new(p)
    }

    /// Build from `P(S=1)`, base rates `P(Y=1|S=s)` and per-group `(TPR_s, FPR_s)`.
    pub fn from_rates(p_s1: f64, base: [f64; 2], tpr: [f64; 2], fpr: [f64; 2]) -> Result<Self> {
        let mut p = [[[0.0; 2]; 2]; 2];
        for s in 0..2 {
            let ps = if s == 1 { p_s1 } else { 1.0 - p_s1 };
            p[1][1][s] = ps * base[s] * tpr[s];
            p[1][0][s] = ps * base[s] * (1.0 - tpr[s]);
            p[0][1][s] = ps * (1.0 - base[s]) * fpr[s];
            p[0][0][s] = ps * (1.0 - base[s]) * (1.0 - fpr[s]);
        }
        Self::new(p)
    }

    pub fn cells(&self) -> [f64; 8] {
        CELL_ORDER.map(|(y, yh, s)| self.p[y][yh][s])
    }

    pub fn get(&self, y: usize, yhat: usize, s: usize) -> f64 {
        self.p[y][yhat][s]
    }

    /// The same distribution with the two sensitive groups swapped.
    pub fn swap_groups(&self) -> Self {
        let mut p = self.p;
        for y in 0..2 {
            for yh in 0..2 {
                p[y][yh].swap(0, 1);
            }
        }
        Self { p }
    }

    pub fn p_s(&self, s: usize) -> f64 {
        (0..2)
            .flat_map(|y| (0..2).map(move |yh| (y, yh)))
            .map(|(y, yh)| self.p[y][yh][s])
            .sum()
    }

    fn p_ys(&self, y: usize, s: usize) -> f64 {
        self.p[y][0][s] + self.p[y][1][s]
    }

    fn p_yhat_s(&self, yh: usize, s: usize) -> f64 {
        self.p[0][yh][s] + self.p[1][yh][s]
    }

    fn ratio(num: f64, den: f64) -> Option<f64> {
        (den > 0.0).then(|| num / den)
    }

    /// `P(Y=1 | S=s)`
    pub fn base_rate(&self, s: usize) -> Option<f64> {
        Self::ratio(self.p_ys(1, s), self.p_s(s))
    }

    /// `P(Yhat=1 | S=s)`
    pub fn positive_rate(&self, s: usize) -> Option<f64> {
        Self::ratio(self.p_yhat_s(1, s), self.p_s(s))
    }

    /// `P(Yhat=1 | Y=1, S=s)`
    pub fn tpr(&self, s: usize) -> Option<f64> {
        Self::ratio(self.p[1][1][s], self.p_ys(1, s))
    }

    /// `P(Yhat=1 | Y=0, S=s)`
    pub fn fpr(&self, s: usize) -> Option<f64> {
        Self::ratio(self.p[0][1][s], self.p_ys(0, s))
    }

    /// `P(Y=1 | Yhat=1, S=s)`
    pub fn ppv(&self, s: usize) -> Option<f64> {
        Self::ratio(self.p[1][1][s], self.p_yhat_s(1, s))
    }

    /// `P(Y=1 | Yhat=0, S=s)`, i.e. one minus the negative predictive value.
    pub fn false_omission_rate(&self, s: usize) -> Option<f64> {
        Self::ratio(self.p[1][0][s], self.p_yhat_s(0, s))
    }
}

/// Fairness criteria on a joint distribution with binary `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `Yhat ⊥ S`
    StatisticalParity,
    /// `Yhat ⊥ S | Y`
    EqualizedOdds,
    /// `Y ⊥ S | Yhat` (equal PPV and equal NPV)
    PredictiveParity,
    /// Equal PPV only.
    PositivePredictiveParity,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sp" | "statistical_parity" => Ok(Self::StatisticalParity),
            "eo" | "equalized_odds" => Ok(Self::EqualizedOdds),
            "pp" | "predictive_parity" => Ok(Self::PredictiveParity),
            "ppv" | "positive_predictive_parity" => Ok(Self::PositivePredictiveParity),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    /// A conditioning event has probability zero.
    Vacuous,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CriteriaFlags {
    pub statistical_parity: Verdict,
    pub equalized_odds: Verdict,
    pub predictive_parity: Verdict,
    pub positive_predictive_parity: Verdict,
}

impl CriteriaFlags {
    pub fn get(&self, c: Criterion) -> Verdict {
        match c {
            Criterion::StatisticalParity => self.statistical_parity,
            Criterion::EqualizedOdds => self.equalized_odds,
            Criterion::PredictiveParity => self.predictive_parity,
            Criterion::PositivePredictiveParity => self.positive_predictive_parity,
        }
    }
}

/// All gaps `|a_0 - a_1|` within `tol`, or vacuous if any conditional is undefined.
fn equal_across_groups(tol: f64, rates: &[fn(&JointPmf, usize) -> Option<f64>], j: &JointPmf) -> Verdict {
    let mut all_close = true;
    for rate in rates {
        match (rate(j, 0), rate(j, 1)) {
            (Some(a), Some(b)) => all_close &= (a - b).abs() <= tol,
            _ => return Verdict::Vacuous,
        }
    }
    if all_close {
        Verdict::Holds
    } else {
        Verdict::Fails
    }
}

pub fn criteria_satisfied(j: &JointPmf, tol: f64) -> CriteriaFlags {
    CriteriaFlags {
        statistical_parity: equal_across_groups(tol, &[JointPmf::positive_rate], j),
        equalized_odds: equal_across_groups(tol, &[JointPmf::tpr, JointPmf::fpr], j),
        predictive_parity: equal_across_groups(tol, &[JointPmf::ppv, JointPmf::false_omission_rate], j),
        positive_predictive_parity: equal_across_groups(tol, &[JointPmf::ppv], j),
    }
}

/// A group base rate recovered from `(TPR, FPR, PPV)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpliedBaseRate<T> {
    Value(T),
    /// `0/0`: happens under perfect prediction, where the rates say nothing
    /// about the base rate.
    Indeterminate,
}

/// `PPV·FPR / (PPV·FPR + (1 - PPV)·TPR)`, exact in any field.
pub fn implied_base_rate<T>(tpr: T, fpr: T, ppv: T) -> ImpliedBaseRate<T>
where
    T: num_traits::Num + Clone,
{
    let num = ppv.clone() * fpr;
    let den = num.clone() + (T::one() - ppv) * tpr;
    if den.is_zero() {
        ImpliedBaseRate::Indeterminate
    } else {
        ImpliedBaseRate::Value(num / den)
    }
}

/// Implied base rates of both groups from per-group `(tpr, fpr, ppv)`.
pub fn base_rate_identities<T>(rates: [(T, T, T); 2]) -> [ImpliedBaseRate<T>; 2]
where
    T: num_traits::Num + Clone,
{
    rates.map(|(t, f, p)| implied_base_rate(t, f, p))
}

/// Why a witness does not count against an incompatibility result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// `TPR_s = FPR_s` in every group: the prediction ignores `Y`.
    PredictionIndependentOfTarget,
    /// `Yhat = Y` or `Yhat = 1 - Y` almost surely in every group.
    PerfectPrediction,
}

impl Degeneracy {
    pub fn describe(self) -> &'static str {
        match self {
            Degeneracy::PredictionIndependentOfTarget => "requires TPR=FPR",
            Degeneracy::PerfectPrediction => "requires perfect prediction (TPR, FPR) in {(1,0), (0,1)}",
        }
    }
}

pub fn degeneracy(j: &JointPmf, tol: f64) -> Option<Degeneracy> {
    let rates: Vec<(Option<f64>, Option<f64>)> = (0..2).map(|s| (j.tpr(s), j.fpr(s))).collect();
    let independent = rates.iter().all(|r| match r {
        (Some(t), Some(f)) => (t - f).abs() <= tol,
        _ => false,
    });
    if independent {
        return Some(Degeneracy::PredictionIndependentOfTarget);
    }
    let near = |a: f64, b: f64| (a - b).abs() <= tol;
    let perfect = rates.iter().all(|r| match *r {
        (Some(t), Some(f)) => (near(t, 1.0) && near(f, 0.0)) || (near(t, 0.0) && near(f, 1.0)),
        _ => false,
    });
    perfect.then_some(Degeneracy::PerfectPrediction)
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    /// Cell probabilities in [`CELL_ORDER`].
    pub cells: [f64; 8],
    pub flags: CriteriaFlags,
    pub base_rates: [f64; 2],
    pub base_rate_gap: f64,
    pub tpr: [Option<f64>; 2],
    pub fpr: [Option<f64>; 2],
    pub degeneracy: Option<Degeneracy>,
}

impl Witness {
    fn of(j: &JointPmf, tol: f64) -> Option<Self> {
        let b0 = j.base_rate(0)?;
        let b1 = j.base_rate(1)?;
        Some(Self {
            cells: j.cells(),
            flags: criteria_satisfied(j, tol),
            base_rates: [b0, b1],
            base_rate_gap: (b0 - b1).abs(),
            tpr: [j.tpr(0), j.tpr(1)],
            fpr: [j.fpr(0), j.fpr(1)],
            degeneracy: degeneracy(j, tol),
        })
    }

    /// Largest `|TPR_s - FPR_s|` over groups.
    pub fn max_tpr_fpr_separation(&self) -> f64 {
        (0..2)
            .filter_map(|s| Some((self.tpr[s]? - self.fpr[s]?).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Every pmf whose cells are multiples of `1 / divisions`.
    Grid { divisions: u32 },
    /// Uniform draws from the simplex.
    Random { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub pair: [Criterion; 2],
    pub min_base_rate_gap: f64,
    pub strategy: SearchStrategy,
    pub examined: u64,
    /// Pmfs satisfying both criteria, any base-rate gap.
    pub witnesses: u64,
    /// Witnesses whose base-rate gap reaches the requested minimum.
    pub qualifying: u64,
    pub qualifying_degenerate: u64,
    /// Largest base-rate gap over non-degenerate witnesses.
    pub max_nondegenerate_gap: f64,
    /// Largest `|TPR - FPR|` over qualifying witnesses.
    pub max_qualifying_tpr_fpr_separation: f64,
    /// First non-degenerate qualifying witness in lattice order.
    pub witness: Option<Witness>,
    /// First degenerate qualifying witness, showing what the escape requires.
    pub degenerate_example: Option<Witness>,
    /// No non-degenerate qualifying witness exists at this resolution.
    pub certified_empty: bool,
}

#[derive(Debug, Clone, Default)]
struct Tally {
    examined: u64,
    witnesses: u64,
    qualifying: u64,
    qualifying_degenerate: u64,
    max_nondegenerate_gap: f64,
    max_separation: f64,
    witness: Option<Witness>,
    degenerate_example: Option<Witness>,
}

impl Tally {
    fn visit(&mut self, j: &JointPmf, pair: [Criterion; 2], gap: f64, tol: f64) {
        self.examined += 1;
        let flags = criteria_satisfied(j, tol);
        if !(flags.get(pair[0]).holds() && flags.get(pair[1]).holds()) {
            return;
        }
        let Some(w) = Witness::of(j, tol) else { return };
        self.witnesses += 1;
        if w.degeneracy.is_none() {
            self.max_nondegenerate_gap = self.max_nondegenerate_gap.max(w.base_rate_gap);
        }
        if w.base_rate_gap + tol < gap {
            return;
        }
        self.qualifying += 1;
        self.max_separation = self.max_separation.max(w.max_tpr_fpr_separation());
        if w.degeneracy.is_some() {
            self.qualifying_degenerate += 1;
            if self.degenerate_example.is_none() {
                self.degenerate_example = Some(w);
            }
        } else if self.witness.is_none() {
            self.witness = Some(w);
        }
    }

    /// Merge a later chunk; first-found witnesses keep lattice order.
    fn merge(mut self, other: Tally) -> Tally {
        self.examined += other.examined;
        self.witnesses += other.witnesses;
        self.qualifying += other.qualifying;
        self.qualifying_degenerate += other.qualifying_degenerate;
        self.max_nondegenerate_gap = self.max_nondegenerate_gap.max(other.max_nondegenerate_gap);
        self.max_separation = self.max_separation.max(other.max_separation);
        self.witness = self.witness.or(other.witness);
        self.degenerate_example = self.degenerate_example.or(other.degenerate_example);
        self
    }
}

/// Visit every composition of `total` into `parts` nonnegative integers, lexicographically.
fn for_each_composition(prefix: &mut Vec<u32>, remaining: u32, parts: usize, f: &mut impl FnMut(&[u32])) {
    if prefix.len() + 1 == parts {
        prefix.push(remaining);
        f(prefix);
        prefix.pop();
        return;
    }
    for k in 0..=remaining {
        prefix.push(k);
        for_each_composition(prefix, remaining - k, parts, f);
        prefix.pop();
    }
}

/// Look for a joint pmf satisfying both criteria in `pair` whose base rates
/// differ by at least `min_base_rate_gap`. Exact criteria are checked at `tol`.
pub fn impossibility_witness_search(
    pair: [Criterion; 2],
    min_base_rate_gap: f64,
    strategy: SearchStrategy,
    tol: f64,
) -> Result<SearchOutcome> {
    if !(0.0..1.0).contains(&min_base_rate_gap) {
        return Err(Error::invalid("base-rate gap must lie in [0, 1)"));
    }
    let tally = match strategy {
        SearchStrategy::Grid { divisions } => {
            if divisions == 0 {
                return Err(Error::invalid("grid needs at least one division"));
            }
            let d = divisions as f64;
            (0..=divisions)
                .into_par_iter()
                .map(|first| {
                    let mut tally = Tally::default();
                    let mut prefix = vec![first];
                    for_each_composition(&mut prefix, divisions - first, 8, &mut |ks| {
                        let mut cells = [0.0; 8];
                        for (c, &k) in cells.iter_mut().zip(ks) {
                            *c = k as f64 / d;
                        }
                        let j = JointPmf {
                            p: cells_to_array(cells),
                        };
                        tally.visit(&j, pair, min_base_rate_gap, tol);
                    });
                    tally
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(Tally::default(), Tally::merge)
        }
        SearchStrategy::Random { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tally = Tally::default();
            for _ in 0..samples {
                // Normalized exponentials are uniform on the simplex.
                let mut cells = [0.0; 8];
                for c in cells.iter_mut() {
                    *c = -(1.0 - rng.random::<f64>()).ln();
                }
                let total: f64 = cells.iter().sum();
                cells.iter_mut().for_each(|c| *c /= total);
                tally.visit(
                    &JointPmf {
                        p: cells_to_array(cells),
                    },
                    pair,
                    min_base_rate_gap,
                    tol,
                );
            }
            tally
        }
    };
    Ok(SearchOutcome {
        pair,
        min_base_rate_gap,
        strategy,
        examined: tally.examined,
        witnesses: tally.witnesses,
        qualifying: tally.qualifying,
        qualifying_degenerate: tally.qualifying_degenerate,
        max_nondegenerate_gap: tally.max_nondegenerate_gap,
        max_qualifying_tpr_fpr_separation: tally.max_separation,
        certified_empty: tally.witness.is_none(),
        witness: tally.witness,
        degenerate_example: tally.degenerate_example,
    })
}

fn cells_to_array(cells: [f64; 8]) -> [[[f64; 2]; 2]; 2] {
    let mut p = [[[0.0; 2]; 2]; 2];
    for (&(y, yh, s), v) in CELL_ORDER.iter().zip(cells) {
        p[y][yh][s] = v;
    }
    p
}

/// A pmf with statistical parity and equal PPV despite base rates `base`:
/// `TPR_0 / TPR_1 = base_1 / base_0`, with false positive rates chosen to
/// equalize acceptance. `tpr1` must keep `TPR_0 <= 1`.
pub fn sp_ppv_witness(p_s1: f64, base: [f64; 2], tpr1: f64, fpr1: f64) -> Result<JointPmf> {
    let tpr0 = tpr1 * base[1] / base[0];
    // base_0 tpr_0 = base_1 tpr_1, so parity needs (1-base_0) fpr_0 = (1-base_1) fpr_1
    let fpr0 = fpr1 * (1.0 - base[1]) / (1.0 - base[0]);
    if !(0.0..=1.0).contains(&tpr0) || !(0.0..=1.0).contains(&fpr0) {
        return Err(Error::invalid("rates implied by the ratio condition leave [0, 1]"));
    }
    JointPmf::from_rates(p_s1, base, [tpr0, tpr1], [fpr0, fpr1])
}
