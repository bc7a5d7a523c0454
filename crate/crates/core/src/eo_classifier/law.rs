use serde::{Deserialize, Serialize};

use super::classifier::AcceptRegion;
use crate::error::{Error, Result};

/// Per-group law of the score `eta` given `S = s`, seen through the integrals
/// the risk and the rate conditions need.
pub trait EtaLaw {
    /// `(E[g | S=s], E[eta g | S=s])` for `g = 1{eta in region}`.
    fn region_moments(&self, s: usize, region: AcceptRegion) -> (f64, f64);

    /// Largest probability carried by a single score value in group `s`.
    fn largest_atom(&self, s: usize) -> f64;
}

/// Empirical scores of each group, each row weighing `1 / n_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaSample {
    sorted: [Vec<f64>; 2],
    /// `prefix[s][k]` = sum of the `k` smallest scores.
    prefix: [Vec<f64>; 2],
}

impl EtaSample {
    pub fn new(eta: &[f64], groups: &[u8]) -> Result<Self> {
        if eta.len() != groups.len() {
            return Err(Error::LengthMismatch {
                expected: eta.len(),
                found: groups.len(),
            });
        }
        let mut sorted: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for (&e, &s) in eta.iter().zip(groups) {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid(format!("score {e} outside [0, 1]")));
            }
            match s {
                0 | 1 => sorted[s as usize].push(e),
                other => return Err(Error::NonBinaryLabel { value: other as f64 }),
            }
        }
        if sorted.iter().any(Vec::is_empty) {
            return Err(Error::invalid("both groups need at least one score"));
        }
        let prefix = sorted.each_mut().map(|v| {
            v.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(v.len() + 1);
            out.push(0.0);
            for &e in v.iter() {
                acc += e;
                out.push(acc);
            }
            out
        });
        Ok(Self { sorted, prefix })
    }

    pub fn group_size(&self, s: usize) -> usize {
        self.sorted[s].len()
    }
}

impl EtaLaw for EtaSample {
    fn region_moments(&self, s: usize, region: AcceptRegion) -> (f64, f64) {
        let v = &self.sorted[s];
        let n = v.len();
        let (lo, hi) = match region {
            AcceptRegion::All => (0, n),
            AcceptRegion::Nothing => (0, 0),
            AcceptRegion::AtLeast(t) => (v.partition_point(|&e| e < t), n),
            AcceptRegion::AtMost(t) => (0, v.partition_point(|&e| e <= t)),
            AcceptRegion::Between(a, b) => {
                let lo = v.partition_point(|&e| e < a);
                (lo, v.partition_point(|&e| e <= b).max(lo))
            }
        };
        let nf = n as f64;
        ((hi - lo) as f64 / nf, (self.prefix[s][hi] - self.prefix[s][lo]) / nf)
    }

    fn largest_atom(&self, s: usize) -> f64 {
        let v = &self.sorted[s];
        let mut best = 0usize;
        let mut run = 0usize;
        for k in 0..v.len() {
            run = if k > 0 && v[k] == v[k - 1] { run + 1 } else { 1 };
            best = best.max(run);
        }
        best as f64 / v.len() as f64
    }
}

/// Finitely many score values per group with their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    /// `atoms[s]` = `(eta, mass)` pairs, masses summing to one.
    pub atoms: [Vec<(f64, f64)>; 2],
}

impl DiscreteLaw {
    pub fn new(atoms: [Vec<(f64, f64)>; 2]) -> Result<Self> {
        for group in &atoms {
            check_atoms(group)?;
        }
        Ok(Self { atoms })
    }
}

fn check_atoms(group: &[(f64, f64)]) -> Result<()> {
    if group.is_empty() {
        return Err(Error::invalid("each group needs at least one atom"));
    }
    if group.iter().any(|&(e, m)| !(0.0..=1.0).contains(&e) || !(m >= 0.0)) {
        return Err(Error::invalid("atoms need scores in [0, 1] and nonnegative masses"));
    }
    let total: f64 = group.iter().map(|a| a.1).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("atom masses sum to {total}, not 1")));
    }
    Ok(())
}

impl EtaLaw for DiscreteLaw {
    fn region_moments(&self, s: usize, region: AcceptRegion) -> (f64, f64) {
        self.atoms[s]
            .iter()
            .filter(|&&(e, _)| region.contains(e))
            .fold((0.0, 0.0), |(g, eg), &(e, m)| (g + m, eg + e * m))
    }

    fn largest_atom(&self, s: usize) -> f64 {
        self.atoms[s].iter().map(|a| a.1).fold(0.0, f64::max)
    }
}

/// A discrete law whose atoms are spread uniformly over `[eta - h, eta + h]`.
///
/// The spread keeps each atom's mass and mean score, so any classifier that
/// is constant on atoms has the same rates and risk as under the discrete
/// law, while the law itself has no atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitteredAtoms {
    pub atoms: [Vec<(f64, f64)>; 2],
    pub half_width: f64,
}

impl JitteredAtoms {
    /// Intervals must stay inside `[0, 1]` and must not overlap within a group.
    pub fn new(atoms: [Vec<(f64, f64)>; 2], half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::invalid("half width must be positive"));
        }
        for group in &atoms {
            check_atoms(group)?;
            let mut centers: Vec<f64> = group.iter().map(|a| a.0).collect();
            centers.sort_by(f64::total_cmp);
            if centers[0] - half_width < 0.0 || centers[centers.len() - 1] + half_width > 1.0 {
                return Err(Error::invalid("spread atoms leave [0, 1]"));
            }
            if centers.windows(2).any(|w| w[1] - w[0] < 2.0 * half_width) {
                return Err(Error::invalid("spread atoms overlap"));
            }
        }
        Ok(Self { atoms, half_width })
    }

    /// Mass and score mass of `[a, b]` under one spread atom.
    fn piece(&self, center: f64, mass: f64, a: f64, b: f64) -> (f64, f64) {
        let h = self.half_width;
        let lo = a.max(center - h);
        let hi = b.min(center + h);
        if hi <= lo {
            return (0.0, 0.0);
        }
        let density = mass / (2.0 * h);
        (density * (hi - lo), density * (hi * hi - lo * lo) / 2.0)
    }
}

impl EtaLaw for JitteredAtoms {
    fn region_moments(&self, s: usize, region: AcceptRegion) -> (f64, f64) {
        let (a, b) = match region {
            AcceptRegion::All => (f64::NEG_INFINITY, f64::INFINITY),
            AcceptRegion::Nothing => return (0.0, 0.0),
            AcceptRegion::AtLeast(t) => (t, f64::INFINITY),
            AcceptRegion::AtMost(t) => (f64::NEG_INFINITY, t),
            AcceptRegion::Between(a, b) => (a, b),
        };
        self.atoms[s].iter().fold((0.0, 0.0), |(g, eg), &(c, m)| {
            let (dg, deg) = self.piece(c, m, a, b);
            (g + dg, eg + deg)
        })
    }

    fn largest_atom(&self, _s: usize) -> f64 {
        0.0
    }
}
