//! Flat metric report for a labelled, predicted dataset.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::confusion::{confusion_by_groups, GroupConfusion, Rate};
use crate::error::{Error, Result};
use crate::metrics::{self, DiReference, LEGAL_DI_THRESHOLD};
use crate::SCHEMA_VERSION;

/// Metric name to value: a number, `"undefined"`, or (for flags) a boolean.
pub type AuditReport = BTreeMap<String, Value>;

fn num(v: Result<f64>) -> Value {
    match v {
        Ok(x) if x.is_finite() => json!(x),
        _ => json!("undefined"),
    }
}

fn rate(r: Rate) -> Value {
    match r {
        Rate::Defined(x) => json!(x),
        Rate::Undefined => json!("undefined"),
    }
}

/// Every metric that is defined for the inputs. Group-specific keys carry the
/// group label as a suffix; two-group metrics are `"undefined"` for more groups.
pub fn audit(
    truth: &[u8],
    pred: &[u8],
    groups: &[usize],
    group_labels: &[String],
    scores: Option<&[f64]>,
    bins: usize,
) -> Result<AuditReport> {
    let k = group_labels.len();
    let conf = confusion_by_groups(truth, pred, groups, k)?;
    let mut r = AuditReport::new();
    r.insert("schema_version".into(), json!(SCHEMA_VERSION));
    r.insert("n_rows".into(), json!(truth.len()));
    for (label, g) in group_labels.iter().zip(&conf.groups) {
        r.insert(format!("n[{label}]"), json!(g.n));
        r.insert(format!("tpr[{label}]"), rate(g.tpr));
        r.insert(format!("fpr[{label}]"), rate(g.fpr));
        r.insert(format!("ppv[{label}]"), rate(g.ppv));
        r.insert(format!("npv[{label}]"), rate(g.npv));
        r.insert(format!("base_rate[{label}]"), rate(g.base_rate));
        r.insert(format!("positive_rate[{label}]"), rate(g.positive_rate));
        r.insert(format!("error_rate[{label}]"), rate(g.error_rate));
    }

    let rates: Option<Vec<f64>> = conf.groups.iter().map(|g| g.positive_rate.value()).collect();
    r.insert(
        "disparate_impact_multiclass".into(),
        rates.map_or(json!("undefined"), |v| {
            num(metrics::disparate_impact_multiclass(&v, DiReference::MaxRate))
        }),
    );

    let pair = (k == 2).then_some(&conf);
    let two = |f: fn(&GroupConfusion) -> Result<f64>| pair.map_or(json!("undefined"), |c| num(f(c)));
    let di = pair.and_then(|c| metrics::disparate_impact(c).ok());
    let eo = pair.and_then(|c| metrics::equalized_odds_gaps(c).ok());
    let opt = |v: Option<f64>| v.map_or(json!("undefined"), |x| json!(x));
    r.insert("statistical_parity_gap".into(), two(metrics::statistical_parity_gap));
    r.insert("disparate_impact".into(), opt(di));
    r.insert("disparate_impact_threshold".into(), json!(LEGAL_DI_THRESHOLD));
    r.insert(
        "free_of_disparate_impact".into(),
        di.map_or(json!("undefined"), |v| {
            json!(metrics::free_of_disparate_impact(v, LEGAL_DI_THRESHOLD))
        }),
    );
    r.insert("equalized_odds_tpr_gap".into(), opt(eo.map(|g| g.0)));
    r.insert("equalized_odds_fpr_gap".into(), opt(eo.map(|g| g.1)));
    r.insert(
        "disparate_mistreatment_gap".into(),
        two(metrics::disparate_mistreatment_gap),
    );
    r.insert("predictive_parity_gap".into(), two(metrics::predictive_parity_gap));
    r.insert("di_predictability_level".into(), two(metrics::di_predictability_level));

    let binary_s: Option<Vec<u8>> = pair.map(|_| groups.iter().map(|&g| g as u8).collect());
    r.insert(
        "ber_prediction_for_sensitive".into(),
        binary_s
            .as_deref()
            .map_or(json!("undefined"), |s| num(metrics::ber(pred, s))),
    );

    if let Some(scores) = scores {
        let s = binary_s
            .as_deref()
            .ok_or_else(|| Error::invalid("score metrics need a binary sensitive attribute"))?;
        r.insert(
            "balance_positive_class".into(),
            num(metrics::balance_for_class(scores, truth, s, 1)),
        );
        r.insert(
            "balance_negative_class".into(),
            num(metrics::balance_for_class(scores, truth, s, 0)),
        );
        let cal = metrics::calibration_report(scores, truth, s, bins)?;
        r.insert("calibration_bins".into(), json!(bins));
        r.insert("calibration_max_discrepancy".into(), rate(cal.max_discrepancy));
        r.insert("calibration_max_residual".into(), rate(cal.max_calibration_residual));
        r.insert("calibration_skipped_bins".into(), json!(cal.skipped_bins.len()));
    }
    Ok(r)
}

/// Thresholds that turn an audit into a failure.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FailOn {
    /// Fail when disparate impact is at or below this.
    pub di: Option<f64>,
    /// Fail when either equalized-odds gap exceeds this in magnitude.
    pub eo: Option<f64>,
}

impl FromStr for FailOn {
    type Err = Error;

    /// `none`, or comma-separated `di:<tau>` / `eo:<gap>`.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = FailOn::default();
        if s.trim().eq_ignore_ascii_case("none") {
            return Ok(out);
        }
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("expected key:value in --fail-on, got {part:?}")))?;
            let v: f64 = value
                .parse()
                .map_err(|_| Error::invalid(format!("threshold {value:?} is not a number")))?;
            match key {
                "di" => out.di = Some(v),
                "eo" => out.eo = Some(v),
                other => return Err(Error::invalid(format!("unknown --fail-on metric {other:?}"))),
            }
        }
        Ok(out)
    }
}

impl FailOn {
    /// Human-readable violations found in `report`.
    pub fn violations(&self, report: &AuditReport) -> Vec<String> {
        let get = |k: &str| report.get(k).and_then(Value::as_f64);
        let mut out = Vec::new();
        if let (Some(tau), Some(di)) = (self.di, get("disparate_impact")) {
            if !metrics::free_of_disparate_impact(di, tau) {
                out.push(format!("disparate impact {di} <= {tau}"));
            }
        }
        if let Some(limit) = self.eo {
            for key in ["equalized_odds_tpr_gap", "equalized_odds_fpr_gap"] {
                if let Some(g) = get(key) {
                    if g.abs() > limit {
                        out.push(format!("{key} {g} exceeds {limit}"));
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels() -> Vec<String> {
        vec!["0".into(), "1".into()]
    }

    #[test]
    fn identical_groups_have_zero_gaps() {
        let truth = [1, 0, 1, 0, 1, 0, 1, 0];
        let pred = [1, 0, 0, 0, 1, 0, 0, 0];
        let groups = [0, 0, 0, 0, 1, 1, 1, 1];
        let r = audit(&truth, &pred, &groups, &labels(), None, 10).unwrap();
        assert_eq!(r["statistical_parity_gap"], json!(0.0));
        assert_eq!(r["disparate_impact"], json!(1.0));
        assert_eq!(r["free_of_disparate_impact"], json!(true));
        assert_eq!(r["schema_version"], json!(1));
        assert!(FailOn::from_str("di:0.8,eo:0.01").unwrap().violations(&r).is_empty());
    }

    #[test]
    fn undefined_rates_are_marked() {
        // group 1 never predicted positive: PPV and DI undefined
        let r = audit(&[1, 0, 1, 0], &[1, 0, 0, 0], &[0, 0, 1, 1], &labels(), None, 10).unwrap();
        assert_eq!(r["ppv[1]"], json!("undefined"));
        assert_eq!(r["disparate_impact"], json!("undefined"));
        assert_eq!(r["predictive_parity_gap"], json!("undefined"));
    }

    #[test]
    fn fail_on_parsing() {
        assert_eq!(FailOn::from_str("none").unwrap(), FailOn::default());
        let f = FailOn::from_str("di:0.8, eo:0.05").unwrap();
        assert_eq!((f.di, f.eo), (Some(0.8), Some(0.05)));
        assert!(FailOn::from_str("sp:0.1").is_err());
        assert!(FailOn::from_str("di").is_err());
    }
}
