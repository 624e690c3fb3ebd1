//! Box-plot statistics of estimation errors per condition.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::estimator::Variant;
use crate::mixer::NoiseKind;

use super::runner::TrialRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Variant,
    Snr,
    Noise,
    /// Split subband records by band; fullband errors are used otherwise.
    Band,
}

/// A condition; fields not grouped on are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub variant: Option<Variant>,
    pub snr_db: Option<f64>,
    pub noise: Option<NoiseKind>,
    /// Nominal band center in Hz.
    pub band_hz: Option<f64>,
}

impl Condition {
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(v) = self.variant {
            parts.push(format!("{v}"));
        }
        if let Some(s) = self.snr_db {
            parts.push(format!("{s}dB"));
        }
        if let Some(n) = self.noise {
            parts.push(n.to_string());
        }
        if let Some(b) = self.band_hz {
            parts.push(format!("{b}Hz"));
        }
        if parts.is_empty() {
            "all".into()
        } else {
            parts.join("/")
        }
    }

    // total order over conditions; floats compared by bit pattern of their
    // order-preserving integer image
    fn sort_key(&self) -> (Option<Variant>, Option<i64>, Option<NoiseKind>, Option<i64>) {
        let ord = |x: f64| {
            let b = x.to_bits() as i64;
            b ^ (((b >> 63) as u64) >> 1) as i64
        };
        (self.variant, self.snr_db.map(ord), self.noise, self.band_hz.map(ord))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub condition: Condition,
    pub count: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

fn median_sorted(x: &[f64]) -> f64 {
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// Quartiles as medians of the lower and upper halves, the overall median
/// excluded from both halves when the count is odd. A single value is its
/// own quartile.
pub fn quartiles(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len();
    assert!(n > 0, "quartiles of an empty sample");
    if n == 1 {
        return (sorted[0], sorted[0], sorted[0]);
    }
    let half = n / 2;
    let lower = &sorted[..half];
    let upper = &sorted[n - half..];
    (median_sorted(lower), median_sorted(sorted), median_sorted(upper))
}

/// Summary of a non-empty sample; whiskers reach the most extreme data
/// within 1.5 IQR of the box.
pub fn summarize_values(condition: Condition, values: &[f64]) -> Option<ErrorSummary> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let (q25, median, q75) = quartiles(&v);
    let iqr = q75 - q25;
    let lo_fence = q25 - 1.5 * iqr;
    let hi_fence = q75 + 1.5 * iqr;
    let whisker_low = v.iter().copied().find(|&x| x >= lo_fence).unwrap_or(q25);
    let whisker_high = v.iter().rev().copied().find(|&x| x <= hi_fence).unwrap_or(q75);
    Some(ErrorSummary { condition, count: v.len(), median, q25, q75, whisker_low, whisker_high })
}

/// Groups record errors by `group_by` and summarizes each group, ordered by
/// condition. Groups without any valid error are dropped with a warning.
pub fn summarize(records: &[TrialRecord], group_by: &[GroupKey]) -> Vec<ErrorSummary> {
    let has = |k| group_by.contains(&k);
    let mut groups: BTreeMap<_, (Condition, Vec<f64>)> = BTreeMap::new();
    let mut push = |cond: Condition, value: Option<f64>| {
        let entry = groups.entry(cond.sort_key()).or_insert_with(|| (cond.clone(), Vec::new()));
        if let Some(v) = value {
            entry.1.push(v);
        }
    };
    for r in records.iter().filter(|r| r.is_ok()) {
        let base = Condition {
            variant: has(GroupKey::Variant).then_some(r.variant),
            snr_db: if has(GroupKey::Snr) { r.snr_db } else { None },
            noise: if has(GroupKey::Noise) { r.noise } else { None },
            band_hz: None,
        };
        if has(GroupKey::Band) {
            let (Some(est), Some(errs)) = (&r.estimate, &r.band_error_db) else {
                continue;
            };
            for (&center, &err) in est.band_centers.iter().zip(errs) {
                push(Condition { band_hz: Some(center), ..base.clone() }, err);
            }
        } else {
            push(base, r.error_db);
        }
    }
    groups
        .into_values()
        .filter_map(|(cond, values)| {
            let label = cond.label();
            let s = summarize_values(cond, &values);
            if s.is_none() {
                log::warn!("condition {label} has no valid errors, omitted");
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Condition {
        Condition { variant: None, snr_db: None, noise: None, band_hz: None }
    }

    #[test]
    fn three_values() {
        let s = summarize_values(all(), &[1.0, -1.0, 0.0]).unwrap();
        assert_eq!((s.q25, s.median, s.q75), (-1.0, 0.0, 1.0));
        assert_eq!((s.whisker_low, s.whisker_high), (-1.0, 1.0));
    }

    #[test]
    fn single_value() {
        let s = summarize_values(all(), &[2.5]).unwrap();
        for v in [s.median, s.q25, s.q75, s.whisker_low, s.whisker_high] {
            assert_eq!(v, 2.5);
        }
        assert_eq!(s.count, 1);
    }

    #[test]
    fn even_count_and_outliers() {
        let s = summarize_values(all(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 100.0]).unwrap();
        assert_eq!((s.q25, s.median, s.q75), (2.5, 4.5, 6.5));
        assert_eq!(s.whisker_low, 1.0);
        assert_eq!(s.whisker_high, 7.0);
    }

    #[test]
    fn empty_and_non_finite() {
        assert!(summarize_values(all(), &[]).is_none());
        assert!(summarize_values(all(), &[f64::NAN]).is_none());
        assert_eq!(summarize_values(all(), &[f64::NAN, 1.0]).unwrap().count, 1);
    }

    #[test]
    fn labels() {
        let c = Condition {
            variant: Some(Variant::E),
            snr_db: Some(-1.0),
            noise: Some(NoiseKind::Pink),
            band_hz: Some(1000.0),
        };
        assert_eq!(c.label(), "E/-1dB/pink/1000Hz");
        assert_eq!(all().label(), "all");
    }
}
