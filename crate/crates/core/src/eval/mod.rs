//! Confusion counts, classification metrics, effect sizes and report
//! records. Artifact is the positive class throughout.

pub mod synth;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_io::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(predicted: &[Label], truth: &[Label]) -> Result<ConfusionCounts> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p.is_artifact(), t.is_artifact()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Metrics with `None` wherever a denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> MetricSet {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let specificity = ratio(c.tn, c.tn + c.fp);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    MetricSet {
        recall,
        specificity,
        precision,
        f1,
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Standardized mean difference with the pooled `(n − 1)`-weighted SD.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::TooShort {
            len: a.len().min(b.len()),
            min: 1,
        });
    }
    let (ma, mb) = (mean(a), mean(b));
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    let pooled = ((ss(a, ma) + ss(b, mb)) / (a.len() + b.len() - 2) as f64).sqrt();
    if ma == mb {
        return Ok(0.0);
    }
    if !(pooled > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((ma - mb) / pooled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    VerySmall,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    pub fn of(d: f64) -> Self {
        match d.abs() {
            x if x < 0.2 => EffectSize::VerySmall,
            x if x < 0.5 => EffectSize::Small,
            x if x < 0.8 => EffectSize::Medium,
            _ => EffectSize::Large,
        }
    }
}

impl fmt::Display for EffectSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EffectSize::VerySmall => "very small",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        })
    }
}

/// One evaluation row: `{method, seed, tp, fp, tn, fn, recall, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub method: String,
    pub seed: Option<u64>,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricRecord {
    pub fn new(method: &str, seed: Option<u64>, counts: ConfusionCounts) -> Self {
        let m = metrics(&counts);
        Self {
            method: method.to_owned(),
            seed,
            tp: counts.tp,
            fp: counts.fp,
            tn: counts.tn,
            fn_: counts.fn_,
            recall: m.recall,
            specificity: m.specificity,
            precision: m.precision,
            f1: m.f1,
        }
    }

    pub fn metric_set(&self) -> MetricSet {
        MetricSet {
            recall: self.recall,
            specificity: self.specificity,
            precision: self.precision,
            f1: self.f1,
        }
    }
}

/// Mean of the defined values; `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-method averages of the records, undefined entries excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: String,
    pub runs: usize,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
}

pub fn aggregate(records: &[MetricRecord]) -> Vec<AggregateRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in records {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let rows: Vec<&MetricRecord> = records.iter().filter(|r| r.method == m).collect();
            AggregateRow {
                method: m.to_owned(),
                runs: rows.len(),
                recall: mean_defined(rows.iter().map(|r| r.recall)),
                specificity: mean_defined(rows.iter().map(|r| r.specificity)),
                precision: mean_defined(rows.iter().map(|r| r.precision)),
                f1: mean_defined(rows.iter().map(|r| r.f1)),
            }
        })
        .collect()
}

/// Writes the aggregate table as CSV, one row per method; undefined cells are
/// left empty.
pub fn write_aggregate_csv(writer: impl Write, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::MalformedFile(e.to_string());
    w.write_record(["method", "runs", "recall", "specificity", "precision", "f1"])
        .map_err(io)?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.runs.to_string(),
            cell(r.recall),
            cell(r.specificity),
            cell(r.precision),
            cell(r.f1),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::MalformedFile(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mask(bits: &[u8]) -> Vec<Label> {
        bits.iter().map(|&b| Label::from_flag(b == 1)).collect()
    }

    fn fixture() -> (Vec<Label>, Vec<Label>) {
        // 10 artifacts of which 8 caught, 10 clean of which 1 flagged.
        let truth = mask(&[1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let pred = mask(&[1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        (pred, truth)
    }

    #[test]
    fn confusion_examples() {
        let truth = mask(&[1; 10].iter().chain(&[0; 10]).copied().collect::<Vec<_>>());
        assert_eq!(
            confusion(&truth, &truth).unwrap(),
            ConfusionCounts { tp: 10, fp: 0, tn: 10, fn_: 0 }
        );
        let clean = vec![Label::Clean; 20];
        let c = confusion(&clean, &truth).unwrap();
        assert_eq!((c.tp, c.fp), (0, 0));
        let (pred, truth) = fixture();
        assert_eq!(
            confusion(&pred, &truth).unwrap(),
            ConfusionCounts { tp: 8, fp: 1, tn: 9, fn_: 2 }
        );
        assert!(matches!(confusion(&pred[..3], &truth), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn metric_examples() {
        let m = metrics(&ConfusionCounts { tp: 8, fp: 1, tn: 9, fn_: 2 });
        assert_relative_eq!(m.recall.unwrap(), 0.8);
        assert_relative_eq!(m.specificity.unwrap(), 0.9);
        assert_relative_eq!(m.precision.unwrap(), 8.0 / 9.0);
        assert_relative_eq!(m.f1.unwrap(), 16.0 / 19.0, epsilon = 1e-15);
        assert_eq!(format!("{:.4}", m.f1.unwrap()), "0.8421");

        let m = metrics(&ConfusionCounts { tp: 0, fp: 0, tn: 5, fn_: 3 });
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(m.recall, Some(0.0));
    }

    #[test]
    fn cohens_d_examples() {
        assert_eq!(cohens_d(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let d = cohens_d(&[1.0, 1.0, 2.0, 2.0], &[0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(d, 3f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(cohens_d(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::ZeroVariance)));
        assert_eq!(EffectSize::of(0.1), EffectSize::VerySmall);
        assert_eq!(EffectSize::of(-0.3), EffectSize::Small);
        assert_eq!(EffectSize::of(0.79), EffectSize::Medium);
        assert_eq!(EffectSize::of(1.732), EffectSize::Large);
    }

    #[test]
    fn record_json_uses_null_for_undefined() {
        let r = MetricRecord::new("irpf", Some(3), ConfusionCounts { tp: 0, fp: 0, tn: 4, fn_: 0 });
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["fn"], 0);
        assert!(v["precision"].is_null());
        assert!(v["recall"].is_null());
        assert_eq!(v["specificity"], 1.0);
    }

    #[test]
    fn aggregate_skips_undefined() {
        let a = MetricRecord::new("rp", Some(0), ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 });
        let b = MetricRecord::new("rp", Some(1), ConfusionCounts { tp: 0, fp: 0, tn: 2, fn_: 0 });
        let rows = aggregate(&[a, b]);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].runs, 2);
        assert_eq!(rows[0].f1, Some(0.5));
        assert_eq!(rows[0].specificity, Some(0.75));
        let mut out = Vec::new();
        write_aggregate_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "rp,2,0.5000,0.7500,0.5000,0.5000");
    }

    proptest! {
        #[test]
        fn self_agreement_is_perfect(bits in proptest::collection::vec(any::<bool>(), 2..60)) {
            prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
            let m: Vec<Label> = bits.iter().map(|&b| Label::from_flag(b)).collect();
            let s = metrics(&confusion(&m, &m).unwrap());
            prop_assert_eq!(s, MetricSet { recall: Some(1.0), specificity: Some(1.0), precision: Some(1.0), f1: Some(1.0) });
        }

        #[test]
        fn swapping_transposes(a in proptest::collection::vec(any::<bool>(), 1..60), seed in any::<u64>()) {
            let b: Vec<bool> = a.iter().enumerate().map(|(i, &x)| x ^ ((seed >> (i % 64)) & 1 == 1)).collect();
            let (la, lb): (Vec<Label>, Vec<Label>) = (
                a.iter().map(|&x| Label::from_flag(x)).collect(),
                b.iter().map(|&x| Label::from_flag(x)).collect(),
            );
            let ab = confusion(&la, &lb).unwrap();
            let ba = confusion(&lb, &la).unwrap();
            prop_assert_eq!((ab.tp, ab.fp, ab.fn_, ab.tn), (ba.tp, ba.fn_, ba.fp, ba.tn));
            prop_assert_eq!(ab.total(), a.len());
        }

        #[test]
        fn cohens_d_is_antisymmetric(
            a in proptest::collection::vec(-10.0f64..10.0, 2..20),
            b in proptest::collection::vec(-10.0f64..10.0, 2..20),
        ) {
            if let (Ok(x), Ok(y)) = (cohens_d(&a, &b), cohens_d(&b, &a)) {
                prop_assert!((x + y).abs() < 1e-12);
            }
        }
    }
}
