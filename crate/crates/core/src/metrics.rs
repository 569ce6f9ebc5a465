//! Confusion matrices, precision/recall/F-measure, ROC curves and AUC.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts with rows = true class and columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub num_classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::shape("confusion matrix must be square and non-empty"));
        }
        Ok(Self { num_classes: k, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.counts[i][i]).sum()
    }

    /// One-vs-rest counts for `class`.
    pub fn class_counts(&self, class: usize) -> ClassCounts {
        let tp = self.counts[class][class];
        let row: u64 = self.counts[class].iter().sum();
        let col: u64 = self.counts.iter().map(|r| r[class]).sum();
        let total = self.total();
        ClassCounts { tp, fp: col - tp, fn_: row - tp, tn: total + tp - row - col }
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape(format!("{} predictions for {} labels", preds.len(), labels.len())));
    }
    if preds.is_empty() {
        return Err(Error::param("confusion matrix of an empty evaluation"));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(Error::param(format!("class out of range 0..{num_classes}: pred {p}, label {l}")));
        }
        counts[l][p] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub counts: ClassCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Precision had a zero denominator (class never predicted) and was set to 0.
    pub precision_undefined: bool,
    /// Recall had a zero denominator (class absent) and was set to 0.
    pub recall_undefined: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Averaged {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    /// `None` for classes without both positive and negative samples.
    pub per_class: Vec<Option<f64>>,
    /// Mean over the defined per-class values.
    pub macro_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: u64,
    pub accuracy: f64,
    pub micro: Averaged,
    #[serde(rename = "macro")]
    pub macro_: Averaged,
    pub per_class: Vec<ClassMetrics>,
    pub auc: Option<AucReport>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Harmonic mean `2 PR RE / (PR + RE)`, 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Micro metrics pool the one-vs-rest counts; macro metrics average the
/// per-class precision and recall, and the macro F-measure is the harmonic
/// mean of those two averages.
pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::param("confusion matrix is empty"));
    }
    let k = cm.num_classes;
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let counts = cm.class_counts(c);
            let (precision, precision_undefined) = ratio(counts.tp, counts.tp + counts.fp);
            let (recall, recall_undefined) = ratio(counts.tp, counts.tp + counts.fn_);
            ClassMetrics {
                counts,
                precision,
                recall,
                f_measure: f_measure(precision, recall),
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let tp: u64 = per_class.iter().map(|m| m.counts.tp).sum();
    let fp: u64 = per_class.iter().map(|m| m.counts.fp).sum();
    let fn_: u64 = per_class.iter().map(|m| m.counts.fn_).sum();
    let (micro_p, _) = ratio(tp, tp + fp);
    let (micro_r, _) = ratio(tp, tp + fn_);
    let macro_p = per_class.iter().map(|m| m.precision).sum::<f64>() / k as f64;
    let macro_r = per_class.iter().map(|m| m.recall).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        samples: total,
        accuracy: cm.trace() as f64 / total as f64,
        micro: Averaged { precision: micro_p, recall: micro_r, f_measure: f_measure(micro_p, micro_r) },
        macro_: Averaged { precision: macro_p, recall: macro_r, f_measure: f_measure(macro_p, macro_r) },
        per_class,
        auc: None,
        confusion: cm.clone(),
    })
}

/// One-vs-rest ROC curve: false-positive rate against true-positive rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn auc(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum()
    }
}

/// Sweeps the threshold down through the observed scores; tied scores enter
/// together, which gives them half credit in the area. `None` when either
/// the positive or negative set is empty.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<Option<RocCurve>> {
    if scores.len() != positive.len() {
        return Err(Error::shape("scores and labels differ in length"));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "roc scores", index: i });
    }
    let p = positive.iter().filter(|&&b| b).count() as u64;
    let n = positive.len() as u64 - p;
    if p == 0 || n == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(Some(RocCurve { points }))
}

/// Per-class one-vs-rest ROC curves from per-sample score vectors.
pub fn roc_curves(scores: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<Vec<Option<RocCurve>>> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} score rows for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|r| r.len() != num_classes) {
        return Err(Error::shape(format!("every score row needs {num_classes} entries")));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::param(format!("label {bad} out of range")));
    }
    (0..num_classes)
        .map(|c| {
            let s: Vec<f64> = scores.iter().map(|r| r[c]).collect();
            let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            roc_curve(&s, &pos)
        })
        .collect()
}

pub fn roc_auc(scores: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<AucReport> {
    let per_class: Vec<Option<f64>> =
        roc_curves(scores, labels, num_classes)?.into_iter().map(|c| c.map(|c| c.auc())).collect();
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_auc = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(AucReport { per_class, macro_auc })
}

/// Mean and sample standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// One row of the summary table: metric values in percent as mean and std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub domain: String,
    pub accuracy: (f64, f64),
    pub precision: (f64, f64),
    pub recall: (f64, f64),
    pub f_measure: (f64, f64),
    pub auc: Option<(f64, f64)>,
}

impl SummaryRow {
    /// Aggregates fold reports using the micro (headline) averages.
    pub fn from_reports(dataset: &str, domain: &str, reports: &[MetricsReport]) -> Self {
        let pct = |f: &dyn Fn(&MetricsReport) -> f64| {
            let v: Vec<f64> = reports.iter().map(|r| 100.0 * f(r)).collect();
            mean_std(&v)
        };
        let aucs: Vec<f64> =
            reports.iter().filter_map(|r| r.auc.as_ref().and_then(|a| a.macro_auc)).map(|a| 100.0 * a).collect();
        SummaryRow {
            dataset: dataset.to_string(),
            domain: domain.to_string(),
            accuracy: pct(&|r| r.accuracy),
            precision: pct(&|r| r.micro.precision),
            recall: pct(&|r| r.micro.recall),
            f_measure: pct(&|r| r.micro.f_measure),
            auc: (!aucs.is_empty() && aucs.len() == reports.len()).then(|| mean_std(&aucs)),
        }
    }
}

/// Plain-text table with one row per dataset/domain and `mean ± std` cells.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let cell = |(m, s): (f64, f64)| format!("{m:.2} ± {s:.2}");
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<10} {:>15} {:>15} {:>15} {:>15} {:>15}",
        "Dataset", "Domain", "ACC", "PR", "RE", "F", "AUC"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<10} {:>15} {:>15} {:>15} {:>15} {:>15}",
            r.dataset,
            r.domain,
            cell(r.accuracy),
            cell(r.precision),
            cell(r.recall),
            cell(r.f_measure),
            r.auc.map(cell).unwrap_or_else(|| "n/a".into())
        );
    }
    out
}

/// `(proposed - lower) / (upper - lower) * 100`; `None` when the bounds coincide.
pub fn gap_coverage(lower: f64, proposed: f64, upper: f64) -> Option<f64> {
    let gap = upper - lower;
    (gap != 0.0).then(|| (proposed - lower) / gap * 100.0)
}
