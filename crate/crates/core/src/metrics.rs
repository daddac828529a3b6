//! Binary classification metrics and ROC analysis. Positive means "face".

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fsutil;
use crate::scalar::Fraction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

/// A ratio that may have had a zero denominator, in which case `value` is 0
/// and `degenerate` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    pub degenerate: bool,
}

impl MetricValue {
    fn ratio(num: u64, den: u64) -> Self {
        if den == 0 {
            MetricValue { value: 0.0, degenerate: true }
        } else {
            MetricValue { value: num as f64 / den as f64, degenerate: false }
        }
    }
}

pub fn confusion(labels: &[bool], predictions: &[bool]) -> Result<ConfusionCounts> {
    if labels.len() != predictions.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no samples to score".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&l, &p) in labels.iter().zip(predictions) {
        match (l, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> MetricValue {
        MetricValue::ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> MetricValue {
        MetricValue::ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> MetricValue {
        MetricValue::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> MetricValue {
        let (p, r) = (self.precision(), self.recall());
        if p.degenerate || r.degenerate || p.value + r.value == 0.0 {
            return MetricValue { value: 0.0, degenerate: true };
        }
        // 2PR/(P+R) reduces to 2tp/(2tp+fp+fn), which avoids rounding drift.
        MetricValue::ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<S> {
    points: Vec<(S, S)>,
    auroc: S,
}

impl<S: Fraction> RocCurve<S> {
    /// Builds a curve from explicit points, checking endpoints and
    /// monotonicity, and integrates it.
    pub fn from_points(points: Vec<(S, S)>) -> Result<Self> {
        let (zero, one) = (S::zero(), S::one());
        if points.len() < 2 || points.first() != Some(&(zero.clone(), zero)) || points.last() != Some(&(one.clone(), one))
        {
            return Err(Error::Data("ROC curve must run from (0,0) to (1,1)".into()));
        }
        if points.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
            return Err(Error::Data("ROC curve points are not monotone".into()));
        }
        let auroc = trapezoid(&points);
        Ok(RocCurve { points, auroc })
    }

    pub fn points(&self) -> &[(S, S)] {
        &self.points
    }

    pub fn auroc(&self) -> &S {
        &self.auroc
    }
}

fn trapezoid<S: Fraction>(points: &[(S, S)]) -> S {
    let two = S::one() + S::one();
    let mut area = S::zero();
    for w in points.windows(2) {
        let dx = w[1].0.clone() - w[0].0.clone();
        area = area + dx * (w[0].1.clone() + w[1].1.clone()) / two.clone();
    }
    area
}

/// Sweeps a threshold down through the distinct scores. Samples with equal
/// scores enter together and form a single vertex.
pub fn roc_curve<S: Fraction>(scores: &[f64], labels: &[bool]) -> Result<RocCurve<S>> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u64;
    let neg = labels.len() as u64 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!(
            "ROC needs both classes, got {pos} positive and {neg} negative"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(S::zero(), S::zero())];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((S::from_counts(fp, neg), S::from_counts(tp, pos)));
    }
    RocCurve::from_points(points)
}

pub fn curve_to_csv(curve: &RocCurve<f64>) -> String {
    let mut out = String::from("fpr,tpr\n");
    for (x, y) in curve.points() {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<RocCurve<f64>> {
    let mut lines = text.lines();
    if lines.next() != Some("fpr,tpr") {
        return Err(Error::Data("ROC CSV must start with `fpr,tpr`".into()));
    }
    let mut points = Vec::new();
    for (n, line) in lines.enumerate() {
        let parsed = line.split_once(',').and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
        points.push(parsed.ok_or_else(|| Error::Data(format!("line {}: bad ROC row `{line}`", n + 2)))?);
    }
    RocCurve::from_points(points)
}

pub fn export_curve(curve: &RocCurve<f64>, path: &Path) -> Result<()> {
    fsutil::write_atomic(path, curve_to_csv(curve).as_bytes())
}

pub fn import_curve(path: &Path) -> Result<RocCurve<f64>> {
    let bytes = fsutil::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Data(format!("{} is not UTF-8", path.display())))?;
    curve_from_csv(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSummary {
    pub counts: ConfusionCounts,
    pub accuracy: MetricValue,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    pub auroc: f64,
}

impl MetricsSummary {
    /// Thresholds `scores` at `cutoff` (inclusive) and scores the ROC on the
    /// raw values.
    pub fn evaluate(scores: &[f64], labels: &[bool], cutoff: f64) -> Result<Self> {
        let curve = roc_curve::<f64>(scores, labels)?;
        let preds: Vec<bool> = scores.iter().map(|&s| s >= cutoff).collect();
        let counts = confusion(labels, &preds)?;
        Ok(MetricsSummary {
            counts,
            accuracy: counts.accuracy(),
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            auroc: curve.auroc,
        })
    }

    /// `accuracy=… precision=… recall=… f1=… auroc=…`, as percentages with
    /// two decimals when `percent` is set.
    pub fn line(&self, percent: bool) -> String {
        let fmt = |v: f64| if percent { format!("{:.2}%", v * 100.0) } else { format!("{v:.6}") };
        format!(
            "accuracy={} precision={} recall={} f1={} auroc={}",
            fmt(self.accuracy.value),
            fmt(self.precision.value),
            fmt(self.recall.value),
            fmt(self.f1.value),
            fmt(self.auroc)
        )
    }
}

impl fmt::Display for MetricsSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line(false))
    }
}
