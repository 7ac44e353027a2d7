//! Binary classification metrics for link prediction: confusion matrix with
//! derived rates, F1 scores, and the ROC curve with its area.

use crate::{Error, Result};

/// Confusion counts at a fixed probability threshold. A pair is predicted
/// positive when its probability is at or above the threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMatrix {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
    pub threshold: f64,
}

impl ConfusionMatrix {
    pub fn from_counts(
        true_positive: usize,
        false_positive: usize,
        true_negative: usize,
        false_negative: usize,
        threshold: f64,
    ) -> Self {
        ConfusionMatrix {
            true_positive,
            false_positive,
            true_negative,
            false_negative,
            threshold,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.true_negative + self.false_negative
    }

    pub fn positives(&self) -> usize {
        self.true_positive + self.false_negative
    }

    pub fn negatives(&self) -> usize {
        self.true_negative + self.false_positive
    }

    /// Recall on the positive class.
    pub fn tpr(&self) -> f64 {
        ratio(self.true_positive, self.positives())
    }

    /// Recall on the negative class.
    pub fn tnr(&self) -> f64 {
        ratio(self.true_negative, self.negatives())
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.false_positive, self.negatives())
    }

    pub fn fnr(&self) -> f64 {
        ratio(self.false_negative, self.positives())
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.true_positive + self.true_negative, self.total())
    }

    /// F1 of the positive class. Zero when the model finds no positives.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_positive + self.false_positive + self.false_negative;
        ratio(2 * self.true_positive, denom)
    }

    /// Class-averaged F1: the mean of the positive-class F1 and the F1 of
    /// the negative class treated as the target.
    pub fn macro_f1(&self) -> f64 {
        let neg_f1 = ratio(
            2 * self.true_negative,
            2 * self.true_negative + self.false_negative + self.false_positive,
        );
        (self.f1() + neg_f1) / 2.0
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Tally a confusion matrix from labels and predicted probabilities.
pub fn confusion_matrix(
    labels: &[bool],
    probabilities: &[f64],
    threshold: f64,
) -> Result<ConfusionMatrix> {
    if labels.len() != probabilities.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} probabilities",
            labels.len(),
            probabilities.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Validation("cannot evaluate zero samples".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Validation(format!(
            "threshold must be inside (0, 1), got {threshold}"
        )));
    }
    let mut cm = ConfusionMatrix::from_counts(0, 0, 0, 0, threshold);
    for (&label, &p) in labels.iter().zip(probabilities) {
        if !p.is_finite() {
            return Err(Error::Numeric(format!("non-finite probability {p}")));
        }
        match (label, p >= threshold) {
            (true, true) => cm.true_positive += 1,
            (true, false) => cm.false_negative += 1,
            (false, true) => cm.false_positive += 1,
            (false, false) => cm.true_negative += 1,
        }
    }
    Ok(cm)
}

/// ROC curve as `(fpr, tpr)` points from sweeping the decision threshold
/// across the distinct scores, plus the trapezoidal area under it. Tied
/// scores move as one group, which makes the trapezoidal area equal the
/// rank-statistic AUC with ties counted half.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

pub fn roc_auc(labels: &[bool], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::Dimension(format!(
            "{} labels vs {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation(
            "ROC needs both classes present in the labels".into(),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("non-finite score".into()));
    }

    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(labels.len() + 2);
    points.push((0.0, 0.0));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut auc = 0.0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        // consume the whole tie group at this score
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // trapezoid between the previous operating point and this one
        auc += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        prev_tp = tp;
        prev_fp = fp;
    }
    auc /= (pos * neg) as f64;
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    Ok(RocCurve { points, auc })
}

/// Everything the evaluation artifacts report for one prediction set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub f1: f64,
    pub macro_f1: f64,
    pub roc: RocCurve,
}

pub fn evaluate(labels: &[bool], probabilities: &[f64], threshold: f64) -> Result<EvalReport> {
    let confusion = confusion_matrix(labels, probabilities, threshold)?;
    let roc = roc_auc(labels, probabilities)?;
    Ok(EvalReport {
        confusion,
        f1: confusion.f1(),
        macro_f1: confusion.macro_f1(),
        roc,
    })
}

impl EvalReport {
    /// Key-value text form used by the report artifacts.
    pub fn to_text(&self) -> String {
        let cm = &self.confusion;
        let mut out = String::new();
        out.push_str(&format!("threshold: {}\n", cm.threshold));
        out.push_str(&format!("samples: {}\n", cm.total()));
        out.push_str(&format!("true_positive: {}\n", cm.true_positive));
        out.push_str(&format!("false_positive: {}\n", cm.false_positive));
        out.push_str(&format!("true_negative: {}\n", cm.true_negative));
        out.push_str(&format!("false_negative: {}\n", cm.false_negative));
        out.push_str(&format!("tpr: {:.6}\n", cm.tpr()));
        out.push_str(&format!("tnr: {:.6}\n", cm.tnr()));
        out.push_str(&format!("fpr: {:.6}\n", cm.fpr()));
        out.push_str(&format!("fnr: {:.6}\n", cm.fnr()));
        out.push_str(&format!("accuracy: {:.6}\n", cm.accuracy()));
        out.push_str(&format!("f1: {:.6}\n", self.f1));
        out.push_str(&format!("macro_f1: {:.6}\n", self.macro_f1));
        out.push_str(&format!("auc: {:.6}\n", self.roc.auc));
        out
    }

    /// Two-column CSV of the ROC operating points.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.roc.points {
            out.push_str(&format!("{fpr},{tpr}\n"));
        }
        out
    }
}
