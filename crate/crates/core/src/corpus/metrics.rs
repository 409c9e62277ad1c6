use serde::{Deserialize, Serialize};

use super::{CorpusError, Label};

/// Confusion matrix with spam as the positive class. Ratios whose
/// denominator is zero are `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            tp,
            fp,
            tn,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            fp_rate: ratio(fp, fp + tn),
            fn_rate: ratio(fn_, fn_ + tp),
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn compute_metrics(verdicts: &[Label], labels: &[Label]) -> Result<Metrics, CorpusError> {
    if verdicts.len() != labels.len() {
        return Err(CorpusError::LengthMismatch {
            verdicts: verdicts.len(),
            labels: labels.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (v, l) in verdicts.iter().zip(labels) {
        match (v, l) {
            (Label::Spam, Label::Spam) => tp += 1,
            (Label::Spam, Label::Legitimate) => fp += 1,
            (Label::Legitimate, Label::Legitimate) => tn += 1,
            (Label::Legitimate, Label::Spam) => fn_ += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}
