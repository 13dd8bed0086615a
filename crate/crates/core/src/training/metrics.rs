use serde::Serialize;

use super::TrainError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    /// Scores at or above `threshold` are predicted clones.
    pub fn at(scores: &[f64], labels: &[f64], threshold: f64) -> Self {
        let mut c = Confusion::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y >= 0.5) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Absent when only one class occurs.
    pub auc: Option<f64>,
    pub threshold: f64,
    pub confusion: Confusion,
}

fn check(scores: &[f64], labels: &[f64]) -> Result<(), TrainError> {
    if scores.len() != labels.len() {
        return Err(TrainError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    Ok(())
}

pub fn evaluate(scores: &[f64], labels: &[f64], threshold: f64) -> Result<EvalReport, TrainError> {
    check(scores, labels)?;
    let confusion = Confusion::at(scores, labels, threshold);
    let auc = match roc_auc(scores, labels) {
        Ok(a) => Some(a),
        Err(TrainError::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok(EvalReport {
        precision: confusion.precision(),
        recall: confusion.recall(),
        f1: confusion.f1(),
        auc,
        threshold,
        confusion,
    })
}

/// `{0.2, 0.3, ..., 0.8}`.
pub fn default_threshold_grid() -> Vec<f64> {
    (2..=8).map(|k| k as f64 / 10.0).collect()
}

/// Grid value with the best F1; the smallest wins ties.
pub fn threshold_moving(scores: &[f64], labels: &[f64], grid: &[f64]) -> Result<f64, TrainError> {
    check(scores, labels)?;
    let mut best: Option<(f64, f64)> = None;
    for &eps in grid {
        let f1 = Confusion::at(scores, labels, eps).f1();
        if best.is_none_or(|(_, b)| f1 > b) {
            best = Some((eps, f1));
        }
    }
    best.map(|(eps, _)| eps)
        .ok_or_else(|| TrainError::Config("empty threshold grid".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// One point per distinct score, from the strictest threshold (`+inf`, nothing
/// predicted positive) down to the smallest score (everything positive).
pub fn roc_curve(scores: &[f64], labels: &[f64]) -> Result<Vec<RocPoint>, TrainError> {
    check(scores, labels)?;
    let pos = labels.iter().filter(|&&y| y >= 0.5).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(TrainError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] >= 0.5 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        });
    }
    Ok(points)
}

/// Area under the ROC curve by the trapezoidal rule; tied scores contribute a
/// diagonal segment, i.e. half credit.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64, TrainError> {
    let curve = roc_curve(scores, labels)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum())
}
