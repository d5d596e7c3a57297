//! Binary classification metrics. Class 1 (stress) is the positive class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a} predictions for {b} labels")));
    }
    if a == 0 {
        return Err(Error::Empty("metric input"));
    }
    Ok(())
}

fn check_binary(labels: &[usize]) -> Result<()> {
    match labels.iter().find(|&&l| l > 1) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes: 2 }),
        None => Ok(()),
    }
}

/// Fraction of matching class indices.
pub fn accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_lengths(preds.len(), labels.len())?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// `m[true][pred]` counts.
pub fn confusion(preds: &[usize], labels: &[usize]) -> Result<[[u64; 2]; 2]> {
    check_lengths(preds.len(), labels.len())?;
    check_binary(labels)?;
    check_binary(preds)?;
    let mut m = [[0u64; 2]; 2];
    for (&p, &l) in preds.iter().zip(labels) {
        m[l][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall for "score ≥ threshold" at every distinct score, in
/// ascending threshold order, plus a final sentinel above the largest score
/// where nothing is predicted positive. Precision with no predicted
/// positives is 1.
pub fn pr_curve(scores: &[f64], labels: &[usize]) -> Result<Vec<PrPoint>> {
    check_lengths(scores.len(), labels.len())?;
    check_binary(labels)?;
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidParam(format!("score {s} is not finite")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(Error::Dataset("precision-recall needs at least one positive".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    // Sweep thresholds from high to low, then reverse.
    let mut points = Vec::new();
    let point = |threshold: f64, tp: usize, fp: usize| PrPoint {
        threshold,
        precision: if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 },
        recall: tp as f64 / positives as f64,
    };
    points.push(point(scores[order[0]] + 1.0, 0, 0));
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(point(s, tp, fp));
    }
    points.reverse();
    Ok(points)
}

/// ROC-AUC as the Mann–Whitney statistic
/// `(#pairs with positive above negative + ½·#tied pairs) / (P·N)`.
pub fn auc(scores: &[f64], labels: &[usize]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    check_binary(labels)?;
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidParam(format!("score {s} is not a number")));
    }
    let p = labels.iter().filter(|&&l| l == 1).count() as u64;
    let n = labels.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(Error::Dataset("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the statistic's numerator, kept integral.
    let mut twice = 0u64;
    let mut neg_below = 0u64;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut gp, mut gn) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        twice += 2 * gp * neg_below + gp * gn;
        neg_below += gn;
    }
    Ok(twice as f64 / (2 * p * n) as f64)
}

/// Summary of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub samples: usize,
    pub accuracy: f64,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[u64; 2]; 2],
    pub auc: f64,
    pub pr_curve: Vec<PrPoint>,
}

impl MetricsReport {
    /// `scores` are positive-class probabilities; `preds` the hard decisions.
    pub fn new(scores: &[f64], preds: &[usize], labels: &[usize]) -> Result<Self> {
        check_lengths(scores.len(), labels.len())?;
        Ok(Self {
            samples: labels.len(),
            accuracy: accuracy(preds, labels)?,
            confusion: confusion(preds, labels)?,
            auc: auc(scores, labels)?,
            pr_curve: pr_curve(scores, labels)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn pr_curve_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 1, 0], &[1, 0, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[1, 0, 1, 0], &[1, 1, 1, 0]).unwrap(), 0.75);
        assert!(matches!(accuracy(&[], &[]), Err(Error::Empty(_))));
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn confusion_trace_is_accuracy() {
        let (p, l) = ([1, 0, 1, 0, 1], [1, 1, 0, 0, 1]);
        let m = confusion(&p, &l).unwrap();
        assert_eq!(m, [[1, 1], [1, 2]]);
        assert_eq!((m[0][0] + m[1][1]) as f64 / 5.0, accuracy(&p, &l).unwrap());
    }

    #[test]
    fn auc_examples() {
        let s = [0.9, 0.8, 0.3, 0.2];
        assert_eq!(auc(&s, &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&s, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(auc(&[0.9, 0.2, 0.8, 0.3], &[1, 0, 0, 1]).unwrap(), 0.75);
        assert_eq!(auc(&[0.5; 4], &[1, 0, 0, 1]).unwrap(), 0.5);
        assert!(matches!(auc(&s, &[1, 1, 1, 1]), Err(Error::Dataset(_))));
    }

    #[test]
    fn pr_separated() {
        let pts = pr_curve(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap();
        assert_eq!(pts.len(), 5);
        assert!(pts
            .iter()
            .any(|p| p.precision == 1.0 && p.recall == 1.0 && p.threshold > 0.3 && p.threshold <= 0.8));
        assert_eq!(pts[0].recall, 1.0);
        assert_eq!(pts.last().unwrap().recall, 0.0);
        assert_eq!(pts.last().unwrap().precision, 1.0);
    }

    #[test]
    fn pr_all_equal() {
        let pts = pr_curve(&[0.4; 4], &[1, 0, 0, 0]).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[0].precision, pts[0].recall), (0.25, 1.0));
        assert!(pr_curve(&[0.4; 2], &[0, 0]).is_err());
    }

    #[test]
    fn csv_header() {
        let csv = pr_curve_csv(&[PrPoint {
            threshold: 0.5,
            precision: 1.0,
            recall: 0.25,
        }]);
        assert_eq!(csv, "threshold,precision,recall\n0.5,1,0.25\n");
    }

    #[test]
    fn report_json() {
        let r = MetricsReport::new(&[0.9, 0.1, 0.6, 0.4], &[1, 0, 1, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(r.samples, 4);
        assert_eq!(r.accuracy, 0.5);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["confusion"][1][1], 1);
        assert!(v["pr_curve"].is_array());
    }
}
