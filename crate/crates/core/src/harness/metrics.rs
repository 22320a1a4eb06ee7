use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fmt::{f17, serialize_f17};

/// Fraction of bags whose thresholded score matches the label. A score equal
/// to `threshold` counts as a positive prediction.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> Result<f64> {
    check_lengths(scores, labels)?;
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == (l == 1))
        .count();
    Ok(correct as f64 / scores.len() as f64)
}

fn check_lengths(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::Invalid("metrics need at least one score".into()));
    }
    if scores.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("scores contain NaN".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    #[serde(serialize_with = "serialize_f17")]
    pub fpr: f64,
    #[serde(serialize_with = "serialize_f17")]
    pub tpr: f64,
    /// Bags with score `>= threshold` are called positive. The first point
    /// uses `+inf`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    pub auc: f64,
    pub points: Vec<RocPoint>,
}

/// ROC curve over the distinct scores, from `(0, 0)` to `(1, 1)`, and its
/// area by the trapezoid rule. Tied scores move both rates at once, which
/// gives tied positive/negative pairs half credit.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<Roc> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid("ROC needs both positive and negative labels".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // Integer trapezoid: (fp - fp0) * (tp + tp0) / 2, normalized at the end.
        auc += ((fp - fp0) * (tp + tp0)) as f64;
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: t,
        });
    }
    Ok(Roc {
        auc: auc / (2.0 * pos as f64 * neg as f64),
        points,
    })
}

/// CSV with header `fpr,tpr,threshold`.
pub fn write_roc_csv(roc: &Roc, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fpr", "tpr", "threshold"])?;
    for p in &roc.points {
        w.write_record([f17(p.fpr), f17(p.tpr), f17(p.threshold)])?;
    }
    w.flush().map_err(|e| Error::io("<roc csv>", e))?;
    Ok(())
}
