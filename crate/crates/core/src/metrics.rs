//! Detection and subspace-recovery metrics.
//!
//! Scores are oriented so that a higher score means "more anomalous", and a
//! `true` label marks an anomaly (the positive class).

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::Scalar;

/// Floor reported for `log10` of a zero angle.
pub const LOG10_ANGLE_FLOOR: f64 = -16.0;

fn validate<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Labels(format!("score {i} is NaN")));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

fn require_both_classes(pos: usize, neg: usize) -> Result<()> {
    if pos == 0 || neg == 0 {
        return Err(Error::Labels(format!(
            "need both classes, got {pos} anomalies and {neg} normal samples"
        )));
    }
    Ok(())
}

/// Groups of equal score, highest score first: `(score, positives, negatives)`.
fn descending_groups<T: Scalar>(scores: &[T], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].f64().total_cmp(&scores[a].f64()));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for i in order {
        let s = scores[i].f64();
        match groups.last_mut() {
            Some(g) if g.0 == s => {}
            _ => groups.push((s, 0, 0)),
        }
        let g = groups.last_mut().expect("just pushed");
        if labels[i] {
            g.1 += 1;
        } else {
            g.2 += 1;
        }
    }
    groups
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counting one half.
pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = validate(scores, labels)?;
    require_both_classes(pos, neg)?;
    // Ascending midranks: each tie group gets the mean of the ranks it spans.
    let mut rank_sum = 0.0;
    let mut below = 0usize;
    for (_, p, n) in descending_groups(scores, labels).into_iter().rev() {
        let size = p + n;
        let mid = below as f64 + (size as f64 + 1.0) / 2.0;
        rank_sum += p as f64 * mid;
        below += size;
    }
    let (pos, neg) = (pos as f64, neg as f64);
    Ok((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from `(0,0)` to `(1,1)`.
    pub points: Vec<(f64, f64)>,
    /// Score threshold reached at each point after the origin.
    pub thresholds: Vec<f64>,
    /// Trapezoidal area under `points`.
    pub auc: f64,
}

/// ROC curve over every distinct score threshold.
pub fn roc_curve<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = validate(scores, labels)?;
    require_both_classes(pos, neg)?;
    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    for (s, p, n) in descending_groups(scores, labels) {
        let (x0, y0) = *points.last().expect("origin");
        tp += p;
        fp += n;
        let (x1, y1) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
        thresholds.push(s);
    }
    Ok(RocCurve {
        points,
        thresholds,
        auc,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Point {
    pub f1: f64,
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Best F1 over thresholds `t` taken from the scores, predicting an anomaly
/// when `score >= t`. Ties keep the highest threshold.
pub fn max_f1<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<F1Point> {
    let (pos, _) = validate(scores, labels)?;
    if pos == 0 {
        return Err(Error::Labels("max F1 needs at least one anomaly".into()));
    }
    let mut best = F1Point {
        f1: -1.0,
        threshold: f64::INFINITY,
        precision: 0.0,
        recall: 0.0,
    };
    let (mut tp, mut fp) = (0usize, 0usize);
    for (s, p, n) in descending_groups(scores, labels) {
        tp += p;
        fp += n;
        let f1 = f1_from_counts(tp, fp, pos - tp);
        if f1 > best.f1 {
            best = F1Point {
                f1,
                threshold: s,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / pos as f64,
            };
        }
    }
    Ok(best)
}

/// Precision, recall and F1 of a fixed outlier prediction.
pub fn classification_f1(predicted: &[bool], labels: &[bool]) -> Result<F1Point> {
    if predicted.len() != labels.len() {
        return Err(Error::shape("prediction and label lengths differ"));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &l) in predicted.iter().zip(labels) {
        match (p, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(F1Point {
        f1: f1_from_counts(tp, fp, fn_),
        threshold: f64::NAN,
        precision: if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 },
        recall: if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubspaceAngles {
    /// Principal angles in radians, ascending.
    pub angles: Vec<f64>,
    pub max_angle: f64,
    /// `log10(max_angle)`, floored at `LOG10_ANGLE_FLOOR`.
    pub log10_max: f64,
}

/// Principal angles between `span(b1)` and `span(b2)` (both `D x k`).
///
/// Cosines come from the singular values of `Q1^T Q2` and sines from those of
/// `(I - Q1 Q1^T) Q2`; pairing them through `atan2` keeps small angles accurate.
pub fn subspace_angle<T: Scalar>(b1: ArrayView2<T>, b2: ArrayView2<T>) -> Result<SubspaceAngles> {
    if b1.dim() != b2.dim() {
        return Err(Error::shape(format!(
            "bases have shapes {:?} and {:?}",
            b1.dim(),
            b2.dim()
        )));
    }
    let q1 = linalg::orthonormalize(&linalg::to_dmatrix(b1))?;
    let q2 = linalg::orthonormalize(&linalg::to_dmatrix(b2))?;
    let cross = q1.transpose() * &q2;
    let residual = &q2 - &q1 * &cross;
    let mut cos: Vec<f64> = cross.singular_values().iter().copied().collect();
    let mut sin: Vec<f64> = residual.singular_values().iter().copied().collect();
    cos.sort_by(|a, b| b.total_cmp(a));
    sin.sort_by(|a, b| a.total_cmp(b));
    let angles: Vec<f64> = cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| s.clamp(0.0, 1.0).atan2(c.clamp(0.0, 1.0)))
        .collect();
    let max_angle = angles.last().copied().unwrap_or(0.0);
    let log10_max = if max_angle > 0.0 {
        max_angle.log10().max(LOG10_ANGLE_FLOOR)
    } else {
        LOG10_ANGLE_FLOOR
    };
    Ok(SubspaceAngles {
        angles,
        max_angle,
        log10_max,
    })
}

/// Mean over rows of `||x_i - xhat_i||^2`.
pub fn mse<T: Scalar>(x: ArrayView2<T>, xhat: ArrayView2<T>) -> Result<f64> {
    if x.dim() != xhat.dim() {
        return Err(Error::shape(format!(
            "cannot compare {:?} with {:?}",
            x.dim(),
            xhat.dim()
        )));
    }
    if x.nrows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = x
        .iter()
        .zip(xhat.iter())
        .map(|(a, b)| (a.f64() - b.f64()).powi(2))
        .sum();
    Ok(total / x.nrows() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub max_f1: f64,
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub roc: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace_log_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_mse: Option<f64>,
}

impl EvalReport {
    pub fn from_scores<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<Self> {
        let curve = roc_curve(scores, labels)?;
        let auc = roc_auc(scores, labels)?;
        let best = max_f1(scores, labels)?;
        Ok(EvalReport {
            auc,
            max_f1: best.f1,
            best_threshold: best.threshold,
            precision: best.precision,
            recall: best.recall,
            roc: curve.points,
            subspace_angle: None,
            subspace_log_angle: None,
            val_mse: None,
        })
    }

    pub fn with_angles(mut self, angles: &SubspaceAngles) -> Self {
        self.subspace_angle = Some(angles.max_angle);
        self.subspace_log_angle = Some(angles.log10_max);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.4; 6], &[true, false, true, false, false, false]).unwrap(), 0.5);
        // the anomaly ranks below both normals: 0 wins out of 2 pairs
        assert_eq!(roc_auc(&[0.3, 0.7, 0.5], &[true, false, false]).unwrap(), 0.0);
    }

    #[test]
    fn auc_needs_both_classes() {
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1, 0.2], &[false, false]).is_err());
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
        assert!(roc_auc(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn curve_examples() {
        let c = roc_curve(&[0.9, 0.1], &[true, false]).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]);
        assert_eq!(c.auc, 1.0);
        let r = roc_curve(&[0.1, 0.9], &[true, false]).unwrap();
        assert_eq!(r.auc, 0.0);
    }

    #[test]
    fn max_f1_examples() {
        let best = max_f1(&[5.0, 4.0, 3.0, 2.0, 1.0], &[true, false, true, false, false]).unwrap();
        assert!((best.f1 - 0.8).abs() < 1e-15);
        assert_eq!(best.threshold, 3.0);
        assert!((best.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(best.recall, 1.0);

        assert_eq!(max_f1(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap().f1, 1.0);

        let mut labels = vec![false; 10];
        labels[3] = true;
        labels[7] = true;
        let scores: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(max_f1(&scores, &labels).unwrap().f1 >= 1.0 / 3.0);
        assert!(max_f1(&scores, &[false; 10]).is_err());
    }

    #[test]
    fn classification_counts() {
        let f = classification_f1(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(f.precision, 0.5);
        assert_eq!(f.recall, 0.5);
        assert_eq!(f.f1, 0.5);
        assert_eq!(classification_f1(&[false, false], &[true, false]).unwrap().f1, 0.0);
    }

    #[test]
    fn angle_examples() {
        let e1 = array![[1.0], [0.0]];
        let e2 = array![[0.0], [1.0]];
        let same = subspace_angle(e1.view(), e1.view()).unwrap();
        assert_eq!(same.max_angle, 0.0);
        assert_eq!(same.log10_max, LOG10_ANGLE_FLOOR);
        let ortho = subspace_angle(e1.view(), e2.view()).unwrap();
        assert!((ortho.max_angle - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let a = 0.3f64;
        let tilted = array![[a.cos()], [a.sin()]];
        let t = subspace_angle(e1.view(), tilted.view()).unwrap();
        assert!((t.max_angle - a).abs() < 1e-15);
        // arccos of the dot product, by hand
        assert!((t.max_angle - a.cos().acos()).abs() < 1e-12);
    }

    #[test]
    fn tiny_angles_stay_accurate() {
        let a = 1e-9f64;
        let e1 = array![[1.0], [0.0], [0.0]];
        let t = array![[a.cos()], [a.sin()], [0.0]];
        let got = subspace_angle(e1.view(), t.view()).unwrap();
        assert!((got.max_angle - a).abs() < 1e-20);
        assert!((got.log10_max + 9.0).abs() < 1e-9);
    }

    #[test]
    fn angle_rejects_rank_deficient() {
        let b = array![[1.0, 2.0], [2.0, 4.0], [0.0, 0.0]];
        let e = array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]];
        assert!(matches!(
            subspace_angle(b.view(), e.view()),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn mse_examples() {
        let x = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(mse(x.view(), x.view()).unwrap(), 0.0);
        assert_eq!(mse(array![[3.0, 4.0]].view(), array![[0.0, 0.0]].view()).unwrap(), 25.0);
        let off = array![[2.0, 2.0], [3.0, 6.0]];
        assert_eq!(mse(x.view(), off.view()).unwrap(), 2.5);
        assert!(mse(x.view(), array![[1.0, 2.0]].view()).is_err());
    }

    #[test]
    fn report_serializes_without_empty_options() {
        let r = EvalReport::from_scores(&[0.9, 0.1], &[true, false]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(!json.contains("val_mse"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
