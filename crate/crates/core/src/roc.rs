//! ROC curves and AUC.
//!
//! Thresholds sweep the distinct scores in descending order; tied scores
//! enter as one group, producing diagonal segments. The area accumulates
//! in exact integer arithmetic, so the trapezoidal AUC coincides with the
//! Mann-Whitney pair-counting statistic (#concordant + ½#tied)/(P·N).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score threshold at which this point is reached; +inf for (0,0).
    #[serde(with = "json_float")]
    pub threshold: f64,
}

/// JSON numbers cannot express infinities, so non-finite thresholds
/// serialize as strings ("inf", "-inf", "nan").
mod json_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!(
                    "bad float string {other:?}"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

#[derive(Debug, Error)]
pub enum RocError {
    #[error("ROC needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClass { positives: usize, negatives: usize },
    #[error("scores and labels have different lengths ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
}

/// Computes the ROC curve and its trapezoidal AUC. Labels are `true` for
/// the positive (High) class.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve, RocError> {
    if scores.len() != labels.len() {
        return Err(RocError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(RocError::NonFiniteScore(i));
    }
    let p: u64 = labels.iter().filter(|&&l| l).count() as u64;
    let n: u64 = labels.len() as u64 - p;
    if p == 0 || n == 0 {
        return Err(RocError::SingleClass {
            positives: p as usize,
            negatives: n as usize,
        });
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    // integer trapezoid numerator: sum of d_fp * (2*tp + d_tp)
    let mut area_num: u128 = 0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut d_tp = 0u64;
        let mut d_fp = 0u64;
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                d_tp += 1;
            } else {
                d_fp += 1;
            }
            i += 1;
        }
        area_num += d_fp as u128 * (2 * tp + d_tp) as u128;
        tp += d_tp;
        fp += d_fp;
        points.push(RocPoint {
            fpr: fp as f64 / n as f64,
            tpr: tp as f64 / p as f64,
            threshold,
        });
    }
    let auc = area_num as f64 / (2.0 * p as f64 * n as f64);
    Ok(RocCurve { points, auc })
}

/// Brute-force Mann-Whitney AUC over all positive×negative pairs. Kept as
/// the second route of the AUC dual-route check; do not fold into
/// [`roc_auc`].
pub fn pair_count_auc(scores: &[f64], labels: &[bool]) -> Result<f64, RocError> {
    let pos: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| l)
        .map(|(&s, _)| s)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|&(_, &l)| !l)
        .map(|(&s, _)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(RocError::SingleClass {
            positives: pos.len(),
            negatives: neg.len(),
        });
    }
    let mut num: u128 = 0; // 2*concordant + tied
    for &sp in &pos {
        for &sn in &neg {
            if sp > sn {
                num += 2;
            } else if sp == sn {
                num += 1;
            }
        }
    }
    Ok(num as f64 / (2.0 * pos.len() as f64 * neg.len() as f64))
}
