//! Regression and thresholded-classification metrics, all in percent except
//! MAE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    /// `None` when either series is constant.
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub f1: f64,
    /// Set when neither truth nor prediction has a positive, so F1 is 0 by
    /// convention.
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub pearson_r: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, got: b });
    }
    if a == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

pub fn regression_metrics(y: &[f64], y_hat: &[f64]) -> Result<RegressionMetrics> {
    check_lengths(y.len(), y_hat.len())?;
    let n = y.len() as f64;
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mh = y_hat.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in y.iter().zip(y_hat) {
        sxy += (a - my) * (b - mh);
        sxx += (a - my) * (a - my);
        syy += (b - mh) * (b - mh);
    }
    let pearson_r = (sxx > 0.0 && syy > 0.0)
        .then(|| (100.0 * sxy / (sxx * syy).sqrt()).clamp(-100.0, 100.0));
    Ok(RegressionMetrics { mae, pearson_r })
}

pub fn classification_metrics(truth: &[bool], pred: &[bool]) -> Result<ClassificationMetrics> {
    check_lengths(truth.len(), pred.len())?;
    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => {}
        }
        if t == p {
            correct += 1;
        }
    }
    let denom = 2 * tp + fp + fn_;
    Ok(ClassificationMetrics {
        accuracy: 100.0 * correct as f64 / truth.len() as f64,
        f1: if denom == 0 {
            0.0
        } else {
            100.0 * (2 * tp) as f64 / denom as f64
        },
        f1_undefined: denom == 0,
    })
}

/// Regression metrics, plus classification metrics when `threshold` is given
/// (positive iff the value strictly exceeds it).
pub fn evaluate(y: &[f64], y_hat: &[f64], threshold: Option<f64>) -> Result<MetricsReport> {
    let reg = regression_metrics(y, y_hat)?;
    let mut flags = Vec::new();
    if reg.pearson_r.is_none() {
        flags.push("pearson_r undefined: constant series".to_string());
    }
    let (accuracy, f1) = match threshold {
        Some(t) => {
            let truth: Vec<bool> = y.iter().map(|&v| v > t).collect();
            let pred: Vec<bool> = y_hat.iter().map(|&v| v > t).collect();
            let c = classification_metrics(&truth, &pred)?;
            if !truth.iter().any(|&b| b) {
                flags.push("no positive examples".to_string());
            }
            if c.f1_undefined {
                flags.push("f1 undefined: no positives in truth or prediction".to_string());
            }
            (Some(c.accuracy), Some(c.f1))
        }
        None => (None, None),
    };
    Ok(MetricsReport {
        mae: reg.mae,
        pearson_r: reg.pearson_r,
        accuracy,
        f1,
        n: y.len(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_and_anti_correlated() {
        let y = [1.0, 4.0, 2.0, 8.0];
        let m = regression_metrics(&y, &y).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_abs_diff_eq!(m.pearson_r.unwrap(), 100.0, epsilon = 1e-12);
        let neg: Vec<f64> = y.iter().map(|v| 3.0 - v).collect();
        assert_abs_diff_eq!(regression_metrics(&y, &neg).unwrap().pearson_r.unwrap(), -100.0, epsilon = 1e-12);
    }

    #[test]
    fn small_hand_case() {
        // Centered: y = (-1, 0, 1), y_hat = (-4/3, 2/3, 2/3); cov sum 2,
        // squared sums 2 and 8/3, so r = 2 / sqrt(16/3) = sqrt(3)/2.
        let m = regression_metrics(&[0.0, 1.0, 2.0], &[0.0, 2.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m.mae, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.pearson_r.unwrap(), 50.0 * 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn constant_prediction_leaves_r_undefined() {
        let r = evaluate(&[1.0, 2.0], &[5.0, 5.0], None).unwrap();
        assert_eq!(r.pearson_r, None);
        assert_eq!(r.mae, 3.5);
        assert_eq!(r.flags.len(), 1);
        assert!(regression_metrics(&[], &[]).is_err());
        assert!(regression_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn class_balance_examples() {
        let truth: Vec<bool> = (0..2051).map(|i| i < 1678).collect();
        let pos = classification_metrics(&truth, &[true; 2051]).unwrap();
        assert_abs_diff_eq!(pos.accuracy, 100.0 * 1678.0 / 2051.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pos.f1, 100.0 * 3356.0 / 3729.0, epsilon = 1e-12);
        let neg = classification_metrics(&truth, &[false; 2051]).unwrap();
        assert_abs_diff_eq!(neg.accuracy, 100.0 * 373.0 / 2051.0, epsilon = 1e-12);
        assert_eq!(neg.f1, 0.0);
        assert!(!neg.f1_undefined);
        let none = classification_metrics(&[false, false], &[false, false]).unwrap();
        assert_eq!((none.accuracy, none.f1, none.f1_undefined), (100.0, 0.0, true));
    }

    #[test]
    fn threshold_is_strict() {
        let r = evaluate(&[25.0, 30.0], &[25.0, 26.0], Some(25.0)).unwrap();
        assert_eq!(r.accuracy, Some(100.0));
        assert_eq!(r.f1, Some(100.0));
    }
}
