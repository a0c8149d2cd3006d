use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{predict_rows, FitResult};

/// Mean squared test error of `fit` on raw rows `x` with responses `y`.
pub fn prediction_mse(fit: &FitResult, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::validation("test set is empty"));
    }
    if x.nrows() != y.len() {
        return Err(Error::dimension(format!("{} test rows but {} responses", x.nrows(), y.len())));
    }
    let pred = predict_rows(fit, x)?;
    Ok((pred - y).norm_squared() / y.len() as f64)
}

/// `mean_j (beta_hat_j - beta_j)^2` over all coordinates.
pub fn estimation_mse(beta_hat: &DVector<f64>, beta: &DVector<f64>) -> Result<f64> {
    if beta_hat.len() != beta.len() {
        return Err(Error::dimension(format!(
            "estimate has {} coefficients but truth has {}",
            beta_hat.len(),
            beta.len()
        )));
    }
    if beta.is_empty() {
        return Err(Error::validation("no coefficients to compare"));
    }
    Ok((beta_hat - beta).norm_squared() / beta.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

impl RocPoint {
    pub fn new(fpr: f64, tpr: f64) -> Self {
        RocPoint { fpr, tpr }
    }
}

fn truth_mask(truth: &[usize], p: usize) -> Result<(Vec<bool>, usize)> {
    let mut mask = vec![false; p];
    for &j in truth {
        if j >= p {
            return Err(Error::dimension(format!("true support index {j} out of range for p = {p}")));
        }
        mask[j] = true;
    }
    let positives = mask.iter().filter(|m| **m).count();
    if positives == 0 || positives == p {
        return Err(Error::validation(
            "true support must be nonempty and a proper subset of the genes",
        ));
    }
    Ok((mask, positives))
}

/// ROC curve of a ranking: genes with larger scores are selected first.
/// Starts at (0, 0) and adds one point per distinct score.
pub fn roc_points(scores: &[f64], truth: &[usize]) -> Result<Vec<RocPoint>> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::validation("scores must be finite"));
    }
    let opt: Vec<Option<f64>> = scores.iter().map(|&s| Some(s)).collect();
    roc_points_partial(&opt, truth)
}

/// As [`roc_points`] for a method that never selects the unscored (`None`)
/// genes, so the curve stops short of (1, 1).
pub fn roc_points_partial(scores: &[Option<f64>], truth: &[usize]) -> Result<Vec<RocPoint>> {
    let p = scores.len();
    let (mask, positives) = truth_mask(truth, p)?;
    let negatives = (p - positives) as f64;
    let positives = positives as f64;
    let mut ranked: Vec<(f64, bool)> = scores
        .iter()
        .zip(&mask)
        .filter_map(|(s, &m)| s.map(|s| (s, m)))
        .collect();
    if ranked.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::validation("scores must be finite"));
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![RocPoint::new(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let s = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == s {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint::new(fp as f64 / negatives, tp as f64 / positives));
    }
    Ok(points)
}

/// Operating point of a fixed selected set.
pub fn selection_point(selected: &[usize], truth: &[usize], p: usize) -> Result<RocPoint> {
    let (mask, positives) = truth_mask(truth, p)?;
    let mut seen = vec![false; p];
    let (mut tp, mut fp) = (0usize, 0usize);
    for &j in selected {
        if j >= p {
            return Err(Error::dimension(format!("selected index {j} out of range for p = {p}")));
        }
        if std::mem::replace(&mut seen[j], true) {
            continue;
        }
        if mask[j] {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    Ok(RocPoint::new(
        fp as f64 / (p - positives) as f64,
        tp as f64 / positives as f64,
    ))
}

/// Best case continuation from a fixed operating point: the remaining true
/// genes are all found before any further false positive.
pub fn best_case_extension(point: RocPoint) -> Vec<RocPoint> {
    vec![point, RocPoint::new(point.fpr, 1.0), RocPoint::new(1.0, 1.0)]
}

/// Largest TPR reached at FPR at most `fpr_max`.
pub fn tpr_at_fpr(curve: &[RocPoint], fpr_max: f64) -> f64 {
    curve
        .iter()
        .filter(|pt| pt.fpr <= fpr_max)
        .map(|pt| pt.tpr)
        .fold(0.0, f64::max)
}
