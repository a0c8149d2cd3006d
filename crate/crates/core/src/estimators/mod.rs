//! AIMER and the baseline estimators it is compared against.
//!
//! Every estimator consumes centered data and returns a [`FitResult`] whose
//! coefficients are in the original column order. Predictions on raw rows
//! go through the stored [`Centering`].

mod aimer;
mod lasso;
mod pcr;
mod ridge;

pub use aimer::{fit_aimer, fit_aimer_at_level, AimerFactorization, AimerInternals};
pub use lasso::{fit_lasso, fit_spc_lasso, LassoOptions, LassoProblem};
pub use pcr::{fit_pcr, fit_spc, ols, PcrPath};
pub(crate) use pcr::{embed, spc_path};
pub use ridge::{fit_ridge, RidgePath};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screening::{Centering, ExpressionDataset, Selection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Aimer,
    Pcr,
    Spc,
    SpcLasso,
    Ridge,
    Lasso,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Aimer,
        Method::Pcr,
        Method::Spc,
        Method::SpcLasso,
        Method::Ridge,
        Method::Lasso,
    ];

    /// Command-line spelling.
    pub fn cli_name(self) -> &'static str {
        match self {
            Method::Aimer => "aimer",
            Method::Pcr => "pcr",
            Method::Spc => "spc",
            Method::SpcLasso => "spc-lasso",
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Aimer => "AIMER",
            Method::Pcr => "PCR",
            Method::Spc => "SPC",
            Method::SpcLasso => "SPC+lasso",
            Method::Ridge => "ridge",
            Method::Lasso => "lasso",
        };
        f.write_str(s)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.cli_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation(format!("unknown method '{s}'")))
    }
}

/// Tuning parameters used by a fit. Only the fields a method uses are set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HyperParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    /// Screening threshold actually applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    /// Size of the screened set actually used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Quantile level of `|beta|` that produced `b`, when chosen that way.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_quantile: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl HyperParams {
    fn require_selection(&self) -> Result<Selection> {
        self.selection
            .ok_or_else(|| Error::validation("a screening selection (t* or ell) is required"))
    }

    fn require_d(&self) -> Result<usize> {
        self.d.ok_or_else(|| Error::validation("component count d is required"))
    }

    fn require_b(&self) -> Result<f64> {
        self.b.ok_or_else(|| Error::validation("coefficient threshold b is required"))
    }

    fn require_lambda(&self) -> Result<f64> {
        self.lambda.ok_or_else(|| Error::validation("penalty lambda is required"))
    }
}

/// A fitted linear predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub method: Method,
    /// Coefficients in original column order.
    pub beta: DVector<f64>,
    /// Training response mean.
    pub intercept: f64,
    pub centering: Centering,
    pub hyperparams: HyperParams,
    /// `{j : beta_j != 0}`, ascending.
    pub selected_genes: Vec<usize>,
}

impl FitResult {
    pub fn new(method: Method, beta: DVector<f64>, centering: Centering, hyperparams: HyperParams) -> Self {
        let selected_genes = support(&beta);
        FitResult {
            method,
            intercept: centering.response_mean,
            beta,
            centering,
            hyperparams,
            selected_genes,
        }
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }
}

pub fn support(beta: &DVector<f64>) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j)
        .collect()
}

/// Keeps entries with `|beta_j| > b` and zeroes the rest.
pub fn hard_threshold(beta: &DVector<f64>, b: f64) -> DVector<f64> {
    beta.map(|v| if v.abs() > b { v } else { 0.0 })
}

/// Threshold `b` at quantile `level` of `|beta|` (type-7 interpolation).
/// Level 0 means no thresholding (`b = 0`).
pub fn threshold_at_level(beta: &DVector<f64>, level: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::validation(format!("quantile level must lie in [0, 1), got {level}")));
    }
    if level == 0.0 || beta.is_empty() {
        return Ok(0.0);
    }
    let mut abs: Vec<f64> = beta.iter().map(|v| v.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let h = (abs.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(abs.len() - 1);
    Ok(abs[lo] + (h - lo as f64) * (abs[hi] - abs[lo]))
}

/// `(x_new - means) . beta + response_mean`.
pub fn predict(fit: &FitResult, x_new: &[f64]) -> Result<f64> {
    if x_new.len() != fit.p() {
        return Err(Error::dimension(format!(
            "new observation has {} entries but the model has {}",
            x_new.len(),
            fit.p()
        )));
    }
    if x_new.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("new observation has non-finite entries"));
    }
    let means = &fit.centering.column_means;
    let dot: f64 = fit
        .selected_genes
        .iter()
        .map(|&j| (x_new[j] - means[j]) * fit.beta[j])
        .sum();
    Ok(dot + fit.intercept)
}

/// Predicts every row of a raw design matrix.
pub fn predict_rows(fit: &FitResult, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x.ncols() != fit.p() {
        return Err(Error::dimension(format!(
            "design has {} columns but the model has {}",
            x.ncols(),
            fit.p()
        )));
    }
    let means = &fit.centering.column_means;
    let mut out = DVector::from_element(x.nrows(), fit.intercept);
    for &j in &fit.selected_genes {
        let bj = fit.beta[j];
        let mj = means[j];
        for (o, v) in out.iter_mut().zip(x.column(j).iter()) {
            *o += (v - mj) * bj;
        }
    }
    Ok(out)
}

/// Fits `method` with fully specified hyperparameters.
pub fn fit(method: Method, data: &ExpressionDataset, params: &HyperParams) -> Result<FitResult> {
    match method {
        Method::Aimer => {
            let selection = params.require_selection()?;
            let d = params.require_d()?;
            match (params.b, params.b_quantile) {
                (None, Some(level)) => fit_aimer_at_level(data, &selection, d, level),
                _ => Ok(fit_aimer(data, &selection, d, params.require_b()?)?.0),
            }
        }
        Method::Pcr => fit_pcr(data, params.require_d()?),
        Method::Spc => fit_spc(data, &params.require_selection()?, params.require_d()?),
        Method::SpcLasso => fit_spc_lasso(
            data,
            &params.require_selection()?,
            params.require_lambda()?,
            &LassoOptions::default(),
        ),
        Method::Ridge => fit_ridge(data, params.require_lambda()?),
        Method::Lasso => fit_lasso(data, params.require_lambda()?, &LassoOptions::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit_with(beta: &[f64], means: &[f64], intercept: f64) -> FitResult {
        FitResult::new(
            Method::Ridge,
            DVector::from_row_slice(beta),
            Centering {
                column_means: means.to_vec(),
                response_mean: intercept,
            },
            HyperParams::default(),
        )
    }

    #[test]
    fn quantile_levels_interpolate() {
        let beta = DVector::from_row_slice(&[-5.0, 1.0, 3.0, -2.0, 4.0]);
        assert_eq!(threshold_at_level(&beta, 0.0).unwrap(), 0.0);
        assert_eq!(threshold_at_level(&beta, 0.5).unwrap(), 3.0);
        assert!((threshold_at_level(&beta, 0.9).unwrap() - 4.6).abs() < 1e-12);
        assert!(threshold_at_level(&beta, -0.1).is_err());
    }

    #[test]
    fn threshold_examples() {
        let beta = DVector::from_row_slice(&[0.5, -2.0, 0.0, 1.0]);
        assert_eq!(hard_threshold(&beta, 0.0), beta);
        assert_eq!(hard_threshold(&beta, 1.0).as_slice(), &[0.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn prediction_examples() {
        let fit = fit_with(&[1.5, -0.5], &[2.0, 4.0], 7.0);
        assert_eq!(predict(&fit, &[2.0, 4.0]).unwrap(), 7.0);

        let zero = fit_with(&[0.0, 0.0], &[2.0, 4.0], 7.0);
        assert_eq!(predict(&zero, &[100.0, -3.0]).unwrap(), 7.0);

        let one = fit_with(&[2.0], &[0.0], 1.25);
        assert_eq!(predict(&one, &[3.0]).unwrap(), 6.0 + 1.25);

        assert!(matches!(predict(&one, &[1.0, 2.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn row_prediction_matches_pointwise() {
        let fit = fit_with(&[1.5, 0.0, -0.5], &[2.0, 1.0, 4.0], 0.3);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.0, 5.0]);
        let rows = predict_rows(&fit, &x).unwrap();
        for i in 0..2 {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            assert!((rows[i] - predict(&fit, &row).unwrap()).abs() < 1e-15);
        }
        assert_eq!(fit.selected_genes, vec![0, 2]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.cli_name().parse::<Method>().unwrap(), m);
        }
        assert!("foo".parse::<Method>().is_err());
    }
}
