//! Centering, marginal correlations and threshold-based column screening.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Uncentered design and response as loaded from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct RawDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub labels: Vec<String>,
}

impl RawDataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dimension(format!(
                "design has {} rows but response has {} entries",
                x.nrows(),
                y.len()
            )));
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != x.ncols() {
                    return Err(Error::dimension(format!(
                        "{} labels for {} columns",
                        l.len(),
                        x.ncols()
                    )));
                }
                check_unique(&l)?;
                l
            }
            None => default_labels(x.ncols()),
        };
        Ok(RawDataset { x, y, labels })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> RawDataset {
        RawDataset {
            x: linalg::select_rows(&self.x, rows),
            y: DVector::from_fn(rows.len(), |i, _| self.y[rows[i]]),
            labels: self.labels.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> RawDataset {
        RawDataset {
            x: linalg::select_columns(&self.x, cols),
            y: self.y.clone(),
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
        }
    }

    pub fn center(&self) -> Result<ExpressionDataset> {
        center(&self.x, &self.y, Some(self.labels.clone()))
    }
}

pub fn default_labels(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("g{j}")).collect()
}

fn check_unique(labels: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::validation(format!("duplicate column label '{l}'")));
        }
    }
    Ok(())
}

/// Means removed by [`center`], needed to predict on new raw rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Centering {
    pub column_means: Vec<f64>,
    pub response_mean: f64,
}

/// Column-centered design and centered response.
#[derive(Clone, Debug)]
pub struct ExpressionDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub labels: Vec<String>,
    pub centering: Centering,
}

impl ExpressionDataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Keeps only `cols`; the stored means are restricted accordingly.
    pub fn select_columns(&self, cols: &[usize]) -> ExpressionDataset {
        ExpressionDataset {
            x: linalg::select_columns(&self.x, cols),
            y: self.y.clone(),
            labels: cols.iter().map(|&j| self.labels[j].clone()).collect(),
            centering: Centering {
                column_means: cols.iter().map(|&j| self.centering.column_means[j]).collect(),
                response_mean: self.centering.response_mean,
            },
        }
    }
}

/// Centers every column of `x` and the response `y`.
pub fn center(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    labels: Option<Vec<String>>,
) -> Result<ExpressionDataset> {
    let raw = RawDataset::new(x.clone(), y.clone(), labels)?;
    let n = raw.n();
    if n < 2 {
        return Err(Error::validation(format!("need at least 2 observations, got {n}")));
    }
    if raw.x.iter().chain(raw.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::validation("data contain NaN or infinite entries"));
    }
    let nf = n as f64;
    let column_means: Vec<f64> = raw.x.column_iter().map(|c| c.sum() / nf).collect();
    let response_mean = raw.y.sum() / nf;

    let mut xc = raw.x;
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-column_means[j]);
    }
    let yc = raw.y.add_scalar(-response_mean);
    let y_scale = 1.0 + response_mean.abs();
    if yc.norm() <= 1e-12 * y_scale * nf.sqrt() {
        return Err(Error::validation("response is constant; there is no signal to fit"));
    }
    Ok(ExpressionDataset {
        x: xc,
        y: yc,
        labels: raw.labels,
        centering: Centering {
            column_means,
            response_mean,
        },
    })
}

/// Marginal correlations `t_j = corr(X_j, Y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Marginals {
    pub values: Vec<f64>,
    /// Columns with (numerically) zero variance; their `t_j` is 0.
    pub zero_variance: Vec<usize>,
}

/// Computes `t_j` for every column of centered data.
///
/// Both numerator and denominator use the same normalization, so the
/// `1/n` convention cancels.
pub fn marginal_correlations(data: &ExpressionDataset) -> Marginals {
    let y_norm = data.y.norm();
    let n = data.n() as f64;
    let mut zero_variance = Vec::new();
    let values = data
        .x
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let x_norm = col.norm();
            let scale = 1.0 + data.centering.column_means[j].abs();
            if x_norm <= 1e-12 * scale * n.sqrt() || y_norm == 0.0 {
                zero_variance.push(j);
                return 0.0;
            }
            (col.dot(&data.y) / (x_norm * y_norm)).clamp(-1.0, 1.0)
        })
        .collect();
    Marginals {
        values,
        zero_variance,
    }
}

/// The screened set `A` and the column order placing it first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreeningPlan {
    pub marginals: Vec<f64>,
    pub threshold: f64,
    /// `A`, ordered by `|t_j|` descending with ties by ascending index.
    pub selected: Vec<usize>,
    /// `A` followed by the complement in ascending index order.
    pub permutation: Vec<usize>,
}

impl ScreeningPlan {
    pub fn ell(&self) -> usize {
        self.selected.len()
    }

    pub fn p(&self) -> usize {
        self.permutation.len()
    }

    /// `inverse[j]` is the position of original column `j` in the permuted order.
    pub fn inverse_permutation(&self) -> Vec<usize> {
        let mut inv = vec![0; self.permutation.len()];
        for (pos, &j) in self.permutation.iter().enumerate() {
            inv[j] = pos;
        }
        inv
    }

    fn from_selected(t: &[f64], threshold: f64, selected: Vec<usize>) -> ScreeningPlan {
        let mut in_a = vec![false; t.len()];
        for &j in &selected {
            in_a[j] = true;
        }
        let mut permutation = selected.clone();
        permutation.extend((0..t.len()).filter(|&j| !in_a[j]));
        ScreeningPlan {
            marginals: t.to_vec(),
            threshold,
            selected,
            permutation,
        }
    }
}

/// Indices sorted by `|t_j|` descending, ties by ascending index.
fn magnitude_order(t: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].abs().total_cmp(&t[a].abs()).then(a.cmp(&b)));
    order
}

fn check_finite(t: &[f64]) -> Result<()> {
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("marginal correlations contain non-finite values"));
    }
    Ok(())
}

/// `A = {j : |t_j| > t*}`.
pub fn screen(t: &[f64], threshold: f64) -> Result<ScreeningPlan> {
    check_finite(t)?;
    if !(threshold >= 0.0) || !threshold.is_finite() {
        return Err(Error::validation(format!("threshold must be finite and >= 0, got {threshold}")));
    }
    let selected: Vec<usize> = magnitude_order(t)
        .into_iter()
        .filter(|&j| t[j].abs() > threshold)
        .collect();
    if selected.is_empty() {
        let max_abs = t.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        return Err(Error::EmptyScreen { threshold, max_abs });
    }
    Ok(ScreeningPlan::from_selected(t, threshold, selected))
}

/// Threshold just below the `ell`-th largest `|t_j|`.
///
/// When the `ell`-th and `ell+1`-th magnitudes differ the midpoint is
/// returned; on a tie at the cutoff, or when `ell = p`, the largest value
/// strictly below the `ell`-th magnitude (half of it when `ell = p`).
pub fn threshold_for_count(t: &[f64], ell: usize) -> Result<f64> {
    check_finite(t)?;
    let p = t.len();
    if ell == 0 || ell > p {
        return Err(Error::dimension(format!("cannot select {ell} of {p} columns")));
    }
    let mut mags: Vec<f64> = t.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let at = mags[ell - 1];
    if at == 0.0 {
        return Err(Error::Infeasible(format!(
            "only {} columns have nonzero marginal correlation; cannot select {ell}",
            mags.iter().filter(|&&m| m > 0.0).count()
        )));
    }
    if ell == p {
        return Ok(at / 2.0);
    }
    let next = mags[ell];
    Ok(if next < at { 0.5 * (at + next) } else { at.next_down() })
}

/// Selects exactly `ell` columns by the tie rule.
///
/// Agrees with `screen(t, threshold_for_count(t, ell))` unless several
/// columns share the cutoff magnitude, in which case ties are broken by
/// ascending index and the recorded threshold is the count-based one.
pub fn screen_top(t: &[f64], ell: usize) -> Result<ScreeningPlan> {
    let threshold = threshold_for_count(t, ell)?;
    let selected: Vec<usize> = magnitude_order(t).into_iter().take(ell).collect();
    Ok(ScreeningPlan::from_selected(t, threshold, selected))
}

/// How the screened set is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Selection {
    /// Keep `|t_j| > t*`.
    Threshold(f64),
    /// Keep the `ell` largest `|t_j|`.
    Count(usize),
    /// Keep every column with nonzero marginal correlation.
    All,
}

impl Selection {
    pub fn plan(&self, t: &[f64]) -> Result<ScreeningPlan> {
        match *self {
            Selection::Threshold(ts) => screen(t, ts),
            Selection::Count(ell) => screen_top(t, ell),
            Selection::All => {
                let nonzero = t.iter().filter(|v| **v != 0.0).count();
                screen_top(t, nonzero.max(1))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(x: &[f64], rows: usize, y: &[f64]) -> ExpressionDataset {
        let x = DMatrix::from_row_slice(rows, x.len() / rows, x);
        center(&x, &DVector::from_row_slice(y), None).unwrap()
    }

    #[test]
    fn centers_and_stores_means() {
        let d = dataset(&[1.0, 3.0], 2, &[2.0, 4.0]);
        assert_eq!(d.x.as_slice(), &[-1.0, 1.0]);
        assert_eq!(d.y.as_slice(), &[-1.0, 1.0]);
        assert_eq!(d.centering.column_means, vec![2.0]);
        assert_eq!(d.centering.response_mean, 3.0);
    }

    #[test]
    fn centered_input_is_unchanged() {
        let d = dataset(&[-1.0, 2.0, 1.0, -2.0], 2, &[0.5, -0.5]);
        assert_eq!(d.x, DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 1.0, -2.0]));
        assert_eq!(d.centering.column_means, vec![0.0, 0.0]);
        assert_eq!(d.centering.response_mean, 0.0);
    }

    #[test]
    fn means_are_column_averages() {
        let d = dataset(&[1.0, 4.0, 2.0, 6.0, 6.0, 8.0], 3, &[1.0, 2.0, 4.0]);
        assert_eq!(d.centering.column_means, vec![3.0, 6.0]);
        assert!((d.centering.response_mean - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn center_rejects_constant_response_and_nan() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert!(matches!(
            center(&x, &DVector::from_row_slice(&[5.0, 5.0]), None),
            Err(Error::Validation(_))
        ));
        let xn = DMatrix::from_row_slice(2, 1, &[1.0, f64::NAN]);
        assert!(matches!(
            center(&xn, &DVector::from_row_slice(&[1.0, 2.0]), None),
            Err(Error::Validation(_))
        ));
        let labels = Some(vec!["a".to_string(), "a".to_string()]);
        let x2 = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            center(&x2, &DVector::from_row_slice(&[1.0, 2.0]), labels),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn correlation_examples() {
        let y = [1.0, -2.0, 0.5, 0.5];
        let x: Vec<f64> = y.iter().flat_map(|v| [*v, -2.0 * v]).collect();
        let d = dataset(&x, 4, &y);
        let m = marginal_correlations(&d);
        assert!((m.values[0] - 1.0).abs() < 1e-15);
        assert!((m.values[1] + 1.0).abs() < 1e-15);

        // Oracle: sum(x*y) / sqrt(sum(x^2) * sum(y^2)) = 1 / sqrt(2 * 2).
        let d = dataset(&[1.0, 0.0, -1.0], 3, &[0.0, 1.0, -1.0]);
        let m = marginal_correlations(&d);
        assert!((m.values[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_variance_column_gets_zero() {
        let d = dataset(&[3.0, 1.0, 3.0, 2.0, 3.0, 4.0], 3, &[1.0, 2.0, 4.0]);
        let m = marginal_correlations(&d);
        assert_eq!(m.values[0], 0.0);
        assert_eq!(m.zero_variance, vec![0]);
        let plan = screen(&m.values, 0.0).unwrap();
        assert_eq!(plan.selected, vec![1]);
    }

    #[test]
    fn screen_examples() {
        let t = [0.9, 0.1, 0.5];
        let plan = screen(&t, 0.4).unwrap();
        assert_eq!(plan.selected, vec![0, 2]);
        assert_eq!(plan.permutation, vec![0, 2, 1]);

        let plan = screen(&t, 0.0).unwrap();
        assert_eq!(plan.ell(), 3);

        let t = [0.1, 0.7, 0.2, 0.3, -0.7];
        let plan = screen(&t, 0.5).unwrap();
        assert_eq!(plan.selected, vec![1, 4]);
    }

    #[test]
    fn empty_screen_is_an_error() {
        assert!(matches!(screen(&[0.1, 0.2], 0.5), Err(Error::EmptyScreen { .. })));
    }

    #[test]
    fn count_examples() {
        let t = [0.9, 0.1, 0.5];
        let ts = threshold_for_count(&t, 2).unwrap();
        assert_eq!(screen(&t, ts).unwrap().selected, vec![0, 2]);
        let ts = threshold_for_count(&t, 3).unwrap();
        assert_eq!(screen(&t, ts).unwrap().ell(), 3);
        assert!(matches!(threshold_for_count(&t, 4), Err(Error::Dimension(_))));
    }

    #[test]
    fn ties_at_cutoff_follow_index_order() {
        let t: [f64; 7] = [0.3, -0.8, 0.5, 0.5, -0.5, 0.1, 0.5];
        for ell in 1..=t.len() {
            // Oracle: lexicographic sort on (-|t_j|, j), first ell entries.
            let mut keyed: Vec<(f64, usize)> = t.iter().enumerate().map(|(j, v)| (-v.abs(), j)).collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let expected: Vec<usize> = keyed.iter().take(ell).map(|k| k.1).collect();
            let plan = screen_top(&t, ell).unwrap();
            assert_eq!(plan.selected, expected, "ell = {ell}");
        }
    }
}
