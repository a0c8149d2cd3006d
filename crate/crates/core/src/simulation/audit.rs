//! How often a zero marginal covariance hides a nonzero regression
//! coefficient, given a sparse precision estimate: `beta = Theta Sigma_xy`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::POPULATION_ZERO_TOL;
use crate::error::{Error, Result};
use crate::estimators::{LassoOptions, LassoProblem};
use crate::exec::par_map;
use crate::screening::ExpressionDataset;

/// Symmetric `p x p` matrix stored as its diagonal plus the nonzero
/// strictly-upper entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsePrecision {
    diagonal: Vec<f64>,
    upper: BTreeMap<(usize, usize), f64>,
}

impl SparsePrecision {
    pub fn diagonal_only(diagonal: Vec<f64>) -> Self {
        SparsePrecision {
            diagonal,
            upper: BTreeMap::new(),
        }
    }

    /// Sets the `(j, k)` and `(k, j)` entries. Zero removes the entry.
    pub fn set(&mut self, j: usize, k: usize, value: f64) {
        let p = self.dim();
        assert!(j < p && k < p, "index ({j}, {k}) out of range for p = {p}");
        if j == k {
            self.diagonal[j] = value;
            return;
        }
        let key = (j.min(k), j.max(k));
        if value == 0.0 {
            self.upper.remove(&key);
        } else {
            self.upper.insert(key, value);
        }
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        if j == k {
            return self.diagonal[j];
        }
        self.upper.get(&(j.min(k), j.max(k))).copied().unwrap_or(0.0)
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dimension(format!("precision must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let p = m.nrows();
        let scale = crate::linalg::max_abs(m).max(f64::MIN_POSITIVE);
        let mut out = SparsePrecision::diagonal_only(m.diagonal().iter().copied().collect());
        for j in 0..p {
            for k in j + 1..p {
                if (m[(j, k)] - m[(k, j)]).abs() > 1e-10 * scale {
                    return Err(Error::validation(format!("precision is not symmetric at ({j}, {k})")));
                }
                out.set(j, k, 0.5 * (m[(j, k)] + m[(k, j)]));
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::from_diagonal(&DVector::from_row_slice(&self.diagonal));
        for (&(j, k), &v) in &self.upper {
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn edges(&self) -> usize {
        self.upper.len()
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.dim() {
            return Err(Error::dimension(format!(
                "vector has length {} but precision is {}x{}",
                v.len(),
                self.dim(),
                self.dim()
            )));
        }
        let mut out = DVector::from_fn(self.dim(), |j, _| self.diagonal[j] * v[j]);
        for (&(j, k), &w) in &self.upper {
            out[j] += w * v[k];
            out[k] += w * v[j];
        }
        Ok(out)
    }

    /// Fraction of off-diagonal entries that are zero (1 for diagonal).
    pub fn sparsity(&self) -> f64 {
        let p = self.dim();
        if p < 2 {
            return 1.0;
        }
        let pairs = (p * (p - 1) / 2) as f64;
        1.0 - self.upper.len() as f64 / pairs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FnrReport {
    /// `|{j : beta_j != 0}| / p`.
    pub beta_nonzero_fraction: f64,
    /// `|{j : beta_j != 0, (Sigma_xy)_j = 0}| / |{j : beta_j != 0}|`.
    pub false_negative_rate: f64,
    pub nonzero_beta: usize,
    pub false_negatives: usize,
}

pub fn assumption_fnr(precision: &SparsePrecision, sigma_xy: &DVector<f64>) -> Result<FnrReport> {
    let beta = precision.mul_vec(sigma_xy)?;
    let scale_b = beta.amax().max(f64::MIN_POSITIVE);
    let scale_s = sigma_xy.amax().max(f64::MIN_POSITIVE);
    // Relative zero tests keep the report invariant to rescaling sigma_xy.
    let nonzero: Vec<usize> = (0..beta.len())
        .filter(|&j| beta[j].abs() > POPULATION_ZERO_TOL * scale_b)
        .collect();
    if beta.amax() == 0.0 || nonzero.is_empty() {
        return Err(Error::Undefined(
            "beta = Theta Sigma_xy is identically zero; the false negative rate is undefined".into(),
        ));
    }
    let false_negatives = nonzero
        .iter()
        .filter(|&&j| sigma_xy[j].abs() <= POPULATION_ZERO_TOL * scale_s)
        .count();
    Ok(FnrReport {
        beta_nonzero_fraction: nonzero.len() as f64 / beta.len() as f64,
        false_negative_rate: false_negatives as f64 / nonzero.len() as f64,
        nonzero_beta: nonzero.len(),
        false_negatives,
    })
}

/// Neighborhood-selection estimate of the precision matrix.
///
/// Each column `X_j` is lasso-regressed on the others at penalty `lambda`.
/// An edge `(j, k)` is kept when both regressions select each other. Its
/// weight is the average of `-b_jk / s_j^2` and `-b_kj / s_k^2`, where
/// `s_j^2` is the residual variance of regression `j`, which also gives
/// the diagonal `1 / s_j^2`.
/// Neighbors of one node, their coefficients and the residual variance.
type NodeFit = (Vec<usize>, Vec<f64>, f64);

pub fn neighborhood_precision(data: &ExpressionDataset, lambda: f64) -> Result<SparsePrecision> {
    if !(lambda > 0.0) {
        return Err(Error::validation(format!("lambda must be positive, got {lambda}")));
    }
    let x = &data.x;
    let p = x.ncols();
    let n = x.nrows() as f64;
    let opts = LassoOptions::default();
    let fits: Vec<Result<NodeFit>> = par_map(p, |j| {
        let target = x.column(j).into_owned();
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let problem = LassoProblem::new(x, others.clone(), &target)?;
        let b = problem.solve(lambda, None, &opts)?;
        let mut resid = target.clone();
        for (i, &k) in others.iter().enumerate() {
            if b[i] != 0.0 {
                resid.axpy(-b[i], &x.column(k), 1.0);
            }
        }
        let s2 = resid.norm_squared() / n;
        if !(s2 > 0.0) {
            return Err(Error::Undefined(format!(
                "column {j} is fit exactly by the others; its conditional variance is zero"
            )));
        }
        Ok((others, b, s2))
    });
    let fits = fits.into_iter().collect::<Result<Vec<_>>>()?;

    let mut coef: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(p);
    let mut diag = Vec::with_capacity(p);
    for (others, b, s2) in &fits {
        diag.push(1.0 / s2);
        coef.push(
            others
                .iter()
                .zip(b)
                .filter(|(_, v)| **v != 0.0)
                .map(|(&k, &v)| (k, -v / s2))
                .collect(),
        );
    }
    let mut out = SparsePrecision::diagonal_only(diag);
    for j in 0..p {
        for (&k, &w_jk) in &coef[j] {
            if k > j {
                if let Some(&w_kj) = coef[k].get(&j) {
                    out.set(j, k, 0.5 * (w_jk + w_kj));
                }
            }
        }
    }
    Ok(out)
}

/// Keeps the `k` largest-magnitude entries (ties by lower index) and zeroes
/// the rest.
pub fn sparsify_top_k(v: &DVector<f64>, k: usize) -> DVector<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    let mut out = DVector::zeros(v.len());
    for &j in order.iter().take(k) {
        out[j] = v[j];
    }
    out
}

/// One column of the audit table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditRow {
    pub lambda: f64,
    pub sparsity: f64,
    pub edges: usize,
    pub report: FnrReport,
}

/// Runs the audit at each penalty: estimate the precision, keep the `top_k`
/// largest entries of `X^T Y / n`, and count false negatives.
pub fn audit(data: &ExpressionDataset, lambdas: &[f64], top_k: usize) -> Result<Vec<AuditRow>> {
    let n = data.n() as f64;
    let sigma_xy = sparsify_top_k(&(data.x.transpose() * &data.y / n), top_k);
    lambdas
        .iter()
        .map(|&lambda| {
            let precision = neighborhood_precision(data, lambda)?;
            Ok(AuditRow {
                lambda,
                sparsity: precision.sparsity(),
                edges: precision.edges(),
                report: assumption_fnr(&precision, &sigma_xy)?,
            })
        })
        .collect()
}

/// Three-row text table: precision sparsity, fraction of nonzero `beta`,
/// false negative rate; one column per penalty, 4 decimals.
pub fn format_audit_table(rows: &[AuditRow]) -> String {
    let mut out = String::new();
    let line = |name: &str, vals: Vec<f64>| {
        let mut s = format!("{name:<16}");
        for v in vals {
            s.push_str(&format!(" {v:>8.4}"));
        }
        s.push('\n');
        s
    };
    out.push_str(&line("lambda", rows.iter().map(|r| r.lambda).collect()));
    out.push_str(&line("sparsity", rows.iter().map(|r| r.sparsity).collect()));
    out.push_str(&line(
        "nonzero beta",
        rows.iter().map(|r| r.report.beta_nonzero_fraction).collect(),
    ));
    out.push_str(&line("FNR", rows.iter().map(|r| r.report.false_negative_rate).collect()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::center;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn diagonal_precision_has_no_false_negatives() {
        let prec = SparsePrecision::diagonal_only(vec![1.0, 2.0, 0.5, 3.0]);
        let s = DVector::from_row_slice(&[1.0, 0.0, -2.0, 0.0]);
        let r = assumption_fnr(&prec, &s).unwrap();
        assert_eq!(r.false_negative_rate, 0.0);
        assert_eq!(r.beta_nonzero_fraction, 0.5);
        assert_eq!(prec.sparsity(), 1.0);
    }

    #[test]
    fn hand_computed_three_gene_example() {
        let mut prec = SparsePrecision::diagonal_only(vec![2.0, 1.0, 2.0]);
        prec.set(2, 0, 0.5);
        let s = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        // beta = (2, 0, 0.5): nonzero at genes 1 and 3, gene 3 has no marginal.
        let r = assumption_fnr(&prec, &s).unwrap();
        assert_eq!(r.nonzero_beta, 2);
        assert_eq!(r.false_negatives, 1);
        assert_eq!(r.false_negative_rate, 0.5);
    }

    #[test]
    fn zero_beta_is_undefined() {
        let prec = SparsePrecision::diagonal_only(vec![1.0; 3]);
        let err = assumption_fnr(&prec, &DVector::zeros(3)).unwrap_err();
        assert_eq!(err.class(), "undefined");
    }

    #[test]
    fn dense_round_trip_and_product() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, -0.2, 0.0, -0.2, 4.0]);
        let sp = SparsePrecision::from_dense(&m).unwrap();
        assert_eq!(sp.to_dense(), m);
        assert_eq!(sp.edges(), 2);
        let v = DVector::from_row_slice(&[1.0, -1.0, 2.0]);
        assert!((sp.mul_vec(&v).unwrap() - &m * &v).amax() < 1e-15);
        let mut asym = m.clone();
        asym[(0, 1)] = 1.0;
        assert!(SparsePrecision::from_dense(&asym).is_err());
    }

    #[test]
    fn top_k_keeps_largest() {
        let v = DVector::from_row_slice(&[0.1, -3.0, 2.0, 2.0, 0.0]);
        assert_eq!(sparsify_top_k(&v, 2).as_slice(), &[0.0, -3.0, 2.0, 0.0, 0.0]);
    }

    fn gaussian_data(n: usize, p: usize, seed: u64, mix: impl Fn(&mut [f64])) -> ExpressionDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(n, p);
        let mut row = vec![0.0; p];
        for i in 0..n {
            for v in row.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            mix(&mut row);
            for j in 0..p {
                x[(i, j)] = row[j];
            }
        }
        let y = DVector::from_fn(n, |i, _| x[(i, 0)] + i as f64 * 1e-3);
        center(&x, &y, None).unwrap()
    }

    #[test]
    fn large_penalty_gives_diagonal() {
        let data = gaussian_data(60, 5, 1, |_| {});
        let prec = neighborhood_precision(&data, 10.0).unwrap();
        assert_eq!(prec.edges(), 0);
        assert_eq!(prec.sparsity(), 1.0);
    }

    #[test]
    fn chain_structure_recovered() {
        let mut recovered = 0;
        for seed in 0..20 {
            let data = gaussian_data(500, 3, 100 + seed, |r| {
                r[1] += 0.8 * r[0];
                r[2] += 0.8 * r[1];
            });
            let prec = neighborhood_precision(&data, 0.1).unwrap();
            if prec.get(0, 2) == 0.0 && prec.get(0, 1) != 0.0 && prec.get(1, 2) != 0.0 {
                recovered += 1;
            }
        }
        assert!(recovered >= 18, "chain recovered in {recovered}/20 seeds");
    }

    #[test]
    fn table_has_three_metric_rows() {
        let data = gaussian_data(80, 6, 4, |r| r[1] += r[0]);
        let rows = audit(&data, &[0.05, 0.5], 3).unwrap();
        let table = format_audit_table(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("sparsity"));
        assert!(lines[2].starts_with("nonzero beta"));
        assert!(lines[3].starts_with("FNR"));
    }
}
