use nalgebra::{DMatrix, DVector};

use super::pcr::embed;
use super::{FitResult, HyperParams, Method};
use crate::error::{Error, Result};
use crate::screening::{marginal_correlations, ExpressionDataset, Selection};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LassoOptions {
    /// Convergence when the largest scaled coefficient change in a full
    /// sweep falls below `tolerance * sd(y)`.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tolerance: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `min (1/2n) |y - X_C beta|^2 + lambda |beta|_1` over a column subset `C`
/// of `x`, solved by cyclic coordinate descent.
pub struct LassoProblem<'a> {
    x: &'a DMatrix<f64>,
    columns: Vec<usize>,
    y: &'a DVector<f64>,
    /// `|X_j|^2 / n` per column in `columns`.
    scale: Vec<f64>,
    y_sd: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(x: &'a DMatrix<f64>, columns: Vec<usize>, y: &'a DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::dimension(format!(
                "design has {} rows but response has {}",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(&bad) = columns.iter().find(|&&j| j >= x.ncols()) {
            return Err(Error::dimension(format!("column {bad} out of range")));
        }
        let n = x.nrows() as f64;
        let scale = columns.iter().map(|&j| x.column(j).norm_squared() / n).collect();
        let y_sd = (y.norm_squared() / n).sqrt();
        Ok(LassoProblem {
            x,
            columns,
            y,
            scale,
            y_sd,
        })
    }

    /// Every `x` column as a candidate.
    pub fn full(x: &'a DMatrix<f64>, y: &'a DVector<f64>) -> Result<Self> {
        LassoProblem::new(x, (0..x.ncols()).collect(), y)
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    fn n(&self) -> f64 {
        self.x.nrows() as f64
    }

    /// Smallest `lambda` at which the solution is identically zero.
    pub fn lambda_max(&self) -> f64 {
        let n = self.n();
        self.columns
            .iter()
            .map(|&j| (self.x.column(j).dot(self.y) / n).abs())
            .fold(0.0, f64::max)
    }

    fn residual(&self, beta: &[f64]) -> DVector<f64> {
        let mut r = self.y.clone();
        for (k, &j) in self.columns.iter().enumerate() {
            if beta[k] != 0.0 {
                r.axpy(-beta[k], &self.x.column(j), 1.0);
            }
        }
        r
    }

    /// Largest violation of the optimality conditions
    /// `|X_j^T r / n| <= lambda` (zero coefficients) and
    /// `X_j^T r / n = lambda sign(beta_j)` (nonzero coefficients).
    pub fn kkt_violation(&self, beta: &[f64], lambda: f64) -> f64 {
        let r = self.residual(beta);
        let n = self.n();
        self.columns
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let g = self.x.column(j).dot(&r) / n;
                if beta[k] == 0.0 {
                    (g.abs() - lambda).max(0.0)
                } else {
                    (g - lambda * beta[k].signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// One pass over `which`; returns the largest scaled change.
    fn sweep(&self, which: &[usize], beta: &mut [f64], r: &mut DVector<f64>, lambda: f64) -> f64 {
        let n = self.n();
        let mut max_change = 0.0_f64;
        for &k in which {
            let c = self.scale[k];
            if c == 0.0 {
                beta[k] = 0.0;
                continue;
            }
            let col = self.x.column(self.columns[k]);
            let rho = col.dot(r) / n + c * beta[k];
            let new = soft_threshold(rho, lambda) / c;
            let delta = new - beta[k];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                beta[k] = new;
                max_change = max_change.max(delta.abs() * c.sqrt());
            }
        }
        max_change
    }

    /// Solves at `lambda`, optionally warm-started.
    pub fn solve(&self, lambda: f64, warm: Option<&[f64]>, opts: &LassoOptions) -> Result<Vec<f64>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::validation(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let m = self.columns.len();
        let mut beta = match warm {
            Some(w) if w.len() == m => w.to_vec(),
            Some(w) => {
                return Err(Error::dimension(format!("warm start has {} entries, expected {m}", w.len())))
            }
            None => vec![0.0; m],
        };
        if self.y_sd == 0.0 {
            return Ok(vec![0.0; m]);
        }
        let tol = opts.tolerance * self.y_sd;
        let all: Vec<usize> = (0..m).collect();
        let mut r = self.residual(&beta);
        let mut sweeps = 0;
        let mut last_change = f64::INFINITY;
        while sweeps < opts.max_sweeps {
            last_change = self.sweep(&all, &mut beta, &mut r, lambda);
            sweeps += 1;
            if last_change < tol {
                return Ok(beta);
            }
            // Iterate on the active set until it settles, then recheck all.
            let active: Vec<usize> = (0..m).filter(|&k| beta[k] != 0.0).collect();
            while sweeps < opts.max_sweeps {
                let change = self.sweep(&active, &mut beta, &mut r, lambda);
                sweeps += 1;
                if change < tol {
                    break;
                }
            }
        }
        Err(Error::Convergence {
            sweeps,
            max_change: last_change,
            kkt_violation: self.kkt_violation(&beta, lambda),
            residual_norm: r.norm(),
        })
    }

    /// Solutions along `lambdas` (expected decreasing) with warm starts.
    pub fn path(&self, lambdas: &[f64], opts: &LassoOptions) -> Result<Vec<Vec<f64>>> {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let beta = self.solve(lambda, out.last().map(|b| b.as_slice()), opts)?;
            out.push(beta);
        }
        Ok(out)
    }

    /// Embeds a solution over `columns` into a length-`p` vector.
    pub fn embed(&self, beta: &[f64]) -> DVector<f64> {
        embed(&DVector::from_row_slice(beta), &self.columns, self.x.ncols())
    }
}

pub fn fit_lasso(data: &ExpressionDataset, lambda: f64, opts: &LassoOptions) -> Result<FitResult> {
    let problem = LassoProblem::full(&data.x, &data.y)?;
    let beta = problem.solve(lambda, None, opts)?;
    Ok(FitResult::new(
        Method::Lasso,
        problem.embed(&beta),
        data.centering.clone(),
        HyperParams {
            lambda: Some(lambda),
            ..HyperParams::default()
        },
    ))
}

/// Lasso of `Y` on the screened columns `X_A`; coefficients outside `A`
/// are zero.
pub fn fit_spc_lasso(
    data: &ExpressionDataset,
    selection: &Selection,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<FitResult> {
    let plan = selection.plan(&marginal_correlations(data).values)?;
    let problem = LassoProblem::new(&data.x, plan.selected.clone(), &data.y)?;
    let beta = problem.solve(lambda, None, opts)?;
    Ok(FitResult::new(
        Method::SpcLasso,
        problem.embed(&beta),
        data.centering.clone(),
        HyperParams {
            selection: Some(*selection),
            t_star: Some(plan.threshold),
            ell: Some(plan.ell()),
            lambda: Some(lambda),
            ..HyperParams::default()
        },
    ))
}
