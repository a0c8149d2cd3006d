use std::cmp::Ordering;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    embed, fit, hard_threshold, spc_path, threshold_at_level, AimerFactorization, FitResult, HyperParams,
    LassoOptions, LassoProblem, Method, PcrPath, RidgePath,
};
use crate::exec::par_map;
use crate::linalg::ThinSvd;
use crate::screening::{marginal_correlations, ExpressionDataset, RawDataset, Selection};

/// Fold assignment for k-fold cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvPlan {
    pub k: usize,
    /// Fold id of each observation, in `0..k`.
    pub folds: Vec<usize>,
    pub seed: u64,
}

impl CvPlan {
    pub fn n(&self) -> usize {
        self.folds.len()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }

    /// `(train, held_out)` row indices for fold `f`, both ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.n()).partition(|&i| self.folds[i] != f)
    }
}

/// Seeded shuffle of `0..n` cut into `k` contiguous blocks; the first
/// `n mod k` blocks get one extra observation.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<CvPlan> {
    if k < 2 {
        return Err(Error::validation(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::validation(format!("{k} folds requested for only {n} observations")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    let (base, extra) = (n / k, n % k);
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            folds[i] = f;
        }
        pos += size;
    }
    Ok(CvPlan { k, folds, seed })
}

/// Candidate values per tuning parameter. Only the parameters a method
/// uses are read; those must be nonempty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvGrid {
    #[serde(default)]
    pub selections: Vec<Selection>,
    /// Quantile levels of `|beta|` used as AIMER thresholds (0 = no threshold).
    #[serde(default)]
    pub b_levels: Vec<f64>,
    #[serde(default)]
    pub ds: Vec<usize>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

/// Twenty levels `1 - 10^-u`, `u` evenly spaced from `log10 2` to 3
/// (0.5 up to 0.999).
pub fn default_b_levels() -> Vec<f64> {
    let (lo, hi, m) = (2f64.log10(), 3.0, 20);
    (0..m)
        .map(|i| 1.0 - 10f64.powf(-(lo + (hi - lo) * i as f64 / (m - 1) as f64)))
        .collect()
}

/// `count` log-spaced penalties from `lambda_max` down to `ratio * lambda_max`.
pub fn lambda_path(lambda_max: f64, count: usize, ratio: f64) -> Vec<f64> {
    if count == 1 {
        return vec![lambda_max];
    }
    let span = ratio.ln();
    (0..count)
        .map(|i| lambda_max * (span * i as f64 / (count - 1) as f64).exp())
        .collect()
}

impl CvGrid {
    /// Fills an empty penalty list from the data: 50 log-spaced values below
    /// the lasso null penalty of the full design, or for ridge
    /// `s1^2 * 10^1 .. s1^2 * 10^-4` with `s1` the top singular value.
    pub fn with_default_lambdas(mut self, method: Method, data: &ExpressionDataset) -> Result<Self> {
        if !self.lambdas.is_empty() {
            return Ok(self);
        }
        self.lambdas = match method {
            Method::Lasso | Method::SpcLasso => {
                let lmax = LassoProblem::full(&data.x, &data.y)?.lambda_max();
                if !(lmax > 0.0) {
                    return Err(Error::validation("response is orthogonal to every column"));
                }
                lambda_path(lmax, 50, 1e-3)
            }
            Method::Ridge => {
                let s1 = ThinSvd::new(&data.x).largest();
                if !(s1 > 0.0) {
                    return Err(Error::validation("design is zero"));
                }
                lambda_path(s1 * s1 * 10.0, 50, 1e-5)
            }
            _ => Vec::new(),
        };
        Ok(self)
    }
}

fn strictness(sel: &Option<Selection>) -> f64 {
    match sel {
        Some(Selection::Threshold(t)) => *t,
        Some(Selection::Count(l)) => -(*l as f64),
        Some(Selection::All) => f64::NEG_INFINITY,
        None => 0.0,
    }
}

fn opt_cmp<T: Copy>(a: Option<T>, b: Option<T>, f: impl Fn(T, T) -> Ordering) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => f(x, y),
        _ => Ordering::Equal,
    }
}

/// Order among equal CV scores: larger `b`, stricter screening, smaller
/// `d`, larger `lambda` first.
fn sparsity_order(a: &HyperParams, b: &HyperParams) -> Ordering {
    opt_cmp(b.b_quantile, a.b_quantile, |x, y| x.total_cmp(&y))
        .then(strictness(&b.selection).total_cmp(&strictness(&a.selection)))
        .then(opt_cmp(a.d, b.d, |x, y| x.cmp(&y)))
        .then(opt_cmp(b.lambda, a.lambda, |x, y| x.total_cmp(&y)))
}

/// Cross-validated score of one grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvPoint {
    pub hyperparams: HyperParams,
    /// Mean of the per-fold held-out MSEs; `None` if any fold failed.
    pub mse: Option<f64>,
    pub fold_mse: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvOutcome {
    pub method: Method,
    pub plan: CvPlan,
    pub points: Vec<CvPoint>,
    pub best: usize,
}

impl CvOutcome {
    pub fn best_hyperparams(&self) -> &HyperParams {
        &self.points[self.best].hyperparams
    }

    pub fn best_mse(&self) -> f64 {
        self.points[self.best].mse.expect("best point is feasible")
    }
}

struct Axes {
    selections: Vec<Option<Selection>>,
    ds: Vec<Option<usize>>,
    b_levels: Vec<Option<f64>>,
    lambdas: Vec<Option<f64>>,
}

fn sorted_f64(v: &[f64], descending: bool) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(|a, b| if descending { b.total_cmp(a) } else { a.total_cmp(b) });
    v.dedup();
    v
}

fn axes(method: Method, grid: &CvGrid) -> Result<Axes> {
    let uses = |name: &str, empty: bool| -> Result<()> {
        if empty {
            Err(Error::validation(format!("{method} needs a nonempty {name} grid")))
        } else {
            Ok(())
        }
    };
    let (sel, d, b, lam) = match method {
        Method::Aimer => (true, true, true, false),
        Method::Pcr => (false, true, false, false),
        Method::Spc => (true, true, false, false),
        Method::SpcLasso => (true, false, false, true),
        Method::Ridge | Method::Lasso => (false, false, false, true),
    };
    let mut selections: Vec<Option<Selection>> = vec![None];
    if sel {
        uses("selection", grid.selections.is_empty())?;
        let mut s = grid.selections.clone();
        s.sort_by(|a, b| strictness(&Some(*a)).total_cmp(&strictness(&Some(*b))));
        s.dedup();
        selections = s.into_iter().map(Some).collect();
    }
    let mut ds: Vec<Option<usize>> = vec![None];
    if d {
        uses("d", grid.ds.is_empty())?;
        let mut v = grid.ds.clone();
        v.sort_unstable();
        v.dedup();
        ds = v.into_iter().map(Some).collect();
    }
    let mut b_levels: Vec<Option<f64>> = vec![None];
    if b {
        uses("b", grid.b_levels.is_empty())?;
        if let Some(bad) = grid.b_levels.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return Err(Error::validation(format!("b quantile level {bad} outside [0, 1)")));
        }
        b_levels = sorted_f64(&grid.b_levels, false).into_iter().map(Some).collect();
    }
    let mut lambdas: Vec<Option<f64>> = vec![None];
    if lam {
        uses("lambda", grid.lambdas.is_empty())?;
        if let Some(bad) = grid.lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
            return Err(Error::validation(format!("penalty {bad} must be finite and >= 0")));
        }
        lambdas = sorted_f64(&grid.lambdas, true).into_iter().map(Some).collect();
    }
    Ok(Axes {
        selections,
        ds,
        b_levels,
        lambdas,
    })
}

impl Axes {
    /// Grid points in the nesting order used by [`evaluate_fold`]:
    /// selection, then d, then b level, then lambda.
    fn points(&self) -> Vec<HyperParams> {
        let mut out = Vec::new();
        for s in &self.selections {
            for d in &self.ds {
                for b in &self.b_levels {
                    for l in &self.lambdas {
                        out.push(HyperParams {
                            selection: *s,
                            d: *d,
                            b_quantile: *b,
                            lambda: *l,
                            ..HyperParams::default()
                        });
                    }
                }
            }
        }
        out
    }
}

/// Held-out MSE of centered-scale coefficients on raw rows.
fn held_out_mse(beta: &DVector<f64>, train: &ExpressionDataset, test: &RawDataset) -> f64 {
    let means = &train.centering.column_means;
    let mut pred = DVector::from_element(test.n(), train.centering.response_mean);
    for (j, &bj) in beta.iter().enumerate() {
        if bj != 0.0 {
            let mj = means[j];
            for (o, v) in pred.iter_mut().zip(test.x.column(j).iter()) {
                *o += (v - mj) * bj;
            }
        }
    }
    (pred - &test.y).norm_squared() / test.n() as f64
}

type Score = std::result::Result<f64, String>;

fn failure(e: &Error) -> String {
    format!("{}: {e}", e.class())
}

/// Scores of every grid point on one fold, in [`Axes::points`] order.
fn evaluate_fold(method: Method, ax: &Axes, train: &ExpressionDataset, test: &RawDataset) -> Vec<Score> {
    let mut out: Vec<Score> = Vec::new();
    let opts = LassoOptions::default();
    let score = |beta: Result<DVector<f64>>| -> Score {
        beta.map(|b| held_out_mse(&b, train, test)).map_err(|e| failure(&e))
    };
    let t = marginal_correlations(train).values;
    let p = train.p();
    for sel in &ax.selections {
        let plan = sel.map(|s| s.plan(&t)).transpose();
        let plan = match plan {
            Ok(p) => p,
            Err(e) => {
                let n = ax.ds.len() * ax.b_levels.len() * ax.lambdas.len();
                out.extend(std::iter::repeat_n(Err(failure(&e)), n));
                continue;
            }
        };
        match method {
            Method::Aimer => {
                let plan = plan.expect("aimer grid has selections");
                match AimerFactorization::from_plan(train, plan) {
                    Ok(fac) => {
                        for d in &ax.ds {
                            let raw = fac.unthresholded_beta(d.expect("d grid"));
                            for b in &ax.b_levels {
                                out.push(match &raw {
                                    Ok(r) => score(
                                        threshold_at_level(r, b.expect("b grid")).map(|cut| hard_threshold(r, cut)),
                                    ),
                                    Err(e) => Err(failure(e)),
                                });
                            }
                        }
                    }
                    Err(e) => {
                        let n = ax.ds.len() * ax.b_levels.len();
                        out.extend(std::iter::repeat_n(Err(failure(&e)), n));
                    }
                }
            }
            Method::Spc => {
                let plan = plan.expect("spc grid has selections");
                let path = spc_path(train, &plan);
                for d in &ax.ds {
                    out.push(score(path.beta(d.expect("d grid")).map(|b| embed(&b, &plan.selected, p))));
                }
            }
            Method::Pcr => {
                let path = PcrPath::new(&train.x, &train.y);
                for d in &ax.ds {
                    out.push(score(path.beta(d.expect("d grid"))));
                }
            }
            Method::Ridge => {
                let path = RidgePath::new(train);
                for l in &ax.lambdas {
                    out.push(score(path.beta(l.expect("lambda grid"))));
                }
            }
            Method::Lasso | Method::SpcLasso => {
                let columns = match &plan {
                    Some(plan) => plan.selected.clone(),
                    None => (0..p).collect(),
                };
                match LassoProblem::new(&train.x, columns, &train.y) {
                    Ok(problem) => {
                        let mut warm: Option<Vec<f64>> = None;
                        for l in &ax.lambdas {
                            let sol = problem.solve(l.expect("lambda grid"), warm.as_deref(), &opts);
                            if let Ok(b) = &sol {
                                warm = Some(b.clone());
                            }
                            out.push(score(sol.map(|b| problem.embed(&b))));
                        }
                    }
                    Err(e) => out.extend(std::iter::repeat_n(Err(failure(&e)), ax.lambdas.len())),
                }
            }
        }
    }
    out
}

/// Mean held-out MSE of every grid point. Ties in the score go to the
/// sparser model (larger `b`, stricter screening, smaller `d`, larger
/// `lambda`). Grid order and duplicates do not affect the outcome.
pub fn cross_validate(method: Method, data: &RawDataset, grid: &CvGrid, plan: &CvPlan) -> Result<CvOutcome> {
    if plan.n() != data.n() {
        return Err(Error::dimension(format!(
            "fold plan covers {} observations but data has {}",
            plan.n(),
            data.n()
        )));
    }
    let ax = axes(method, grid)?;
    let hps = ax.points();
    let folds: Vec<Vec<Score>> = par_map(plan.k, |f| {
        let (tr, te) = plan.split(f);
        let train = match data.select_rows(&tr).center() {
            Ok(t) => t,
            Err(e) => return vec![Err(failure(&e)); hps.len()],
        };
        evaluate_fold(method, &ax, &train, &data.select_rows(&te))
    });

    let mut points = Vec::with_capacity(hps.len());
    for (i, hp) in hps.into_iter().enumerate() {
        let mut fold_mse = Vec::with_capacity(plan.k);
        let mut fail = None;
        for scores in &folds {
            match &scores[i] {
                Ok(v) => fold_mse.push(*v),
                Err(msg) => {
                    fail.get_or_insert_with(|| msg.clone());
                }
            }
        }
        let mse = if fail.is_none() {
            Some(fold_mse.iter().sum::<f64>() / plan.k as f64)
        } else {
            None
        };
        points.push(CvPoint {
            hyperparams: hp,
            mse,
            fold_mse,
            failure: fail,
        });
    }
    let best = points
        .iter()
        .enumerate()
        .filter(|(_, pt)| pt.mse.is_some())
        .min_by(|(_, a), (_, b)| {
            a.mse
                .unwrap()
                .total_cmp(&b.mse.unwrap())
                .then(sparsity_order(&a.hyperparams, &b.hyperparams))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            let why = points.iter().find_map(|p| p.failure.clone()).unwrap_or_default();
            Error::Infeasible(format!("no grid point could be fit on every fold (first failure: {why})"))
        })?;
    Ok(CvOutcome {
        method,
        plan: plan.clone(),
        points,
        best,
    })
}

/// Cross-validates, then refits the winning grid point on all of `data`.
pub fn cv_fit(method: Method, data: &RawDataset, grid: &CvGrid, plan: &CvPlan) -> Result<(CvOutcome, FitResult)> {
    let centered = data.center()?;
    let grid = grid.clone().with_default_lambdas(method, &centered)?;
    let outcome = cross_validate(method, data, &grid, plan)?;
    let fitted = fit(method, &centered, outcome.best_hyperparams())?;
    Ok((outcome, fitted))
}
