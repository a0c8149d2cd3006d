//! Drivers for the simulation studies and the real-data protocol.

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cv::{cv_fit, default_b_levels, kfold_split, CvGrid, CvPlan};
use super::metrics::{
    best_case_extension, estimation_mse, prediction_mse, roc_points, roc_points_partial, selection_point,
};
use super::report::{CoefficientRecord, ExperimentReport, ReplicationRecord, RocCurve};
use crate::error::{Error, Result};
use crate::estimators::{fit_aimer, fit_spc, ols, FitResult, HyperParams, LassoOptions, LassoProblem, Method};
use crate::exec::{derive_seed, par_map};
use crate::screening::{marginal_correlations, ExpressionDataset, RawDataset, Selection};
use crate::simulation::{simulate, simulation_config, LatentFactorConfig, SIM4_LAMBDA1_GRID};

pub const ARM_AIMER: &str = "AIMER";
pub const ARM_AIMER_B0: &str = "AIMER(b=0)";
pub const ARM_SPC: &str = "SPC";
pub const ARM_SPC_LASSO: &str = "SPC+lasso";
pub const ARM_RIDGE: &str = "ridge";
pub const ARM_LASSO: &str = "lasso";
pub const ARM_ORACLE: &str = "OLS(oracle)";

/// Screened-set sizes searched when `t*` is cross-validated.
pub const DEFAULT_ELL_GRID: [usize; 12] = [5, 10, 15, 20, 30, 40, 50, 60, 70, 80, 90, 99];

/// Seed streams, so that independent uses of one replication seed never
/// share random numbers.
const STREAM_REPLICATION: u64 = 0x5349_4d00;
const STREAM_FOLDS: u64 = 1;
const STREAM_SPLITS: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteOptions {
    /// Simulation id 1..=5; ignored when `model` is set.
    pub sim: u8,
    pub replications: usize,
    pub root_seed: u64,
    /// Leading rows used for training; the rest form the test set.
    pub n_train: usize,
    pub cv_folds: usize,
    /// Fixed screened-set size for simulations 1 to 4.
    pub ell: usize,
    /// Screened-set sizes searched in simulation 5.
    pub ell_grid: Vec<usize>,
    /// Component counts: the fixed cells of simulation 4, the CV grid of
    /// simulation 5.
    pub d_grid: Vec<usize>,
    pub lambda1_grid: Vec<f64>,
    pub b_levels: Vec<f64>,
    /// Overrides of the preset sample size and gene count.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    /// Custom model run with the simulation 1 to 3 comparison, `d = G`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<LatentFactorConfig>,
}

impl SuiteOptions {
    pub fn new(sim: u8, replications: usize, root_seed: u64) -> Self {
        SuiteOptions {
            sim,
            replications,
            root_seed,
            n_train: 100,
            cv_folds: 10,
            ell: 50,
            ell_grid: DEFAULT_ELL_GRID.to_vec(),
            d_grid: vec![1, 2, 3],
            lambda1_grid: SIM4_LAMBDA1_GRID.to_vec(),
            b_levels: default_b_levels(),
            n: None,
            p: None,
            model: None,
        }
    }

    /// The model of one replication (and, for simulation 4, one cell).
    pub fn model_config(&self, lambda1: f64, seed: u64) -> Result<LatentFactorConfig> {
        let mut cfg = match &self.model {
            Some(m) => m.clone(),
            None => simulation_config(self.sim, lambda1, seed)?,
        };
        cfg.seed = seed;
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(p) = self.p {
            cfg.p = p;
        }
        cfg.validate()?;
        if self.n_train < 2 || self.n_train >= cfg.n {
            return Err(Error::validation(format!(
                "training size {} must lie in 2..{}",
                self.n_train, cfg.n
            )));
        }
        Ok(cfg)
    }

    fn replication_seed(&self, r: usize) -> u64 {
        derive_seed(self.root_seed, STREAM_REPLICATION, r as u64)
    }
}

struct Split {
    train_raw: RawDataset,
    train: ExpressionDataset,
    test: RawDataset,
    plan: CvPlan,
}

fn split_rows(raw: &RawDataset, train_rows: &[usize], test_rows: &[usize], folds: usize, seed: u64) -> Result<Split> {
    let train_raw = raw.select_rows(train_rows);
    let train = train_raw.center()?;
    let plan = kfold_split(train_rows.len(), folds, derive_seed(seed, STREAM_FOLDS, 0))?;
    Ok(Split {
        train,
        test: raw.select_rows(test_rows),
        train_raw,
        plan,
    })
}

struct Cell {
    lambda1: Option<f64>,
    fixed_d: Option<usize>,
}

const NO_CELL: Cell = Cell {
    lambda1: None,
    fixed_d: None,
};

fn record(
    rep: usize,
    seed: u64,
    arm: &str,
    fit: &FitResult,
    split: &Split,
    truth: Option<&DVector<f64>>,
    cell: &Cell,
) -> Result<ReplicationRecord> {
    let hp: &HyperParams = &fit.hyperparams;
    Ok(ReplicationRecord {
        replication: rep,
        seed,
        arm: arm.to_string(),
        lambda1: cell.lambda1,
        fixed_d: cell.fixed_d,
        prediction_mse: prediction_mse(fit, &split.test.x, &split.test.y)?,
        estimation_mse: truth.map(|t| estimation_mse(&fit.beta, t)).transpose()?,
        selected_count: fit.selected_genes.len(),
        d: hp.d,
        ell: hp.ell,
        b: hp.b,
        lambda: hp.lambda,
    })
}

type RepOutput = (Vec<ReplicationRecord>, Vec<RocCurve>, Vec<CoefficientRecord>);

/// Largest penalty at which each screened gene is active along `lambdas`.
fn lasso_entry_scores(data: &ExpressionDataset, selected: &[usize], lambdas: &[f64]) -> Result<Vec<Option<f64>>> {
    let problem = LassoProblem::new(&data.x, selected.to_vec(), &data.y)?;
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let path = problem.path(&sorted, &LassoOptions::default())?;
    let mut scores = vec![None; data.p()];
    for (lambda, beta) in sorted.iter().zip(&path) {
        for (k, &j) in selected.iter().enumerate() {
            if beta[k] != 0.0 && scores[j].is_none() {
                scores[j] = Some(*lambda);
            }
        }
    }
    Ok(scores)
}

/// Fixed-budget comparison of simulations 1 to 3: `ell` screened genes and
/// `d` components for every method.
fn comparison_replication(opts: &SuiteOptions, rep: usize) -> Result<RepOutput> {
    let seed = opts.replication_seed(rep);
    let cfg = opts.model_config(0.0, seed)?;
    let d = cfg.factors();
    let inst = simulate(&cfg)?;
    let raw = inst.raw();
    let train_rows: Vec<usize> = (0..opts.n_train).collect();
    let test_rows: Vec<usize> = (opts.n_train..cfg.n).collect();
    let split = split_rows(&raw, &train_rows, &test_rows, opts.cv_folds, seed)?;
    let sel = Selection::Count(opts.ell);
    let truth = &inst.true_beta;

    let spc = fit_spc(&split.train, &sel, d)?;
    let lasso_grid = CvGrid {
        selections: vec![sel],
        ..CvGrid::default()
    }
    .with_default_lambdas(Method::SpcLasso, &split.train)?;
    let (_, spc_lasso) = cv_fit(Method::SpcLasso, &split.train_raw, &lasso_grid, &split.plan)?;
    let (aimer_b0, _) = fit_aimer(&split.train, &sel, d, 0.0)?;
    let aimer_grid = CvGrid {
        selections: vec![sel],
        ds: vec![d],
        b_levels: opts.b_levels.clone(),
        lambdas: vec![],
    };
    let (_, aimer) = cv_fit(Method::Aimer, &split.train_raw, &aimer_grid, &split.plan)?;

    let mut fits: Vec<(&str, FitResult)> = vec![
        (ARM_SPC, spc),
        (ARM_SPC_LASSO, spc_lasso),
        (ARM_AIMER_B0, aimer_b0),
        (ARM_AIMER, aimer),
    ];
    let support = &inst.support_beta;
    if !support.is_empty() && support.len() < opts.n_train - 1 {
        let beta = ols(&split.train, support)?;
        let hp = HyperParams {
            d: Some(support.len()),
            ..HyperParams::default()
        };
        fits.push((ARM_ORACLE, FitResult::new(Method::Pcr, beta, split.train.centering.clone(), hp)));
    }

    let mut records = Vec::new();
    let mut coefficients = Vec::new();
    for (arm, f) in &fits {
        records.push(record(rep, seed, arm, f, &split, Some(truth), &NO_CELL)?);
        for &j in support {
            coefficients.push(CoefficientRecord {
                replication: rep,
                arm: arm.to_string(),
                gene: j,
                estimate: f.beta[j],
                truth: truth[j],
            });
        }
    }

    let mut roc = Vec::new();
    if !support.is_empty() && support.len() < cfg.p {
        let aimer_scores: Vec<f64> = fits[2].1.beta.iter().map(|v| v.abs()).collect();
        roc.push(RocCurve {
            replication: rep,
            arm: ARM_AIMER.into(),
            points: roc_points(&aimer_scores, support)?,
            extension: vec![],
        });
        let plan = sel.plan(&marginal_correlations(&split.train).values)?;
        let entry = lasso_entry_scores(&split.train, &plan.selected, &lasso_grid.lambdas)?;
        roc.push(RocCurve {
            replication: rep,
            arm: ARM_SPC_LASSO.into(),
            points: roc_points_partial(&entry, support)?,
            extension: vec![],
        });
        let pt = selection_point(&fits[0].1.selected_genes, support, cfg.p)?;
        roc.push(RocCurve {
            replication: rep,
            arm: ARM_SPC.into(),
            points: vec![pt],
            extension: best_case_extension(pt),
        });
    }
    Ok((records, roc, coefficients))
}

/// Simulation 4: every method at each fixed `d`, for each `lambda1`.
fn components_replication(opts: &SuiteOptions, rep: usize) -> Result<RepOutput> {
    let seed = opts.replication_seed(rep);
    let sel = Selection::Count(opts.ell);
    let mut records = Vec::new();
    for &l1 in &opts.lambda1_grid {
        let cfg = opts.model_config(l1, seed)?;
        let inst = simulate(&cfg)?;
        let raw = inst.raw();
        let train_rows: Vec<usize> = (0..opts.n_train).collect();
        let test_rows: Vec<usize> = (opts.n_train..cfg.n).collect();
        let split = split_rows(&raw, &train_rows, &test_rows, opts.cv_folds, seed)?;
        for &d in &opts.d_grid {
            let cell = Cell {
                lambda1: Some(l1),
                fixed_d: Some(d),
            };
            let spc = fit_spc(&split.train, &sel, d)?;
            let (b0, _) = fit_aimer(&split.train, &sel, d, 0.0)?;
            let grid = CvGrid {
                selections: vec![sel],
                ds: vec![d],
                b_levels: opts.b_levels.clone(),
                lambdas: vec![],
            };
            let (_, aimer) = cv_fit(Method::Aimer, &split.train_raw, &grid, &split.plan)?;
            for (arm, f) in [(ARM_SPC, &spc), (ARM_AIMER_B0, &b0), (ARM_AIMER, &aimer)] {
                records.push(record(rep, seed, arm, f, &split, Some(&inst.true_beta), &cell)?);
            }
        }
    }
    Ok((records, vec![], vec![]))
}

/// Simulation 5: the screened-set size is cross-validated with the rest.
fn threshold_replication(opts: &SuiteOptions, rep: usize) -> Result<RepOutput> {
    let seed = opts.replication_seed(rep);
    let cfg = opts.model_config(10.0, seed)?;
    let inst = simulate(&cfg)?;
    let raw = inst.raw();
    let train_rows: Vec<usize> = (0..opts.n_train).collect();
    let test_rows: Vec<usize> = (opts.n_train..cfg.n).collect();
    let split = split_rows(&raw, &train_rows, &test_rows, opts.cv_folds, seed)?;
    let selections = count_grid(&opts.ell_grid, opts.n_train, cfg.p)?;
    let fits = tuned_fits(&split, &selections, &opts.d_grid, &opts.b_levels, false)?;
    let records = fits
        .iter()
        .map(|(arm, f)| record(rep, seed, arm, f, &split, Some(&inst.true_beta), &NO_CELL))
        .collect::<Result<Vec<_>>>()?;
    Ok((records, vec![], vec![]))
}

/// `Count` selections for sizes below the training size.
/// Screened-set sizes from `ells` that fit below the training size and
/// within `p`.
pub fn count_grid(ells: &[usize], n_train: usize, p: usize) -> Result<Vec<Selection>> {
    let s: Vec<Selection> = ells
        .iter()
        .filter(|&&l| l >= 1 && l < n_train && l <= p)
        .map(|&l| Selection::Count(l))
        .collect();
    if s.is_empty() {
        return Err(Error::validation(format!(
            "no screened-set size in {ells:?} is below the training size {n_train}"
        )));
    }
    Ok(s)
}

/// Every method with all of its tuning parameters chosen by CV.
fn tuned_fits(
    split: &Split,
    selections: &[Selection],
    ds: &[usize],
    b_levels: &[f64],
    with_global: bool,
) -> Result<Vec<(&'static str, FitResult)>> {
    let mut out = Vec::new();
    let run = |method: Method, grid: CvGrid| -> Result<FitResult> {
        Ok(cv_fit(method, &split.train_raw, &grid, &split.plan)?.1)
    };
    if with_global {
        out.push((ARM_LASSO, run(Method::Lasso, CvGrid::default())?));
        out.push((ARM_RIDGE, run(Method::Ridge, CvGrid::default())?));
    }
    out.push((
        ARM_SPC,
        run(
            Method::Spc,
            CvGrid {
                selections: selections.to_vec(),
                ds: ds.to_vec(),
                ..CvGrid::default()
            },
        )?,
    ));
    out.push((
        ARM_SPC_LASSO,
        run(
            Method::SpcLasso,
            CvGrid {
                selections: selections.to_vec(),
                ..CvGrid::default()
            },
        )?,
    ));
    out.push((
        ARM_AIMER_B0,
        run(
            Method::Aimer,
            CvGrid {
                selections: selections.to_vec(),
                ds: ds.to_vec(),
                b_levels: vec![0.0],
                lambdas: vec![],
            },
        )?,
    ));
    out.push((
        ARM_AIMER,
        run(
            Method::Aimer,
            CvGrid {
                selections: selections.to_vec(),
                ds: ds.to_vec(),
                b_levels: b_levels.to_vec(),
                lambdas: vec![],
            },
        )?,
    ));
    Ok(out)
}

fn collect(config: serde_json::Value, reps: Vec<Result<RepOutput>>) -> Result<ExperimentReport> {
    let (mut records, mut roc, mut coefficients) = (Vec::new(), Vec::new(), Vec::new());
    for r in reps {
        let (a, b, c) = r?;
        records.extend(a);
        roc.extend(b);
        coefficients.extend(c);
    }
    Ok(ExperimentReport::new(config, records, roc, coefficients))
}

/// Runs `opts.replications` independent replications of a simulation study.
/// Replication `r` uses seed `derive_seed(root_seed, _, r)`, so the report
/// does not depend on how replications are scheduled.
pub fn run_simulation_suite(opts: &SuiteOptions) -> Result<ExperimentReport> {
    if opts.replications == 0 {
        return Err(Error::validation("at least one replication is required"));
    }
    let runner: fn(&SuiteOptions, usize) -> Result<RepOutput> = match (&opts.model, opts.sim) {
        (Some(_), _) | (None, 1..=3) => comparison_replication,
        (None, 4) => components_replication,
        (None, 5) => threshold_replication,
        (None, s) => return Err(Error::validation(format!("simulation id {s} is not in 1..=5"))),
    };
    // Fail fast on bad settings before spawning work.
    opts.model_config(opts.lambda1_grid.first().copied().unwrap_or(10.0), opts.root_seed)?;
    let config = serde_json::json!({
        "kind": "simulation",
        "options": opts,
        "model": opts.model_config(opts.lambda1_grid.first().copied().unwrap_or(10.0), opts.root_seed)?,
    });
    let reps = par_map(opts.replications, |r| runner(opts, r));
    collect(config, reps)
}

/// `n_splits` seeded random train/test partitions with
/// `round(fraction * n)` training rows. Both index lists are ascending.
pub fn train_test_splits(n: usize, n_splits: usize, fraction: f64, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::validation(format!("training fraction {fraction} must lie in (0, 1)")));
    }
    if n_splits == 0 {
        return Err(Error::validation("at least one split is required"));
    }
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::validation(format!(
            "fraction {fraction} of {n} rows leaves an empty training or test set"
        )));
    }
    Ok((0..n_splits)
        .map(|s| {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SPLITS, s as u64)));
            let mut train = order[..n_train].to_vec();
            let mut test = order[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            (train, test)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RealDataProtocol {
    pub n_splits: usize,
    pub fraction: f64,
    pub cv_folds: usize,
    pub d_grid: Vec<usize>,
    pub ell_grid: Vec<usize>,
    pub b_levels: Vec<f64>,
    pub root_seed: u64,
}

impl RealDataProtocol {
    pub fn new(root_seed: u64) -> Self {
        RealDataProtocol {
            n_splits: 10,
            fraction: 0.5,
            cv_folds: 10,
            d_grid: (1..=5).collect(),
            ell_grid: DEFAULT_ELL_GRID.to_vec(),
            b_levels: default_b_levels(),
            root_seed,
        }
    }
}

/// Repeated random splits; every method is tuned by CV on the training half
/// and scored on the test half.
pub fn run_real_data(data: &RawDataset, protocol: &RealDataProtocol) -> Result<ExperimentReport> {
    let splits = train_test_splits(data.n(), protocol.n_splits, protocol.fraction, protocol.root_seed)?;
    let n_train = splits[0].0.len();
    if n_train < protocol.cv_folds || n_train < 3 {
        return Err(Error::validation(format!(
            "training size {n_train} is too small for {}-fold cross-validation",
            protocol.cv_folds
        )));
    }
    let selections = count_grid(&protocol.ell_grid, n_train, data.p())?;
    let config = serde_json::json!({
        "kind": "real-data",
        "protocol": protocol,
        "n": data.n(),
        "p": data.p(),
    });
    let reps = par_map(splits.len(), |s| -> Result<RepOutput> {
        let seed = derive_seed(protocol.root_seed, STREAM_REPLICATION, s as u64);
        let (tr, te) = &splits[s];
        let split = split_rows(data, tr, te, protocol.cv_folds, seed)?;
        let fits = tuned_fits(&split, &selections, &protocol.d_grid, &protocol.b_levels, true)?;
        let records = fits
            .iter()
            .map(|(arm, f)| record(s, seed, arm, f, &split, None, &NO_CELL))
            .collect::<Result<Vec<_>>>()?;
        Ok((records, vec![], vec![]))
    });
    collect(config, reps)
}
