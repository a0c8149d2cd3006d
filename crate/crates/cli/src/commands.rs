use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use aimer::estimators::predict_rows;
use aimer::evaluation::{
    count_grid, cv_fit, default_b_levels, kfold_split, run_real_data, run_simulation_suite, CvGrid, ExperimentReport,
    RealDataProtocol, SuiteOptions, DEFAULT_ELL_GRID,
};
use aimer::io::{self, FitRecord};
use aimer::simulation::{audit as run_audit, format_audit_table, LatentFactorConfig};
use aimer::{HyperParams, Method, Selection};
use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::*;
use crate::data::{load_dataset, load_design};

/// Echo of a command and its arguments. `--jobs` is left out: it never
/// changes results, and reports must match across thread counts.
fn run_config(command: &str, args: &impl Serialize, seed: u64) -> Result<Value> {
    Ok(json!({
        "command": command,
        "rootSeed": seed,
        "args": serde_json::to_value(args)?,
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

fn attach_run(report: &mut ExperimentReport, run: Value) {
    let experiment = std::mem::take(&mut report.config);
    report.config = json!({ "run": run, "experiment": experiment });
}

fn emit(report: &ExperimentReport, out: &Path) -> Result<()> {
    let files = io::emit_report(report, out)?;
    print!("{}", report.format_table());
    println!("wrote {}", files.summary_json.display());
    Ok(())
}

pub fn simulate(a: &SimulateArgs, _cli: &Cli) -> Result<()> {
    let mut opts = SuiteOptions::new(a.sim, a.reps, a.seed);
    opts.n_train = a.n_train;
    opts.cv_folds = a.cv_k;
    opts.ell = a.ell;
    opts.n = a.n;
    opts.p = a.p;
    if let Some(path) = &a.model {
        let model: LatentFactorConfig = io::read_json(path)?;
        opts.model = Some(model);
    }
    let mut report = run_simulation_suite(&opts)?;
    attach_run(&mut report, run_config("simulate", a, a.seed)?);
    emit(&report, &a.out)
}

fn write_fit(record: &FitRecord, out: &Path, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => io::write_json(record, out)?,
        OutputFormat::Csv => io::write_fit_csv(record, out)?,
    }
    println!(
        "{} selected {} of {} genes; wrote {}",
        record.method,
        record.selected_genes.len(),
        record.p(),
        out.display()
    );
    Ok(())
}

pub fn fit(a: &FitArgs, _cli: &Cli) -> Result<()> {
    let raw = load_dataset(&a.data)?;
    let data = raw.center()?;
    let selection = match (a.ell, a.tstar) {
        (Some(l), _) => Some(Selection::Count(l)),
        (None, Some(t)) => Some(Selection::Threshold(t)),
        (None, None) => None,
    };
    let hp = HyperParams {
        selection,
        d: a.d,
        b: a.b,
        b_quantile: a.b_quantile,
        lambda: a.lambda,
        ..HyperParams::default()
    };
    let method: Method = a.method.into();
    let fit = aimer::fit(method, &data, &hp)?;
    let record = FitRecord::new(&fit, &raw.labels, run_config("fit", a, a.seed)?)?;
    write_fit(&record, &a.out, a.output_format)
}

fn uses_selection(m: Method) -> bool {
    matches!(m, Method::Aimer | Method::Spc | Method::SpcLasso)
}

pub fn cv(a: &CvArgs, _cli: &Cli) -> Result<()> {
    let raw = load_dataset(&a.data)?;
    let method: Method = a.method.into();
    let plan = kfold_split(raw.n(), a.k, a.seed)?;
    let min_train = raw.n() - plan.fold_sizes().into_iter().max().unwrap_or(0);
    let selections = if !uses_selection(method) {
        vec![]
    } else if !a.tstar_grid.is_empty() {
        a.tstar_grid.iter().map(|&t| Selection::Threshold(t)).collect()
    } else if !a.ell_grid.is_empty() {
        a.ell_grid.iter().map(|&l| Selection::Count(l)).collect()
    } else {
        count_grid(&DEFAULT_ELL_GRID, min_train, raw.p())?
    };
    let b_levels = if a.b_levels.is_empty() {
        let mut v = vec![0.0];
        v.extend(default_b_levels());
        v
    } else {
        a.b_levels.clone()
    };
    let grid = CvGrid {
        selections,
        b_levels,
        ds: a.d_grid.clone(),
        lambdas: a.lambda_grid.clone(),
    }
    .with_default_lambdas(method, &raw.center()?)?;
    let (outcome, fit) = cv_fit(method, &raw, &grid, &plan)?;
    let config = json!({
        "run": run_config("cv", a, a.seed)?,
        "grid": grid,
        "cvMse": outcome.best_mse(),
    });
    if let Some(path) = &a.surface {
        io::write_json(&json!({ "config": config, "outcome": outcome }), path)?;
    }
    println!("best CV MSE {:.4} at {}", outcome.best_mse(), serde_json::to_string(outcome.best_hyperparams())?);
    let record = FitRecord::new(&fit, &raw.labels, config)?;
    write_fit(&record, &a.out, OutputFormat::Json)
}

pub fn predict(a: &PredictArgs, _cli: &Cli) -> Result<()> {
    let record: FitRecord = io::read_json(&a.model).with_context(|| format!("reading model {}", a.model.display()))?;
    let fit = record.to_fit()?;
    let x = load_design(&a.x, &a.prep)?;
    let aligned = record.align(&x)?;
    let pred = predict_rows(&fit, &aligned)?;
    let ids: Vec<String> = match &x.row_ids {
        Some(ids) => ids.clone(),
        None => (1..=pred.len()).map(|i| i.to_string()).collect(),
    };
    let config = json!({ "run": run_config("predict", a, 0)?, "model": record.config });
    let mut text = format!("# config: {}\nid,prediction\n", serde_json::to_string(&config)?);
    for (id, v) in ids.iter().zip(pred.iter()) {
        text.push_str(&format!("{id},{}\n", io::fmt_f64(*v)));
    }
    match &a.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn audit(a: &AuditArgs, _cli: &Cli) -> Result<()> {
    let data = load_dataset(&a.data)?.center()?;
    let rows = run_audit(&data, &a.lambda, a.topk)?;
    print!("{}", format_audit_table(&rows));
    if let Some(path) = &a.out {
        io::write_json(&json!({ "config": run_config("audit", a, a.seed)?, "rows": rows }), path)?;
    }
    Ok(())
}

pub fn bench(a: &BenchArgs, _cli: &Cli) -> Result<()> {
    let mut opts = SuiteOptions::new(a.sim, a.reps, a.seed);
    opts.p = a.p;
    let timed = |jobs: usize| -> Result<(f64, ExperimentReport)> {
        let start = Instant::now();
        let report = aimer::exec::with_jobs(jobs, || run_simulation_suite(&opts))?;
        Ok((start.elapsed().as_secs_f64(), report))
    };
    let (seq_secs, seq) = timed(1)?;
    let (par_secs, par) = timed(0)?;
    if seq != par {
        bail!("reports differ between one thread and the full pool");
    }
    println!("jobs=1   {seq_secs:.3} s");
    println!("jobs=all {par_secs:.3} s (speedup {:.2}x)", seq_secs / par_secs);
    if let Some(path) = &a.out {
        io::write_json(
            &json!({
                "config": run_config("bench", a, a.seed)?,
                "parallelBuild": aimer::exec::parallel_enabled(),
                "sequentialSeconds": seq_secs,
                "parallelSeconds": par_secs,
                "identical": true,
            }),
            path,
        )?;
    }
    Ok(())
}

pub fn real_data(a: &RealDataArgs, _cli: &Cli) -> Result<()> {
    let raw = load_dataset(&a.data)?;
    let mut protocol = RealDataProtocol::new(a.seed);
    protocol.n_splits = a.splits;
    protocol.fraction = a.fraction;
    protocol.cv_folds = a.cv_k;
    protocol.d_grid = a.d_grid.clone();
    if !a.ell_grid.is_empty() {
        protocol.ell_grid = a.ell_grid.clone();
    }
    let mut report = run_real_data(&raw, &protocol)?;
    attach_run(&mut report, run_config("real-data", a, a.seed)?);
    emit(&report, &a.out)
}
