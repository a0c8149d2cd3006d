use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "aimer", version, about = "AIMER regression, baselines and simulation harness")]
pub struct Cli {
    /// Worker threads for parallel sections (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation study and write its report.
    Simulate(SimulateArgs),
    /// Fit one method with fixed hyperparameters.
    Fit(FitArgs),
    /// Choose hyperparameters by k-fold cross-validation, then refit.
    Cv(CvArgs),
    /// Predict responses for new rows with a saved fit.
    Predict(PredictArgs),
    /// Audit the zero-marginal-covariance assumption on a dataset.
    Audit(AuditArgs),
    /// Time a simulation study sequentially and in parallel.
    Bench(BenchArgs),
    /// Repeated train/test splits with every method tuned by CV.
    RealData(RealDataArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Csv,
    Tsv,
}

impl From<FileFormat> for aimer::io::Format {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Csv => aimer::io::Format::Csv,
            FileFormat::Tsv => aimer::io::Format::Tsv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Aimer,
    Pcr,
    Spc,
    SpcLasso,
    Ridge,
    Lasso,
}

impl From<MethodArg> for aimer::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Aimer => aimer::Method::Aimer,
            MethodArg::Pcr => aimer::Method::Pcr,
            MethodArg::Spc => aimer::Method::Spc,
            MethodArg::SpcLasso => aimer::Method::SpcLasso,
            MethodArg::Ridge => aimer::Method::Ridge,
            MethodArg::Lasso => aimer::Method::Lasso,
        }
    }
}

/// Design and response inputs with their preprocessing.
#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DataArgs {
    /// Expression matrix, rows = samples, columns = genes.
    #[arg(long)]
    pub x: PathBuf,
    /// One-column response file.
    #[arg(long)]
    pub y: PathBuf,
    #[command(flatten)]
    pub prep: PrepArgs,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PrepArgs {
    /// Input delimiter; inferred from the file extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<FileFormat>,
    /// The matrix file has genes as rows.
    #[arg(long)]
    pub transpose: bool,
    /// Per gene: log2(x - min + 1).
    #[arg(long)]
    pub log2_shift: bool,
    /// Replace the centered design by U V^T of its SVD.
    #[arg(long)]
    pub orthonormalize: bool,
    /// Response: ln(t + 1) of survival times.
    #[arg(long)]
    pub log_survival: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulateArgs {
    /// Simulation id 1..=5.
    #[arg(long)]
    pub sim: u8,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for report.json and the CSV tables.
    #[arg(long)]
    pub out: PathBuf,
    /// Custom latent factor model (JSON), compared like simulations 1 to 3.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 10)]
    pub cv_k: usize,
    #[arg(long, default_value_t = 50)]
    pub ell: usize,
    /// Override the preset sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the preset gene count.
    #[arg(long)]
    pub p: Option<usize>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Keep the `ell` genes with largest |marginal correlation|.
    #[arg(long, conflicts_with = "tstar")]
    pub ell: Option<usize>,
    /// Keep genes with |marginal correlation| > tstar.
    #[arg(long)]
    pub tstar: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Hard threshold on |beta|.
    #[arg(long, conflicts_with = "b_quantile")]
    pub b: Option<f64>,
    /// Hard threshold at this quantile level of |beta| (0 keeps all).
    #[arg(long)]
    pub b_quantile: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the fit.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output_format: OutputFormat,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CvArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[command(flatten)]
    pub data: DataArgs,
    /// Fold count.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Screened-set sizes (default: 5,10,...,99 below the fold training size).
    #[arg(long, value_delimiter = ',', conflicts_with = "tstar_grid")]
    pub ell_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub tstar_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    pub d_grid: Vec<usize>,
    /// Quantile levels of |beta| for the AIMER threshold (default: 0 plus
    /// 20 levels from 0.5 to 0.999).
    #[arg(long, value_delimiter = ',')]
    pub b_levels: Vec<f64>,
    /// Penalties (default: 50 log-spaced points below the null penalty).
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Vec<f64>,
    /// Where to write the refitted model.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON dump of every grid point's CV score.
    #[arg(long)]
    pub surface: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictArgs {
    /// Fit written by `fit` or `cv`.
    #[arg(long)]
    pub model: PathBuf,
    /// New rows; columns are matched to the fit by label.
    #[arg(long)]
    pub x: PathBuf,
    #[command(flatten)]
    pub prep: PrepArgs,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Neighborhood-selection penalties, one table column each.
    #[arg(long, value_delimiter = ',', required = true)]
    pub lambda: Vec<f64>,
    /// Entries of the marginal covariance kept as nonzero.
    #[arg(long, default_value_t = 120)]
    pub topk: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON output of the audit rows.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1)]
    pub sim: u8,
    #[arg(long, default_value_t = 2)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the preset gene count to shorten the run.
    #[arg(long)]
    pub p: Option<usize>,
    /// JSON output of the timings.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RealDataArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 10)]
    pub splits: usize,
    #[arg(long, default_value_t = 0.5)]
    pub fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub cv_k: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    pub d_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ell_grid: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for report.json and the CSV tables.
    #[arg(long)]
    pub out: PathBuf,
}
