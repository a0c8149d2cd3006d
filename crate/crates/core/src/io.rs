//! Reading expression matrices and responses, writing fits and reports.
//!
//! Matrices are delimited text with a header row of column labels and an
//! optional leading column of row ids. Report CSVs carry their run
//! configuration as a leading `#` comment line and print every number with
//! 17 significant digits, so reading them back reproduces the values bit
//! for bit.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FitResult, HyperParams, Method};
use crate::evaluation::{CoefficientRecord, ExperimentReport, ReplicationRecord, RocCurve};
use crate::screening::{Centering, RawDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Tsv,
}

impl Format {
    /// `.tsv`, `.tab` and `.txt` are tab separated; anything else is CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("tsv" | "tab" | "txt") => Format::Tsv,
            _ => Format::Csv,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            Format::Csv => b',',
            Format::Tsv => b'\t',
        }
    }
}

/// A numeric matrix with its labels as read from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledMatrix {
    pub matrix: DMatrix<f64>,
    pub column_labels: Vec<String>,
    pub row_ids: Option<Vec<String>>,
}

impl LabeledMatrix {
    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Swaps orientation. Row ids become column labels (generated as
    /// `g1, g2, ...` when absent) and column labels become row ids.
    pub fn transpose(self) -> Result<LabeledMatrix> {
        let column_labels = match self.row_ids {
            Some(ids) => ids,
            None => crate::screening::default_labels(self.matrix.nrows()),
        };
        check_unique_labels(&column_labels)?;
        Ok(LabeledMatrix {
            matrix: self.matrix.transpose(),
            column_labels,
            row_ids: Some(self.column_labels),
        })
    }
}

fn check_unique_labels(labels: &[String]) -> Result<()> {
    let mut seen = HashMap::with_capacity(labels.len());
    for (j, l) in labels.iter().enumerate() {
        if let Some(first) = seen.insert(l.as_str(), j) {
            return Err(Error::validation(format!(
                "duplicate column label '{l}' (columns {} and {})",
                first + 1,
                j + 1
            )));
        }
    }
    Ok(())
}

fn parse_number(cell: &str) -> Option<f64> {
    match cell {
        "NA" | "NaN" | "nan" | "" => None,
        s => s.parse::<f64>().ok().filter(|v| v.is_finite()),
    }
}

/// Parses a delimited matrix from any reader.
///
/// The first column holds row ids when the header's first cell is empty or
/// the first data row's first cell is not a number.
pub fn parse_matrix<R: Read>(reader: R, format: Format) -> Result<LabeledMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(format.delimiter())
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::Parse("empty input: expected a header row of column labels".into())),
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    for r in records {
        rows.push(r?);
    }
    let first_blank = header.get(0).is_some_and(str::is_empty);
    let first_text = rows
        .first()
        .and_then(|r| r.get(0))
        .is_some_and(|c| parse_number(c).is_none() && !matches!(c, "NA" | "NaN" | "nan" | ""));
    let has_ids = first_blank || first_text;
    let skip = usize::from(has_ids);

    let column_labels: Vec<String> = header.iter().skip(skip).map(str::to_string).collect();
    if column_labels.is_empty() {
        return Err(Error::Parse(format!("line {header_line}: header has no column labels")));
    }
    if let Some(j) = column_labels.iter().position(String::is_empty) {
        return Err(Error::Parse(format!("line {header_line}: column {} has an empty label", j + 1 + skip)));
    }
    check_unique_labels(&column_labels)?;

    let width = header.len();
    let p = column_labels.len();
    let mut values = Vec::with_capacity(rows.len() * p);
    let mut ids = Vec::new();
    for r in &rows {
        let line = r.position().map_or(0, |pos| pos.line());
        if r.len() != width {
            return Err(Error::Parse(format!(
                "line {line}: expected {width} fields, found {}",
                r.len()
            )));
        }
        if has_ids {
            ids.push(r[0].to_string());
        }
        for (j, cell) in r.iter().skip(skip).enumerate() {
            let v = parse_number(cell).ok_or_else(|| {
                Error::Parse(format!(
                    "line {line}, column {} ('{}'): non-numeric value '{cell}'",
                    j + 1 + skip,
                    column_labels[j]
                ))
            })?;
            values.push(v);
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows after the header".into()));
    }
    Ok(LabeledMatrix {
        matrix: DMatrix::from_row_slice(rows.len(), p, &values),
        column_labels,
        row_ids: has_ids.then_some(ids),
    })
}

pub fn load_matrix(path: &Path, format: Format) -> Result<LabeledMatrix> {
    let file = fs::File::open(path).map_err(|e| io_context(e, "cannot open", path))?;
    parse_matrix(std::io::BufReader::new(file), format)
}

fn io_context(e: std::io::Error, what: &str, path: &Path) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{what} {}: {e}", path.display())))
}

/// Reads a one-column response file (header required, row ids optional).
pub fn load_response(path: &Path, format: Format) -> Result<(DVector<f64>, Option<Vec<String>>)> {
    let m = load_matrix(path, format)?;
    if m.ncols() != 1 {
        return Err(Error::dimension(format!(
            "response file {} has {} value columns, expected 1",
            path.display(),
            m.ncols()
        )));
    }
    Ok((m.matrix.column(0).into_owned(), m.row_ids))
}

/// Pairs a design and a response. When both carry row ids they must agree
/// in order.
pub fn join_dataset(
    x: LabeledMatrix,
    y: DVector<f64>,
    y_ids: Option<Vec<String>>,
) -> Result<RawDataset> {
    if let (Some(xi), Some(yi)) = (&x.row_ids, &y_ids) {
        if let Some(i) = xi.iter().zip(yi).position(|(a, b)| a != b) {
            return Err(Error::validation(format!(
                "row {}: design id '{}' does not match response id '{}'",
                i + 1,
                xi[i],
                yi[i]
            )));
        }
    }
    RawDataset::new(x.matrix, y, Some(x.column_labels))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    /// Zero-based column index.
    pub gene: usize,
    pub value: f64,
}

/// Serialized form of a [`FitResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FitRecord {
    pub method: Method,
    /// Nonzero coefficients only, ascending by gene.
    pub beta: Vec<Coefficient>,
    pub intercept: f64,
    pub hyperparams: HyperParams,
    /// Labels of the genes with nonzero coefficients.
    pub selected_genes: Vec<String>,
    pub column_labels: Vec<String>,
    pub column_means: Vec<f64>,
    pub config: serde_json::Value,
}

impl FitRecord {
    pub fn new(fit: &FitResult, labels: &[String], config: serde_json::Value) -> Result<Self> {
        if labels.len() != fit.p() {
            return Err(Error::dimension(format!("{} labels for {} coefficients", labels.len(), fit.p())));
        }
        Ok(FitRecord {
            method: fit.method,
            beta: fit
                .selected_genes
                .iter()
                .map(|&j| Coefficient { gene: j, value: fit.beta[j] })
                .collect(),
            intercept: fit.intercept,
            hyperparams: fit.hyperparams.clone(),
            selected_genes: fit.selected_genes.iter().map(|&j| labels[j].clone()).collect(),
            column_labels: labels.to_vec(),
            column_means: fit.centering.column_means.clone(),
            config,
        })
    }

    pub fn p(&self) -> usize {
        self.column_labels.len()
    }

    pub fn to_fit(&self) -> Result<FitResult> {
        let p = self.p();
        if self.column_means.len() != p {
            return Err(Error::dimension(format!("{} column means for {p} labels", self.column_means.len())));
        }
        let mut beta = DVector::zeros(p);
        for c in &self.beta {
            if c.gene >= p {
                return Err(Error::dimension(format!("coefficient index {} out of range for p = {p}", c.gene)));
            }
            beta[c.gene] = c.value;
        }
        let centering = Centering {
            column_means: self.column_means.clone(),
            response_mean: self.intercept,
        };
        Ok(FitResult::new(self.method, beta, centering, self.hyperparams.clone()))
    }

    /// Reorders the columns of `x` to the fitted label order.
    pub fn align(&self, x: &LabeledMatrix) -> Result<DMatrix<f64>> {
        if x.column_labels == self.column_labels {
            return Ok(x.matrix.clone());
        }
        let index: HashMap<&str, usize> =
            x.column_labels.iter().enumerate().map(|(j, l)| (l.as_str(), j)).collect();
        let cols = self
            .column_labels
            .iter()
            .map(|l| {
                index
                    .get(l.as_str())
                    .copied()
                    .ok_or_else(|| Error::validation(format!("new data lacks fitted column '{l}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::linalg::select_columns(&x.matrix, &cols))
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_context(e, "cannot write", path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_context(e, "cannot read", path))?;
    Ok(serde_json::from_str(&text)?)
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn config_comment(config: &serde_json::Value) -> Result<String> {
    Ok(format!("# config: {}\n", serde_json::to_string(config)?))
}

fn csv_writer(path: &Path, config: &serde_json::Value) -> Result<csv::Writer<fs::File>> {
    let mut file = fs::File::create(path).map_err(|e| io_context(e, "cannot write", path))?;
    file.write_all(config_comment(config)?.as_bytes())?;
    Ok(csv::Writer::from_writer(file))
}

const RECORD_HEADER: [&str; 12] = [
    "replication",
    "seed",
    "arm",
    "lambda1",
    "fixedD",
    "predictionMse",
    "estimationMse",
    "selectedCount",
    "d",
    "ell",
    "b",
    "lambda",
];

pub fn write_records_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path, &report.config)?;
    w.write_record(RECORD_HEADER)?;
    for r in &report.records {
        w.write_record([
            r.replication.to_string(),
            r.seed.to_string(),
            r.arm.clone(),
            fmt_opt_f64(r.lambda1),
            fmt_opt_usize(r.fixed_d),
            fmt_f64(r.prediction_mse),
            fmt_opt_f64(r.estimation_mse),
            r.selected_count.to_string(),
            fmt_opt_usize(r.d),
            fmt_opt_usize(r.ell),
            fmt_opt_f64(r.b),
            fmt_opt_f64(r.lambda),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field(r: &csv::StringRecord, i: usize) -> Result<&str> {
    let line = r.position().map_or(0, |p| p.line());
    r.get(i)
        .ok_or_else(|| Error::Parse(format!("line {line}: missing field {}", i + 1)))
}

fn parse_field<T: std::str::FromStr>(r: &csv::StringRecord, i: usize) -> Result<T> {
    let s = field(r, i)?;
    s.parse().map_err(|_| {
        let line = r.position().map_or(0, |p| p.line());
        Error::Parse(format!("line {line}, column {}: cannot parse '{s}'", i + 1))
    })
}

fn parse_opt<T: std::str::FromStr>(r: &csv::StringRecord, i: usize) -> Result<Option<T>> {
    if field(r, i)?.is_empty() {
        Ok(None)
    } else {
        parse_field(r, i).map(Some)
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| io_context(e, "cannot open", path))?;
    Ok(csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file))
}

/// Reads the `# config:` comment line written ahead of a report CSV.
pub fn read_csv_config(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).map_err(|e| io_context(e, "cannot read", path))?;
    let first = text.lines().next().unwrap_or_default();
    let json = first
        .strip_prefix("# config: ")
        .ok_or_else(|| Error::Parse(format!("{}: line 1 is not a config comment", path.display())))?;
    Ok(serde_json::from_str(json)?)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ReplicationRecord>> {
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let r = rec?;
        out.push(ReplicationRecord {
            replication: parse_field(&r, 0)?,
            seed: parse_field(&r, 1)?,
            arm: field(&r, 2)?.to_string(),
            lambda1: parse_opt(&r, 3)?,
            fixed_d: parse_opt(&r, 4)?,
            prediction_mse: parse_field(&r, 5)?,
            estimation_mse: parse_opt(&r, 6)?,
            selected_count: parse_field(&r, 7)?,
            d: parse_opt(&r, 8)?,
            ell: parse_opt(&r, 9)?,
            b: parse_opt(&r, 10)?,
            lambda: parse_opt(&r, 11)?,
        });
    }
    Ok(out)
}

/// One row per ROC point; `kind` is `curve` or `extension`.
pub fn write_roc_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path, &report.config)?;
    w.write_record(["replication", "arm", "kind", "order", "fpr", "tpr"])?;
    for c in &report.roc {
        for (kind, pts) in [("curve", &c.points), ("extension", &c.extension)] {
            for (i, pt) in pts.iter().enumerate() {
                w.write_record([
                    c.replication.to_string(),
                    c.arm.clone(),
                    kind.to_string(),
                    i.to_string(),
                    fmt_f64(pt.fpr),
                    fmt_f64(pt.tpr),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_roc_csv(path: &Path) -> Result<Vec<RocCurve>> {
    let mut rdr = csv_reader(path)?;
    let mut out: Vec<RocCurve> = Vec::new();
    for rec in rdr.records() {
        let r = rec?;
        let replication: usize = parse_field(&r, 0)?;
        let arm = field(&r, 1)?;
        let kind = field(&r, 2)?;
        let pt = crate::evaluation::RocPoint {
            fpr: parse_field(&r, 4)?,
            tpr: parse_field(&r, 5)?,
        };
        let curve = match out.last_mut() {
            Some(c) if c.replication == replication && c.arm == arm => c,
            _ => {
                out.push(RocCurve {
                    replication,
                    arm: arm.to_string(),
                    points: vec![],
                    extension: vec![],
                });
                out.last_mut().expect("just pushed")
            }
        };
        match kind {
            "curve" => curve.points.push(pt),
            "extension" => curve.extension.push(pt),
            other => return Err(Error::Parse(format!("unknown ROC row kind '{other}'"))),
        }
    }
    Ok(out)
}

pub fn write_coefficients_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path, &report.config)?;
    w.write_record(["replication", "arm", "gene", "estimate", "truth"])?;
    for c in &report.coefficients {
        w.write_record([
            c.replication.to_string(),
            c.arm.clone(),
            c.gene.to_string(),
            fmt_f64(c.estimate),
            fmt_f64(c.truth),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_coefficients_csv(path: &Path) -> Result<Vec<CoefficientRecord>> {
    let mut rdr = csv_reader(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let r = rec?;
        out.push(CoefficientRecord {
            replication: parse_field(&r, 0)?,
            arm: field(&r, 1)?.to_string(),
            gene: parse_field(&r, 2)?,
            estimate: parse_field(&r, 3)?,
            truth: parse_field(&r, 4)?,
        });
    }
    Ok(out)
}

/// Files written by [`emit_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub summary_json: PathBuf,
    pub records_csv: PathBuf,
    pub roc_csv: PathBuf,
    pub coefficients_csv: PathBuf,
}

impl ReportFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ReportFiles {
            summary_json: dir.join("report.json"),
            records_csv: dir.join("records.csv"),
            roc_csv: dir.join("roc.csv"),
            coefficients_csv: dir.join("coefficients.csv"),
        }
    }
}

/// Writes the JSON report and its CSV detail tables into `dir`.
pub fn emit_report(report: &ExperimentReport, dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(dir).map_err(|e| io_context(e, "cannot create", dir))?;
    let files = ReportFiles::in_dir(dir);
    write_json(report, &files.summary_json)?;
    write_records_csv(report, &files.records_csv)?;
    write_roc_csv(report, &files.roc_csv)?;
    write_coefficients_csv(report, &files.coefficients_csv)?;
    Ok(files)
}

/// Rebuilds a report from the CSV tables written by [`emit_report`].
pub fn read_report_csv(dir: &Path) -> Result<ExperimentReport> {
    let files = ReportFiles::in_dir(dir);
    let config = read_csv_config(&files.records_csv)?;
    Ok(ExperimentReport::new(
        config,
        read_records_csv(&files.records_csv)?,
        read_roc_csv(&files.roc_csv)?,
        read_coefficients_csv(&files.coefficients_csv)?,
    ))
}

/// Nonzero coefficients of a fit as CSV: `gene,label,value`.
pub fn write_fit_csv(record: &FitRecord, path: &Path) -> Result<()> {
    let mut w = csv_writer(path, &record.config)?;
    w.write_record(["gene", "label", "value"])?;
    for c in &record.beta {
        w.write_record([c.gene.to_string(), record.column_labels[c.gene].clone(), fmt_f64(c.value)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, f: Format) -> Result<LabeledMatrix> {
        parse_matrix(text.as_bytes(), f)
    }

    #[test]
    fn two_by_two_with_header() {
        let m = parse("g1,g2\n1,2\n3,4\n", Format::Csv).unwrap();
        assert_eq!(m.matrix, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(m.column_labels, vec!["g1", "g2"]);
        assert_eq!(m.row_ids, None);
    }

    #[test]
    fn row_ids_detected() {
        let a = parse(",g1,g2\np1,1,2\np2,3,4\n", Format::Csv).unwrap();
        let b = parse("id,g1,g2\np1,1,2\np2,3,4\n", Format::Csv).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row_ids, Some(vec!["p1".into(), "p2".into()]));
        assert_eq!(a.column_labels, vec!["g1", "g2"]);
    }

    #[test]
    fn tsv_matches_csv() {
        let c = parse("g1,g2\n1.5,-2e-3\n3,4\n", Format::Csv).unwrap();
        let t = parse("g1\tg2\n1.5\t-2e-3\n3\t4\n", Format::Tsv).unwrap();
        assert_eq!(c, t);
    }

    #[test]
    fn ragged_row_names_line() {
        let e = parse("g1,g2\n1,2\n3\n", Format::Csv).unwrap_err();
        assert_eq!(e.class(), "parse");
        assert!(e.to_string().contains("line 3"), "{e}");
    }

    #[test]
    fn non_numeric_names_coordinates() {
        let e = parse("g1,g2\n1,2\n3,x\n", Format::Csv).unwrap_err();
        assert_eq!(e.class(), "parse");
        let msg = e.to_string();
        assert!(msg.contains("line 3") && msg.contains("column 2") && msg.contains("'x'"), "{msg}");
    }

    #[test]
    fn duplicate_labels_rejected() {
        let e = parse("g1,g1\n1,2\n", Format::Csv).unwrap_err();
        assert_eq!(e.class(), "validation");
    }

    #[test]
    fn transpose_swaps_labels() {
        let m = parse("gene,p1,p2,p3\ngA,1,2,3\ngB,4,5,6\n", Format::Csv).unwrap().transpose().unwrap();
        assert_eq!(m.nrows(), 3);
        assert_eq!(m.column_labels, vec!["gA", "gB"]);
        assert_eq!(m.row_ids.as_deref(), Some(&["p1".to_string(), "p2".into(), "p3".into()][..]));
        assert_eq!(m.matrix[(2, 1)], 6.0);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, f64::MIN_POSITIVE, 123_456_789.123_456_78] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn fit_record_round_trip() {
        let beta = DVector::from_vec(vec![0.0, 1.5, 0.0, -2.0, 1e-3]);
        let centering = Centering { column_means: vec![0.1, 0.2, 0.3, 0.4, 0.5], response_mean: 2.0 };
        let fit = FitResult::new(Method::Lasso, beta, centering, HyperParams { lambda: Some(0.3), ..Default::default() });
        let labels: Vec<String> = ["a", "b", "c", "d", "e"].iter().map(|s| s.to_string()).collect();
        let rec = FitRecord::new(&fit, &labels, serde_json::json!({"seed": 5})).unwrap();
        assert_eq!(rec.selected_genes, vec!["b", "d", "e"]);
        let json = serde_json::to_string(&rec).unwrap();
        let back: FitRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        assert_eq!(back.to_fit().unwrap(), fit);
    }

    #[test]
    fn align_reorders_by_label() {
        let fit = FitResult::new(
            Method::Ridge,
            DVector::from_vec(vec![1.0, 2.0]),
            Centering { column_means: vec![0.0, 0.0], response_mean: 0.0 },
            HyperParams::default(),
        );
        let rec = FitRecord::new(&fit, &["a".into(), "b".into()], serde_json::Value::Null).unwrap();
        let x = parse("b,c,a\n1,2,3\n", Format::Csv).unwrap();
        assert_eq!(rec.align(&x).unwrap(), DMatrix::from_row_slice(1, 2, &[3.0, 1.0]));
        let missing = parse("b,c\n1,2\n", Format::Csv).unwrap();
        assert_eq!(rec.align(&missing).unwrap_err().class(), "validation");
    }
}
