use serde::{Deserialize, Serialize};

use super::metrics::RocPoint;

/// One method on one replication (or train/test split).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    /// Method label, e.g. `AIMER`, `AIMER(b=0)`, `SPC+lasso`, `OLS(oracle)`.
    pub arm: String,
    /// Design cell: factor strength swept in simulation 4.
    pub lambda1: Option<f64>,
    /// Design cell: component count fixed by the experiment.
    pub fixed_d: Option<usize>,
    pub prediction_mse: f64,
    /// Only for simulated data, where the truth is known.
    pub estimation_mse: Option<f64>,
    pub selected_count: usize,
    pub d: Option<usize>,
    pub ell: Option<usize>,
    pub b: Option<f64>,
    pub lambda: Option<f64>,
}

impl ReplicationRecord {
    fn cell(&self) -> (&str, Option<f64>, Option<usize>) {
        (&self.arm, self.lambda1, self.fixed_d)
    }
}

/// Aggregates over replications of one arm and design cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SummaryRow {
    pub arm: String,
    pub lambda1: Option<f64>,
    pub fixed_d: Option<usize>,
    pub replications: usize,
    pub mean_prediction_mse: f64,
    pub sd_prediction_mse: f64,
    pub mean_estimation_mse: Option<f64>,
    pub mean_selected_count: f64,
    pub sd_selected_count: f64,
    pub mean_d: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RocCurve {
    pub replication: usize,
    pub arm: String,
    pub points: Vec<RocPoint>,
    /// Best case continuation for methods with a hard selected set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<RocPoint>,
}

/// Estimate of one truly predictive coefficient, for boxplots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoefficientRecord {
    pub replication: usize,
    pub arm: String,
    pub gene: usize,
    pub estimate: f64,
    pub truth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentReport {
    /// Every setting needed to regenerate the report, root seed included.
    pub config: serde_json::Value,
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<SummaryRow>,
    #[serde(default)]
    pub roc: Vec<RocCurve>,
    #[serde(default)]
    pub coefficients: Vec<CoefficientRecord>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

impl ExperimentReport {
    pub fn new(
        config: serde_json::Value,
        records: Vec<ReplicationRecord>,
        roc: Vec<RocCurve>,
        coefficients: Vec<CoefficientRecord>,
    ) -> Self {
        ExperimentReport {
            config,
            summary: Self::summarize(&records),
            records,
            roc,
            coefficients,
        }
    }

    /// Groups by (arm, lambda1, fixed d) in order of first appearance.
    /// Standard deviations use the `n - 1` denominator.
    pub fn summarize(records: &[ReplicationRecord]) -> Vec<SummaryRow> {
        let mut cells: Vec<(&str, Option<f64>, Option<usize>)> = Vec::new();
        for r in records {
            if !cells.contains(&r.cell()) {
                cells.push(r.cell());
            }
        }
        cells
            .into_iter()
            .map(|cell| {
                let rows: Vec<&ReplicationRecord> = records.iter().filter(|r| r.cell() == cell).collect();
                let pred: Vec<f64> = rows.iter().map(|r| r.prediction_mse).collect();
                let count: Vec<f64> = rows.iter().map(|r| r.selected_count as f64).collect();
                let est: Option<Vec<f64>> = rows.iter().map(|r| r.estimation_mse).collect();
                let ds: Option<Vec<f64>> = rows.iter().map(|r| r.d.map(|d| d as f64)).collect();
                SummaryRow {
                    arm: cell.0.to_string(),
                    lambda1: cell.1,
                    fixed_d: cell.2,
                    replications: rows.len(),
                    mean_prediction_mse: mean(&pred),
                    sd_prediction_mse: sd(&pred),
                    mean_estimation_mse: est.map(|e| mean(&e)),
                    mean_selected_count: mean(&count),
                    sd_selected_count: sd(&count),
                    mean_d: ds.map(|d| mean(&d)),
                }
            })
            .collect()
    }

    /// Whether the stored summary matches a recomputation from the records.
    pub fn summary_consistent(&self) -> bool {
        Self::summarize(&self.records) == self.summary
    }

    pub fn row(&self, arm: &str, lambda1: Option<f64>, fixed_d: Option<usize>) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.arm == arm && r.lambda1 == lambda1 && r.fixed_d == fixed_d)
    }

    pub fn records_for<'a>(&'a self, arm: &'a str) -> impl Iterator<Item = &'a ReplicationRecord> + 'a {
        self.records.iter().filter(move |r| r.arm == arm)
    }

    pub fn roc_for<'a>(&'a self, arm: &'a str) -> impl Iterator<Item = &'a RocCurve> + 'a {
        self.roc.iter().filter(move |c| c.arm == arm)
    }

    /// Human-readable summary rounded to 4 decimals.
    pub fn format_table(&self) -> String {
        let mut out = format!(
            "{:<14} {:>8} {:>4} {:>5} {:>10} {:>10} {:>10} {:>9} {:>6}\n",
            "method", "lambda1", "d*", "reps", "pred MSE", "(sd)", "est MSE", "# genes", "d"
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for r in &self.summary {
            out.push_str(&format!(
                "{:<14} {:>8} {:>4} {:>5} {:>10.4} {:>10.4} {:>10} {:>9.4} {:>6}\n",
                r.arm,
                r.lambda1.map_or("-".into(), |l| format!("{l}")),
                r.fixed_d.map_or("-".into(), |d| d.to_string()),
                r.replications,
                r.mean_prediction_mse,
                r.sd_prediction_mse,
                opt(r.mean_estimation_mse),
                r.mean_selected_count,
                opt(r.mean_d),
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(rep: usize, arm: &str, mse: f64, genes: usize) -> ReplicationRecord {
        ReplicationRecord {
            replication: rep,
            seed: rep as u64,
            arm: arm.into(),
            lambda1: None,
            fixed_d: None,
            prediction_mse: mse,
            estimation_mse: Some(mse / 10.0),
            selected_count: genes,
            d: Some(2),
            ell: None,
            b: None,
            lambda: None,
        }
    }

    #[test]
    fn summary_recomputes() {
        let records = vec![rec(0, "A", 1.0, 3), rec(0, "B", 2.0, 5), rec(1, "A", 3.0, 5)];
        let report = ExperimentReport::new(serde_json::json!({"seed": 1}), records, vec![], vec![]);
        assert!(report.summary_consistent());
        let a = report.row("A", None, None).unwrap();
        assert_eq!(a.replications, 2);
        assert_eq!(a.mean_prediction_mse, 2.0);
        assert!((a.sd_prediction_mse - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(a.mean_selected_count, 4.0);
        assert_eq!(report.summary[1].arm, "B");
        assert_eq!(report.summary[1].sd_prediction_mse, 0.0);

        let mut tampered = report.clone();
        tampered.records[0].prediction_mse = 1.5;
        assert!(!tampered.summary_consistent());
    }

    #[test]
    fn empty_report_serializes() {
        let report = ExperimentReport::new(serde_json::json!({}), vec![], vec![], vec![]);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["records"], serde_json::json!([]));
        assert_eq!(json["summary"], serde_json::json!([]));
    }
}
