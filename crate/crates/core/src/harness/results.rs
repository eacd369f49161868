use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::Method;
use crate::error::{Error, Result};
use crate::simulators::Benchmark;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One completed (or failed) training run. Field order is the CSV column
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub benchmark: Benchmark,
    pub budget: usize,
    pub seed: u64,
    pub method: Method,
    pub lambda: f64,
    pub status: RunStatus,
    pub error: String,
    pub coverage_auc: f64,
    pub coverage_auc_se: f64,
    pub expected_log_posterior: f64,
    pub expected_log_posterior_se: f64,
    pub floored: usize,
    pub bias: f64,
    pub variance: f64,
    /// `|B - 1|` on the validation pairs at the selected epoch.
    pub balance_gap: f64,
    pub best_epoch: usize,
    pub sbc_ks: f64,
    pub sbc_p_value: f64,
}

impl RunRow {
    pub fn failed(benchmark: Benchmark, budget: usize, seed: u64, method: Method, lambda: f64, error: &Error) -> Self {
        Self {
            benchmark,
            budget,
            seed,
            method,
            lambda,
            status: RunStatus::Failed,
            error: error.to_string(),
            coverage_auc: f64::NAN,
            coverage_auc_se: f64::NAN,
            expected_log_posterior: f64::NAN,
            expected_log_posterior_se: f64::NAN,
            floored: 0,
            bias: f64::NAN,
            variance: f64::NAN,
            balance_gap: f64::NAN,
            best_epoch: 0,
            sbc_ks: f64::NAN,
            sbc_p_value: f64::NAN,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }
}

/// Mean and sample standard deviation over the successful seeds of one
/// (benchmark, budget, method, lambda) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub benchmark: Benchmark,
    pub budget: usize,
    pub method: Method,
    pub lambda: f64,
    pub runs_ok: usize,
    pub runs_failed: usize,
    pub coverage_auc_mean: f64,
    pub coverage_auc_std: f64,
    pub expected_log_posterior_mean: f64,
    pub expected_log_posterior_std: f64,
    pub bias_mean: f64,
    pub bias_std: f64,
    pub variance_mean: f64,
    pub variance_std: f64,
    pub balance_gap_mean: f64,
    pub balance_gap_std: f64,
}

/// `(mean, sample std)`; the std is 0 for a single value and both are NaN
/// for none.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl ResultsTable {
    pub fn from_rows(rows: Vec<RunRow>) -> Self {
        let mut groups: Vec<(Benchmark, usize, Method, u64)> = Vec::new();
        for r in &rows {
            let g = (r.benchmark, r.budget, r.method, r.lambda.to_bits());
            if !groups.contains(&g) {
                groups.push(g);
            }
        }
        let aggregates = groups
            .into_iter()
            .map(|(benchmark, budget, method, lambda)| {
                let members: Vec<&RunRow> = rows
                    .iter()
                    .filter(|r| (r.benchmark, r.budget, r.method, r.lambda.to_bits()) == (benchmark, budget, method, lambda))
                    .collect();
                let ok: Vec<&RunRow> = members.iter().copied().filter(|r| r.is_ok()).collect();
                let stat = |f: fn(&RunRow) -> f64| mean_std(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
                let (auc_m, auc_s) = stat(|r| r.coverage_auc);
                let (elp_m, elp_s) = stat(|r| r.expected_log_posterior);
                let (b_m, b_s) = stat(|r| r.bias);
                let (v_m, v_s) = stat(|r| r.variance);
                let (g_m, g_s) = stat(|r| r.balance_gap);
                AggregateRow {
                    benchmark,
                    budget,
                    method,
                    lambda: f64::from_bits(lambda),
                    runs_ok: ok.len(),
                    runs_failed: members.len() - ok.len(),
                    coverage_auc_mean: auc_m,
                    coverage_auc_std: auc_s,
                    expected_log_posterior_mean: elp_m,
                    expected_log_posterior_std: elp_s,
                    bias_mean: b_m,
                    bias_std: b_s,
                    variance_mean: v_m,
                    variance_std: v_s,
                    balance_gap_mean: g_m,
                    balance_gap_std: g_s,
                }
            })
            .collect();
        Self { rows, aggregates }
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(RunRow::is_ok)
    }

    pub fn rows_csv(&self) -> Result<String> {
        to_csv(&self.rows)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        to_csv(&self.aggregates)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `results.csv`, `aggregate.csv` and `results.json` in `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("results.csv"), self.rows_csv()?)?;
        fs::write(dir.join("aggregate.csv"), self.aggregates_csv()?)?;
        fs::write(dir.join("results.json"), self.to_json()? + "\n")?;
        Ok(())
    }
}

fn to_csv<S: Serialize>(rows: &[S]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, method: Method, auc: f64) -> RunRow {
        let mut r = RunRow::failed(Benchmark::Weinberg, 1024, seed, method, 0.0, &Error::Format(String::new()));
        r.status = RunStatus::Ok;
        r.error.clear();
        for v in [&mut r.coverage_auc, &mut r.expected_log_posterior, &mut r.bias, &mut r.variance, &mut r.balance_gap] {
            *v = auc;
        }
        r
    }

    #[test]
    fn aggregates_recompute_from_rows_and_skip_failures() {
        let mut failed = row(3, Method::Nre, 0.0);
        failed.status = RunStatus::Failed;
        let t = ResultsTable::from_rows(vec![row(0, Method::Nre, 0.1), row(1, Method::Nre, 0.3), failed, row(0, Method::Bnre, 0.2)]);
        assert_eq!(t.aggregates.len(), 2);
        let a = &t.aggregates[0];
        assert_eq!((a.runs_ok, a.runs_failed), (2, 1));
        assert_eq!(a.coverage_auc_mean, (0.1 + 0.3) / 2.0);
        assert_eq!(a.coverage_auc_std, mean_std(&[0.1, 0.3]).1);
        assert_eq!(t.aggregates[1].coverage_auc_std, 0.0);
        assert!(!t.all_ok());
    }

    #[test]
    fn csv_columns_are_fixed() {
        let t = ResultsTable::from_rows(vec![row(0, Method::Nre, 0.5)]);
        let csv = t.rows_csv().unwrap();
        assert!(csv.starts_with(
            "benchmark,budget,seed,method,lambda,status,error,coverage_auc,coverage_auc_se,expected_log_posterior,\
             expected_log_posterior_se,floored,bias,variance,balance_gap,best_epoch,sbc_ks,sbc_p_value\n"
        ));
        assert!(csv.contains("weinberg,1024,0,nre,0.0,ok,"));
    }
}
