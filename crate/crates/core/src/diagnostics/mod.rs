//! Calibration and quality diagnostics for grid posteriors.
//!
//! Every diagnostic takes a `posterior` closure mapping an observable to its
//! normalised [`PosteriorGrid`]. [`diagnose`] builds each grid once and
//! evaluates all diagnostics on it.

mod coverage;
mod hpd;
mod metrics;
mod sbc;
pub mod theorems;

use serde::{Deserialize, Serialize};

pub use coverage::{coverage_auc, default_levels, expected_coverage, parse_levels, CoverageCurve};
pub use hpd::{hpd_threshold, HpdResult, MASS_TOLERANCE};
pub use metrics::{bias_variance, expected_log_posterior, BiasVariance, LogPosterior, MeanSe, DENSITY_FLOOR};
pub use sbc::{kolmogorov_p_value, ks_uniform_distance, sample_grid, sbc_ranks, SbcResult, MIN_SBC_SAMPLES};
pub use theorems::{run_theorem_suite, temper_to_balance, verify_balance_theorems, DiscreteToy, TheoremReport, TheoremSuite};

use crate::error::Result;
use crate::ratio::PosteriorGrid;
use crate::scalar::Real;
use crate::simulators::{Benchmark, Sample};

/// A held-out `(theta*, x)` pair; `theta` holds only the inferred parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPair {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

impl TestPair {
    pub fn from_sample(benchmark: Benchmark, sample: &Sample) -> Self {
        Self { theta: benchmark.project(&sample.theta), x: sample.x.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct DiagnoseOptions {
    pub levels: Vec<f64>,
    pub sbc_samples: usize,
    pub seed: u64,
    /// Prior variance of each inferred dimension.
    pub prior_variance: Vec<f64>,
}

impl DiagnoseOptions {
    pub fn for_benchmark(benchmark: Benchmark) -> Self {
        Self {
            levels: default_levels(),
            sbc_samples: 1000,
            seed: 0,
            prior_variance: benchmark.inferred_prior().variances(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub coverage: CoverageCurve,
    pub coverage_auc: f64,
    pub log_posterior: LogPosterior,
    pub bias_variance: BiasVariance,
    pub sbc: SbcResult,
}

pub fn diagnose<T: Real, F>(mut posterior: F, test: &[TestPair], options: &DiagnoseOptions) -> Result<DiagnosticReport>
where
    F: FnMut(&[f64]) -> Result<PosteriorGrid<T>>,
{
    coverage::check_levels(&options.levels)?;
    if options.sbc_samples < MIN_SBC_SAMPLES {
        return Err(crate::error::invalid(format!("need at least {MIN_SBC_SAMPLES} posterior draws per pair")));
    }
    let n = test.len();
    let mut hits = Vec::with_capacity(n);
    let mut logs = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    let mut ranks = Vec::with_capacity(n);
    let mut degenerate = 0;
    for (i, pair) in test.iter().enumerate() {
        let grid = posterior(&pair.x)?;
        hits.push(coverage::coverage_hits(&grid, &pair.theta, &options.levels));
        logs.push(metrics::log_density_at(&grid, &pair.theta));
        moments.push(metrics::moments(&grid, &pair.theta));
        let (r, flat) = sbc::sbc_rank(&grid, &pair.theta, options.sbc_samples, &mut sbc::sbc_stream(options.seed, i));
        ranks.push(r);
        degenerate += flat as usize;
    }
    let coverage = CoverageCurve::from_hits(options.levels.clone(), &hits)?;
    let coverage_auc = if coverage.levels.len() >= 2 { coverage_auc(&coverage)? } else { f64::NAN };
    Ok(DiagnosticReport {
        coverage_auc,
        coverage,
        log_posterior: metrics::summarize_log_posterior(&logs),
        bias_variance: metrics::summarize_bias_variance(&moments, &options.prior_variance),
        sbc: sbc::summarize_sbc(ranks, degenerate),
    })
}
