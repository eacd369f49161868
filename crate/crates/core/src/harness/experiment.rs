use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::io::{load_dataset, save_dataset, save_weights, write_report};
use super::results::{ResultsTable, RunRow, RunStatus};
use crate::diagnostics::{default_levels, diagnose, DiagnoseOptions, TestPair};
use crate::diffnet::Activation;
use crate::error::{invalid, Error, Result};
use crate::ratio::posterior_grid;
use crate::simulators::rng::derive_seed;
use crate::simulators::{generate_dataset, Benchmark, Dataset};
use crate::training::{train, TrainConfig, DEFAULT_LAMBDA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Nre,
    Bnre,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nre => "nre",
            Method::Bnre => "bnre",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nre" => Ok(Method::Nre),
            "bnre" => Ok(Method::Bnre),
            _ => Err(invalid(format!("unknown method `{s}` (expected nre or bnre)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub benchmark: Benchmark,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Penalty strength of BNRE runs; NRE runs always use 0.
    pub lambda: f64,
    pub levels: Vec<f64>,
    pub n_test: usize,
    /// Seed of the held-out test set, drawn from its own stream namespace.
    pub test_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub sbc_samples: usize,
    /// Concurrent runs; results do not depend on it.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            benchmark: Benchmark::Tractable1d,
            budgets: vec![1 << 10, 1 << 12, 1 << 14],
            seeds: vec![0, 1, 2],
            methods: vec![Method::Nre, Method::Bnre],
            lambda: DEFAULT_LAMBDA,
            levels: default_levels(),
            n_test: 1000,
            test_seed: 0,
            output_dir: None,
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            validation_fraction: t.validation_fraction,
            hidden: t.hidden,
            activation: t.activation,
            sbc_samples: 1000,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| invalid(format!("bad experiment config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budgets.is_empty() || self.budgets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("budgets must be non-empty and strictly ascending"));
        }
        if self.seeds.is_empty() || self.methods.is_empty() {
            return Err(invalid("need at least one seed and one method"));
        }
        if self.n_test == 0 || self.workers == 0 {
            return Err(invalid("n_test and workers must be positive"));
        }
        if self.benchmark.inferred().len() > 2 {
            return Err(invalid("grid diagnostics support at most 2 inferred dimensions"));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("seeds must be distinct"));
        }
        self.train_config(0.0, 0).validate()?;
        crate::diagnostics::parse_levels(&self.levels.iter().map(f64::to_string).collect::<Vec<_>>().join(","))?;
        Ok(())
    }

    pub(crate) fn train_config(&self, lambda: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            lambda,
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            validation_fraction: self.validation_fraction,
            seed,
            hidden: self.hidden.clone(),
            activation: self.activation,
        }
    }
}

/// Stream seed of the training dataset for experiment seed `seed`.
pub fn dataset_seed(benchmark: Benchmark, seed: u64) -> u64 {
    derive_seed("dataset", &[benchmark as u64, seed])
}

/// Stream seed of the held-out test set.
pub fn test_set_seed(benchmark: Benchmark, test_seed: u64) -> u64 {
    derive_seed("test-set", &[benchmark as u64, test_seed])
}

pub fn test_set(benchmark: Benchmark, n: usize, test_seed: u64) -> Result<Vec<TestPair>> {
    let d = generate_dataset(benchmark, n, test_set_seed(benchmark, test_seed))?;
    Ok(d.samples.iter().map(|s| TestPair::from_sample(benchmark, s)).collect())
}

/// One training run. The run's randomness depends only on this key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RunKey {
    pub budget: usize,
    pub seed: u64,
    pub lambda: f64,
}

impl RunKey {
    pub(crate) fn method(&self) -> Method {
        if self.lambda == 0.0 {
            Method::Nre
        } else {
            Method::Bnre
        }
    }

    fn train_seed(&self) -> u64 {
        derive_seed("run", &[self.budget as u64, self.seed, self.lambda.to_bits()])
    }

    fn label(&self, benchmark: Benchmark) -> String {
        match self.method() {
            Method::Nre => format!("{benchmark}_n{}_s{}_nre", self.budget, self.seed),
            Method::Bnre => format!("{benchmark}_n{}_s{}_bnre_l{}", self.budget, self.seed, self.lambda),
        }
    }
}

/// Wall-clock seconds per run, kept apart from the deterministic table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub run: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub table: ResultsTable,
    pub timings: Vec<Timing>,
}

/// Training data for every (budget, seed), reusing files already present
/// in the output directory.
fn datasets(config: &ExperimentConfig, keys: &[RunKey]) -> Result<BTreeMap<(usize, u64), Dataset>> {
    let b = config.benchmark;
    let mut out = BTreeMap::new();
    for k in keys {
        if out.contains_key(&(k.budget, k.seed)) {
            continue;
        }
        let seed = dataset_seed(b, k.seed);
        let path = config.output_dir.as_ref().map(|d| d.join("datasets").join(format!("{b}_n{}_s{}.bin", k.budget, k.seed)));
        let existing = match &path {
            Some(p) if p.exists() => Some(load_dataset(p)?),
            _ => None,
        };
        let data = match existing {
            Some(d) if d.benchmark == b && d.seed == seed && d.len() == k.budget => d,
            _ => {
                let d = generate_dataset(b, k.budget, seed)?;
                if let Some(p) = &path {
                    save_dataset(p, &d)?;
                }
                d
            }
        };
        out.insert((k.budget, k.seed), data);
    }
    Ok(out)
}

fn run_one(config: &ExperimentConfig, key: RunKey, data: &Dataset, test: &[TestPair], dir: Option<&Path>) -> Result<RunRow> {
    let b = config.benchmark;
    let cfg = config.train_config(key.lambda, key.train_seed());
    let trained = train::<f64>(b, data, &cfg).map_err(|f| f.error)?;
    let opts = DiagnoseOptions {
        levels: config.levels.clone(),
        sbc_samples: config.sbc_samples,
        seed: derive_seed("sbc-run", &[key.train_seed()]),
        prior_variance: b.inferred_prior().variances(),
    };
    let report = diagnose(|x: &[f64]| posterior_grid(&trained.net, b, x), test, &opts)?;
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        save_weights(&dir.join("weights.json"), &trained.net)?;
        trained.history.write_csv(fs::File::create(dir.join("history.csv"))?)?;
        report.coverage.write_csv(fs::File::create(dir.join("coverage.csv"))?)?;
        write_report(&dir.join("report.json"), &report)?;
    }
    let best = trained.history.best().expect("history is non-empty");
    Ok(RunRow {
        benchmark: b,
        budget: key.budget,
        seed: key.seed,
        method: key.method(),
        lambda: key.lambda,
        status: RunStatus::Ok,
        error: String::new(),
        coverage_auc: report.coverage_auc,
        coverage_auc_se: report.coverage.auc_se.unwrap_or(f64::NAN),
        expected_log_posterior: report.log_posterior.mean,
        expected_log_posterior_se: report.log_posterior.se,
        floored: report.log_posterior.floored,
        bias: report.bias_variance.bias,
        variance: report.bias_variance.variance,
        balance_gap: (best.balance_b - 1.0).abs(),
        best_epoch: trained.history.best_epoch,
        sbc_ks: report.sbc.ks_distance,
        sbc_p_value: report.sbc.p_value,
    })
}

pub(crate) fn run_keys(config: &ExperimentConfig, keys: Vec<RunKey>) -> Result<ExperimentOutput> {
    config.validate()?;
    let b = config.benchmark;
    if let Some(d) = &config.output_dir {
        fs::create_dir_all(d.join("datasets"))?;
        fs::create_dir_all(d.join("runs"))?;
    }
    let data = datasets(config, &keys)?;
    let test = test_set(b, config.n_test, config.test_seed)?;

    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..config.workers.min(keys.len()) {
            let tx = tx.clone();
            let (keys, data, test, next) = (&keys, &data, &test, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&key) = keys.get(i) else { break };
                let dir = config.output_dir.as_ref().map(|d| d.join("runs").join(key.label(b)));
                let start = Instant::now();
                let row = run_one(config, key, &data[&(key.budget, key.seed)], test, dir.as_deref())
                    .unwrap_or_else(|e| RunRow::failed(b, key.budget, key.seed, key.method(), key.lambda, &e));
                let timing = Timing { run: key.label(b), seconds: start.elapsed().as_secs_f64() };
                if tx.send((i, row, timing)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut slots: Vec<Option<(RunRow, Timing)>> = vec![None; keys.len()];
    for (i, row, timing) in rx {
        slots[i] = Some((row, timing));
    }
    let (rows, timings): (Vec<RunRow>, Vec<Timing>) = slots.into_iter().map(|s| s.expect("every run reports")).unzip();
    let table = ResultsTable::from_rows(rows);
    if let Some(d) = &config.output_dir {
        table.write_files(d)?;
        let mut w = csv::Writer::from_path(d.join("timings.csv"))?;
        for t in &timings {
            w.serialize(t)?;
        }
        w.flush()?;
    }
    Ok(ExperimentOutput { table, timings })
}

/// Every (budget, seed, method) of the config, sharing one test set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut keys = Vec::new();
    for &budget in &config.budgets {
        for &seed in &config.seeds {
            for &m in &config.methods {
                let lambda = if m == Method::Nre { 0.0 } else { config.lambda };
                keys.push(RunKey { budget, seed, lambda });
            }
        }
    }
    run_keys(config, keys)
}

/// BNRE at one budget for each penalty strength; `lambda = 0` runs are the
/// NRE runs of [`run_experiment`].
pub fn lambda_sweep(config: &ExperimentConfig, lambdas: &[f64]) -> Result<ExperimentOutput> {
    if config.budgets.len() != 1 {
        return Err(invalid("a lambda sweep uses exactly one budget"));
    }
    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(invalid("lambdas must be finite and >= 0"));
    }
    let keys = lambdas
        .iter()
        .flat_map(|&lambda| config.seeds.iter().map(move |&seed| RunKey { budget: config.budgets[0], seed, lambda }))
        .collect();
    run_keys(config, keys)
}
