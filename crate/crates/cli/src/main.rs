use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use bnre::diagnostics::{diagnose, parse_levels, run_theorem_suite, DiagnoseOptions};
use bnre::harness::{
    dataset_seed, lambda_sweep, load_dataset, load_weights, run_experiment, save_dataset, save_weights, test_set, write_report,
    ExperimentConfig, ExperimentOutput, Method,
};
use bnre::ratio::posterior_grid;
use bnre::simulators::{generate_dataset, Benchmark};
use bnre::training::{train, TrainConfig};

#[derive(Parser)]
#[command(name = "bnre", version, about = "Balanced neural ratio estimation on simulator benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a training dataset.
    Simulate {
        #[arg(long)]
        benchmark: Benchmark,
        #[arg(long)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a ratio estimator on a saved dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "bnre")]
        method: Method,
        #[arg(long, default_value_t = 100.0)]
        lambda: f64,
        /// JSON training configuration; flags above override its method fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coverage, log posterior, bias/variance and SBC of trained weights.
    Diagnose {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        benchmark: Benchmark,
        #[arg(long, default_value_t = 1000)]
        n_test: usize,
        #[arg(long, default_value = "0.05:0.95:0.05")]
        levels: String,
        #[arg(long, default_value_t = 0)]
        test_seed: u64,
        #[arg(long, default_value_t = 1000)]
        sbc_samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Budget sweep described by a JSON experiment config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
    },
    /// BNRE at a single budget for several penalty strengths.
    LambdaSweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "1,10,100,1000,32768")]
        lambdas: String,
    },
    /// Exact checks of the balancing theorems on random discrete joints.
    VerifyTheorems {
        #[arg(long, default_value_t = 100)]
        toys: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { benchmark, budget, seed, out } => {
            let d = generate_dataset(benchmark, budget, dataset_seed(benchmark, seed))?;
            save_dataset(&out, &d).with_context(|| format!("writing {}", out.display()))?;
            println!("{budget} samples of {benchmark} ({} simulator redraws) -> {}", d.failures, out.display());
        }
        Command::Train { dataset, method, lambda, config, seed, out } => {
            let data = load_dataset(&dataset).with_context(|| format!("reading {}", dataset.display()))?;
            let mut cfg = match config {
                Some(p) => serde_json::from_str::<TrainConfig>(&read(&p)?).context("parsing training config")?,
                None => TrainConfig::default(),
            };
            cfg.lambda = if method == Method::Nre { 0.0 } else { lambda };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            fs::create_dir_all(&out)?;
            write_report(&out.join("train_config.json"), &cfg)?;
            match train::<f64>(data.benchmark, &data, &cfg) {
                Ok(t) => {
                    save_weights(&out.join("weights.json"), &t.net)?;
                    t.history.write_csv(fs::File::create(out.join("history.csv"))?)?;
                    let best = t.history.best().expect("non-empty history");
                    println!("best epoch {}: val loss {:.6}, B = {:.6}", best.epoch, best.val_loss, best.balance_b);
                }
                Err(f) => {
                    f.history.write_csv(fs::File::create(out.join("history.csv"))?)?;
                    bail!(f);
                }
            }
        }
        Command::Diagnose { weights, benchmark, n_test, levels, test_seed, sbc_samples, out } => {
            let net = load_weights(&weights).with_context(|| format!("reading {}", weights.display()))?;
            if net.input_dim() != benchmark.feature_dim() {
                bail!("weights take {} inputs but {benchmark} needs {}", net.input_dim(), benchmark.feature_dim());
            }
            let test = test_set(benchmark, n_test, test_seed)?;
            let opts = DiagnoseOptions { levels: parse_levels(&levels)?, sbc_samples, ..DiagnoseOptions::for_benchmark(benchmark) };
            let report = diagnose(|x: &[f64]| posterior_grid(&net, benchmark, x), &test, &opts)?;
            fs::create_dir_all(&out)?;
            report.coverage.write_csv(fs::File::create(out.join("coverage.csv"))?)?;
            write_report(&out.join("report.json"), &report)?;
            println!(
                "coverage AUC {:.4}, expected log posterior {:.4}, bias {:.4}, variance {:.4}, SBC KS {:.4}",
                report.coverage_auc,
                report.log_posterior.mean,
                report.bias_variance.bias,
                report.bias_variance.variance,
                report.sbc.ks_distance
            );
        }
        Command::Experiment { config } => {
            let cfg = load_config(&config)?;
            finish(run_experiment(&cfg)?)?;
        }
        Command::LambdaSweep { config, lambdas } => {
            let cfg = load_config(&config)?;
            let lambdas = lambdas
                .split(',')
                .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad lambda `{s}`")))
                .collect::<Result<Vec<_>>>()?;
            finish(lambda_sweep(&cfg, &lambdas)?)?;
        }
        Command::VerifyTheorems { toys, seed } => {
            let suite = run_theorem_suite(toys, seed)?;
            println!("{}", serde_json::to_string_pretty(&suite)?);
            if !suite.passed() {
                bail!("theorem checks failed");
            }
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig::from_json(&read(path)?)?)
}

fn finish(out: ExperimentOutput) -> Result<()> {
    print!("{}", out.table.aggregates_csv()?);
    let failed: Vec<_> = out.table.rows.iter().filter(|r| !r.is_ok()).collect();
    if !failed.is_empty() {
        for r in &failed {
            eprintln!("run {} n={} seed={} failed: {}", r.method, r.budget, r.seed, r.error);
        }
        bail!("{} of {} runs failed", failed.len(), out.table.rows.len());
    }
    Ok(())
}
