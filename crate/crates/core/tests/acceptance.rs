//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers as arguments to run a
//! subset, e.g. `cargo test --release --test acceptance -- 3 6`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bnre::diagnostics::{diagnose, run_theorem_suite, DiagnoseOptions};
use bnre::diffnet::{finite_diff_check, Activation, ClassifierNet, Tape};
use bnre::harness::{lambda_sweep, mean_std, run_experiment, test_set, ExperimentConfig, Method, ResultsTable, RunRow};
use bnre::scalar::Matrix;
use bnre::simulators::tractable::tractable_posterior;
use bnre::simulators::Benchmark;
use bnre::training::bnre_loss_node;

const BUDGETS: [usize; 3] = [1 << 10, 1 << 12, 1 << 14];
const SWEEP_LAMBDAS: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 32768.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: usize, name: &str, started: Instant, limit: Option<Duration>, result: bnre::Result<Outcome>) -> bool {
    let elapsed = started.elapsed();
    let (mut pass, mut detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if elapsed > limit {
            pass = false;
            detail.push_str(&format!("; over the {:.0} s limit", limit.as_secs_f64()));
        }
    }
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id}: {name} ({detail}; {:.1} s)", elapsed.as_secs_f64());
    pass
}

fn se(values: &[f64]) -> f64 {
    mean_std(values).1 / (values.len() as f64).sqrt()
}

fn select<'a>(t: &'a ResultsTable, budget: usize, method: Method, lambda: Option<f64>) -> Vec<&'a RunRow> {
    t.rows
        .iter()
        .filter(|r| r.budget == budget && r.method == method && lambda.is_none_or(|l| r.lambda == l))
        .collect()
}

fn metric(rows: &[&RunRow], f: impl Fn(&RunRow) -> f64) -> (f64, f64) {
    let v: Vec<f64> = rows.iter().map(|r| f(r)).collect();
    (mean_std(&v).0, se(&v))
}

fn prior_log_density(b: Benchmark) -> f64 {
    0.0 - b.inferred_prior().volume().ln()
}

fn theorems() -> bnre::Result<Outcome> {
    let s = run_theorem_suite(100, 0)?;
    Ok(outcome(
        s.passed(),
        format!(
            "exact |B-1| {:.1e}, tempered |B-1| {:.1e}, min expectation {:.12}",
            s.exact_max_imbalance, s.tempered_max_imbalance, s.tempered_min_expectation
        ),
    ))
}

fn gradients() -> bnre::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let inputs = rng.random_range(1..5);
        let hidden: Vec<usize> = (0..rng.random_range(1..4)).map(|_| rng.random_range(2..9)).collect();
        let activation = if case % 2 == 0 { Activation::Tanh } else { Activation::Relu };
        let net = ClassifierNet::<f64>::init(inputs, &hidden, activation, &mut rng);
        let (nj, nm) = (rng.random_range(1..12), rng.random_range(1..12));
        let mut batch = |rows: usize| Matrix::from_vec(rows, inputs, (0..rows * inputs).map(|_| rng.random_range(-2.0..2.0)).collect());
        let (xj, xm) = (batch(nj), batch(nm));
        let lambda = [0.0, 1.0, 10.0, 100.0][case % 4];
        let err = finite_diff_check(
            &net,
            |t: &mut Tape<'_, f64>| {
                let a = t.input(xj.clone());
                let zj = t.forward(a)?;
                let b = t.input(xm.clone());
                let zm = t.forward(b)?;
                bnre_loss_node(t, zj, zm, lambda)
            },
            1e-6,
        )?;
        worst = worst.max(err);
    }
    Ok(outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over 20 nets")))
}

fn oracle_calibration() -> bnre::Result<Outcome> {
    let b = Benchmark::Tractable1d;
    let spec = b.grid_spec();
    let n = 2000;
    let test = test_set(b, n, 0)?;
    let opts = DiagnoseOptions::for_benchmark(b);
    let r = diagnose(|x: &[f64]| Ok(tractable_posterior(x[0], &spec, 1.0)), &test, &opts)?;
    let mut worst = 0.0f64;
    for (l, c) in r.coverage.levels.iter().zip(&r.coverage.coverage) {
        worst = worst.max((c - l).abs() / (l * (1.0 - l) / n as f64).sqrt());
    }
    let auc_se = r.coverage.auc_se.unwrap_or(f64::NAN);
    let pass = worst <= 3.0 && r.coverage_auc.abs() <= 3.0 * auc_se && r.sbc.p_value > 0.01;
    Ok(outcome(
        pass,
        format!(
            "worst level {worst:.2} SE, AUC {:.4} vs 3 SE {:.4}, SBC KS p {:.3}",
            r.coverage_auc,
            3.0 * auc_se,
            r.sbc.p_value
        ),
    ))
}

fn budget_sweep(b: Benchmark) -> bnre::Result<ResultsTable> {
    let cfg = ExperimentConfig { benchmark: b, budgets: BUDGETS.to_vec(), ..Default::default() };
    Ok(run_experiment(&cfg)?.table)
}

fn bnre_auc(tables: &[ResultsTable]) -> bnre::Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    for t in tables {
        let rows: Vec<&RunRow> = t.rows.iter().filter(|r| r.method == Method::Bnre).collect();
        pass &= rows.len() == BUDGETS.len() * 3 && rows.iter().all(|r| r.is_ok() && r.coverage_auc >= -0.01);
        let min = rows.iter().map(|r| r.coverage_auc).fold(f64::INFINITY, f64::min);
        lines.push(format!("{} min AUC {min:.4}", rows[0].benchmark));
    }
    Ok(outcome(pass, lines.join(", ")))
}

fn sharpness(tables: &[ResultsTable]) -> bnre::Result<Outcome> {
    let mut lines = Vec::new();
    let mut pass = true;
    for t in tables {
        let b = t.rows[0].benchmark;
        let (bn, bse) = metric(&select(t, 1 << 10, Method::Bnre, None), |r| r.expected_log_posterior);
        let (nr, nse) = metric(&select(t, 1 << 10, Method::Nre, None), |r| r.expected_log_posterior);
        let prior = prior_log_density(b);
        let two_se = 2.0 * (bse * bse + nse * nse).sqrt();
        pass &= bn <= nr + two_se && bn >= prior - 2.0 * bse;
        lines.push(format!("{b} BNRE {bn:.3} NRE {nr:.3} prior {prior:.3}"));
    }
    Ok(outcome(pass, lines.join(", ")))
}

fn variance(tables: &[ResultsTable]) -> bnre::Result<Outcome> {
    let t = tables.iter().find(|t| t.rows[0].benchmark == Benchmark::Tractable1d).expect("tractable1d sweep");
    let (bn, bse) = metric(&select(t, 1 << 10, Method::Bnre, None), |r| r.variance);
    let (nr, nse) = metric(&select(t, 1 << 10, Method::Nre, None), |r| r.variance);
    let two_se = 2.0 * (bse * bse + nse * nse).sqrt();
    Ok(outcome(bn >= nr - two_se, format!("BNRE {bn:.4} NRE {nr:.4} 2 SE {two_se:.4}")))
}

fn lambda_behaviour() -> bnre::Result<Outcome> {
    let cfg = ExperimentConfig { budgets: vec![1 << 10], ..Default::default() };
    let t = lambda_sweep(&cfg, &SWEEP_LAMBDAS)?.table;
    let gaps: Vec<(f64, f64)> =
        SWEEP_LAMBDAS.iter().map(|&l| metric(&select(&t, 1 << 10, Method::Bnre, Some(l)), |r| r.balance_gap)).collect();
    let monotone = gaps.windows(2).all(|w| w[1].0 <= w[0].0 + 2.0 * (w[0].1.powi(2) + w[1].1.powi(2)).sqrt());
    let (elp, _) = metric(&select(&t, 1 << 10, Method::Bnre, Some(32768.0)), |r| r.expected_log_posterior);
    let collapse = (elp + 10f64.ln()).abs() <= 0.1;
    let shown: Vec<String> = gaps.iter().map(|(m, _)| format!("{m:.4}")).collect();
    Ok(outcome(
        t.all_ok() && monotone && collapse,
        format!("mean |B-1| [{}], log posterior at 32768 {elp:.4} vs {:.4}", shown.join(", "), -10f64.ln()),
    ))
}

fn determinism() -> bnre::Result<Outcome> {
    let cfg = ExperimentConfig { budgets: vec![512, 1024], seeds: vec![0, 1], epochs: 20, n_test: 200, ..Default::default() };
    let a = run_experiment(&cfg)?.table;
    let b = run_experiment(&cfg)?.table;
    let same = a == b && a.to_json()? == b.to_json()? && a.rows_csv()? == b.rows_csv()?;
    Ok(outcome(same && a.all_ok(), format!("{} rows compared", a.rows.len())))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |id: usize| wanted.is_empty() || wanted.contains(&id);
    let mut all = true;

    if on(1) {
        let t = Instant::now();
        all &= report(1, "balancing theorems on 100 toys", t, Some(Duration::from_secs(5)), theorems());
    }
    if on(2) {
        let t = Instant::now();
        all &= report(2, "BNRE loss gradients", t, Some(Duration::from_secs(30)), gradients());
    }
    if on(3) {
        let t = Instant::now();
        all &= report(3, "exact posterior calibration", t, Some(Duration::from_secs(300)), oracle_calibration());
    }
    if on(4) || on(5) || on(7) {
        let t = Instant::now();
        let tables: bnre::Result<Vec<ResultsTable>> =
            [Benchmark::Tractable1d, Benchmark::Weinberg, Benchmark::Mg1].into_iter().map(budget_sweep).collect();
        match tables {
            Ok(tables) => {
                if on(4) {
                    all &= report(4, "BNRE coverage AUC >= -0.01", t, Some(Duration::from_secs(7200)), bnre_auc(&tables));
                }
                if on(5) {
                    all &= report(5, "log posterior between prior and NRE", t, None, sharpness(&tables));
                }
                if on(7) {
                    all &= report(7, "BNRE variance >= NRE", t, None, variance(&tables));
                }
            }
            Err(e) => {
                for id in [4, 5, 7].into_iter().filter(|&i| on(i)) {
                    all &= report(id, "budget sweep", t, None, Ok(outcome(false, format!("error: {e}"))));
                }
            }
        }
    }
    if on(6) {
        let t = Instant::now();
        all &= report(6, "lambda sweep", t, Some(Duration::from_secs(1800)), lambda_behaviour());
    }
    if on(8) {
        let t = Instant::now();
        all &= report(8, "bitwise reproducible experiments", t, None, determinism());
    }
    if !all {
        std::process::exit(1);
    }
}
