use std::fs;

use bnre::harness::{lambda_sweep, load_dataset, run_experiment, ExperimentConfig, Method};
use bnre::simulators::Benchmark;

fn small(dir: Option<std::path::PathBuf>) -> ExperimentConfig {
    ExperimentConfig {
        benchmark: Benchmark::Tractable1d,
        budgets: vec![256, 512],
        seeds: vec![0, 1],
        epochs: 3,
        batch_size: 64,
        hidden: vec![8],
        n_test: 40,
        sbc_samples: 100,
        output_dir: dir,
        ..Default::default()
    }
}

#[test]
fn reruns_are_bitwise_identical_and_independent_of_workers() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let a = run_experiment(&small(Some(d1.path().to_path_buf()))).unwrap();
    let b = run_experiment(&ExperimentConfig { workers: 3, ..small(Some(d2.path().to_path_buf())) }).unwrap();
    assert!(a.table.all_ok());
    assert_eq!(a.table.rows.len(), 2 * 2 * 2);
    assert_eq!(a.table.to_json().unwrap(), b.table.to_json().unwrap());
    for f in ["results.csv", "aggregate.csv", "results.json"] {
        assert_eq!(fs::read(d1.path().join(f)).unwrap(), fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
    let run = "runs/tractable1d_n512_s1_bnre_l100";
    for f in ["weights.json", "history.csv", "coverage.csv", "report.json"] {
        let p = format!("{run}/{f}");
        assert_eq!(fs::read(d1.path().join(&p)).unwrap(), fs::read(d2.path().join(&p)).unwrap(), "{p}");
    }

    // A third run over the same directory reloads the saved datasets.
    let before = fs::read(d1.path().join("datasets/tractable1d_n512_s0.bin")).unwrap();
    let c = run_experiment(&small(Some(d1.path().to_path_buf()))).unwrap();
    assert_eq!(c.table, a.table);
    assert_eq!(fs::read(d1.path().join("datasets/tractable1d_n512_s0.bin")).unwrap(), before);
    let ds = load_dataset(&d1.path().join("datasets/tractable1d_n256_s1.bin")).unwrap();
    assert_eq!(ds.len(), 256);
}

#[test]
fn nre_rows_record_zero_lambda_and_match_the_zero_lambda_sweep() {
    let cfg = ExperimentConfig { budgets: vec![256], methods: vec![Method::Nre], ..small(None) };
    let nre = run_experiment(&cfg).unwrap().table;
    assert!(nre.rows.iter().all(|r| r.lambda == 0.0 && r.method == Method::Nre));
    let sweep = lambda_sweep(&cfg, &[0.0, 10.0]).unwrap().table;
    let zero: Vec<_> = sweep.rows.iter().filter(|r| r.lambda == 0.0).cloned().collect();
    assert_eq!(zero, nre.rows);
    assert!(sweep.rows.iter().filter(|r| r.lambda == 10.0).all(|r| r.method == Method::Bnre));
    assert!(lambda_sweep(&small(None), &[1.0]).is_err());
}

#[test]
fn aggregates_recompute_from_rows() {
    let t = run_experiment(&ExperimentConfig { budgets: vec![256], ..small(None) }).unwrap().table;
    for a in &t.aggregates {
        let vals: Vec<f64> = t
            .rows
            .iter()
            .filter(|r| r.budget == a.budget && r.method == a.method && r.lambda == a.lambda)
            .map(|r| r.expected_log_posterior)
            .collect();
        assert_eq!(vals.len(), a.runs_ok);
        let (m, s) = bnre::harness::mean_std(&vals);
        assert_eq!((m, s), (a.expected_log_posterior_mean, a.expected_log_posterior_std));
    }
}
