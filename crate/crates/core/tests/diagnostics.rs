use bnre::diagnostics::{bias_variance, coverage_auc, expected_coverage, expected_log_posterior, sbc_ranks, MeanSe, TestPair};
use bnre::harness::test_set;
use bnre::ratio::GridSpec;
use bnre::simulators::tractable::tractable_posterior;
use bnre::simulators::Benchmark;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn exact(spec: &GridSpec) -> impl Fn(&[f64]) -> bnre::Result<bnre::Grid> + '_ {
    move |x: &[f64]| Ok(tractable_posterior(x[0], spec, 1.0))
}

fn oracle_test_set(n: usize) -> Vec<TestPair> {
    test_set(Benchmark::Tractable1d, n, 0).unwrap()
}

#[test]
fn exact_posterior_is_calibrated() {
    let spec = Benchmark::Tractable1d.grid_spec();
    let test = oracle_test_set(2000);
    let levels = bnre::diagnostics::default_levels();
    let curve = expected_coverage(exact(&spec), &test, &levels).unwrap();
    for ((l, c), se) in levels.iter().zip(&curve.coverage).zip(&curve.se) {
        let binom = (l * (1.0 - l) / 2000.0).sqrt();
        assert!((c - l).abs() <= 3.0 * binom, "level {l}: coverage {c} (se {se})");
    }
    let auc = coverage_auc(&curve).unwrap();
    assert!(auc.abs() <= 3.0 * curve.auc_se.unwrap(), "AUC {auc}");
    let sbc = sbc_ranks(exact(&spec), &test, 1000, 1).unwrap();
    assert!(sbc.p_value > 0.01, "KS {} p {}", sbc.ks_distance, sbc.p_value);
}

#[test]
fn exact_posterior_beats_the_prior_in_log_density() {
    let spec = Benchmark::Tractable1d.grid_spec();
    let test = oracle_test_set(500);
    let oracle = expected_log_posterior(exact(&spec), &test).unwrap();
    let flat = GridSpec::new(vec![-5.0], vec![5.0], vec![1024]).unwrap();
    let prior = expected_log_posterior(
        |_: &[f64]| bnre::Grid::from_log_density(flat.clone(), vec![], &vec![0.0; 1024]),
        &test,
    )
    .unwrap();
    assert!((prior.mean + 10f64.ln()).abs() < 1e-12);
    assert!(oracle.mean >= prior.mean);
}

/// Moments of N(x, 1) truncated to [-5, 5].
fn truncated_moments(x: f64) -> (f64, f64) {
    let n = Normal::new(0.0, 1.0).unwrap();
    let (a, b) = (-5.0 - x, 5.0 - x);
    let z = n.cdf(b) - n.cdf(a);
    let k = (n.pdf(a) - n.pdf(b)) / z;
    let var = 1.0 + (a * n.pdf(a) - b * n.pdf(b)) / z - k * k;
    (x + k, var)
}

#[test]
fn exact_bias_and_variance_match_monte_carlo() {
    let spec = Benchmark::Tractable1d.grid_spec();
    let test = oracle_test_set(2000);
    let prior_var = 100.0 / 12.0;
    let grid = bias_variance(exact(&spec), &test, &[prior_var]).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let noise = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let (mut bias, mut var) = (Vec::with_capacity(1_000_000), Vec::with_capacity(1_000_000));
    for _ in 0..1_000_000 {
        let theta: f64 = rng.random_range(-5.0..5.0);
        let x = theta + rng.sample::<f64, _>(noise);
        let (m, v) = truncated_moments(x);
        bias.push((m - theta).powi(2) / prior_var);
        var.push(v / prior_var);
    }
    let (mb, mv) = (MeanSe::of(&bias), MeanSe::of(&var));
    let tol_b = 3.0 * (grid.bias_se.powi(2) + mb.se.powi(2)).sqrt();
    let tol_v = 3.0 * (grid.variance_se.powi(2) + mv.se.powi(2)).sqrt();
    assert!((grid.bias - mb.mean).abs() <= tol_b, "bias {} vs {} (tol {tol_b})", grid.bias, mb.mean);
    assert!((grid.variance - mv.mean).abs() <= tol_v, "variance {} vs {} (tol {tol_v})", grid.variance, mv.mean);
}
