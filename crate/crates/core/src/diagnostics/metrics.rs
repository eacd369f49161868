use serde::{Deserialize, Serialize};

use super::TestPair;
use crate::error::{invalid, Result};
use crate::ratio::PosteriorGrid;
use crate::scalar::Real;

/// Densities below this are floored before taking the log.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() < 2 {
            f64::NAN
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPosterior {
    pub mean: f64,
    pub se: f64,
    /// Test pairs whose parameter fell in a zero-density cell.
    pub floored: usize,
}

/// `log` of the normalised grid density in the cell holding `theta_star`,
/// and whether the floor was applied.
pub(crate) fn log_density_at<T: Real>(grid: &PosteriorGrid<T>, theta_star: &[f64]) -> (f64, bool) {
    let d = grid.density_at(theta_star).as_f64();
    if d >= DENSITY_FLOOR {
        (d.ln(), false)
    } else {
        (DENSITY_FLOOR.ln(), true)
    }
}

pub(crate) fn summarize_log_posterior(values: &[(f64, bool)]) -> LogPosterior {
    let logs: Vec<f64> = values.iter().map(|v| v.0).collect();
    let m = MeanSe::of(&logs);
    LogPosterior { mean: m.mean, se: m.se, floored: values.iter().filter(|v| v.1).count() }
}

pub fn expected_log_posterior<T: Real, F>(mut posterior: F, test: &[TestPair]) -> Result<LogPosterior>
where
    F: FnMut(&[f64]) -> Result<PosteriorGrid<T>>,
{
    if test.is_empty() {
        return Err(invalid("empty test set"));
    }
    let mut values = Vec::with_capacity(test.len());
    for pair in test {
        values.push(log_density_at(&posterior(&pair.x)?, &pair.theta));
    }
    Ok(summarize_log_posterior(&values))
}

/// Squared error of the posterior mean and the posterior spread, each summed
/// over dimensions after dividing by the prior variance of that dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVariance {
    pub bias: f64,
    pub variance: f64,
    pub bias_se: f64,
    pub variance_se: f64,
    /// Per-dimension values before prior scaling.
    pub raw_bias: Vec<f64>,
    pub raw_variance: Vec<f64>,
}

/// Per-dimension `(mean - theta*)^2` and posterior variance for one pair.
pub(crate) fn moments<T: Real>(grid: &PosteriorGrid<T>, theta_star: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let sq = grid.mean().iter().zip(theta_star).map(|(m, t)| (m - t).powi(2)).collect();
    (sq, grid.variances())
}

pub(crate) fn summarize_bias_variance(per_pair: &[(Vec<f64>, Vec<f64>)], prior_variance: &[f64]) -> BiasVariance {
    let dims = prior_variance.len();
    let n = per_pair.len() as f64;
    let mut raw_bias = vec![0.0; dims];
    let mut raw_variance = vec![0.0; dims];
    let mut scaled_b = Vec::with_capacity(per_pair.len());
    let mut scaled_v = Vec::with_capacity(per_pair.len());
    for (b, v) in per_pair {
        for d in 0..dims {
            raw_bias[d] += b[d] / n;
            raw_variance[d] += v[d] / n;
        }
        scaled_b.push(b.iter().zip(prior_variance).map(|(x, p)| x / p).sum::<f64>());
        scaled_v.push(v.iter().zip(prior_variance).map(|(x, p)| x / p).sum::<f64>());
    }
    let (b, v) = (MeanSe::of(&scaled_b), MeanSe::of(&scaled_v));
    BiasVariance { bias: b.mean, variance: v.mean, bias_se: b.se, variance_se: v.se, raw_bias, raw_variance }
}

pub fn bias_variance<T: Real, F>(mut posterior: F, test: &[TestPair], prior_variance: &[f64]) -> Result<BiasVariance>
where
    F: FnMut(&[f64]) -> Result<PosteriorGrid<T>>,
{
    if test.is_empty() {
        return Err(invalid("empty test set"));
    }
    let mut per_pair = Vec::with_capacity(test.len());
    for pair in test {
        if pair.theta.len() != prior_variance.len() {
            return Err(invalid("parameter and prior variance dimensions differ"));
        }
        per_pair.push(moments(&posterior(&pair.x)?, &pair.theta));
    }
    Ok(summarize_bias_variance(&per_pair, prior_variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::GridSpec;
    use crate::simulators::tractable::tractable_posterior;
    use crate::simulators::{generate_dataset, Benchmark};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(lo: f64, hi: f64, cells: usize) -> PosteriorGrid<f64> {
        let spec = GridSpec::new(vec![lo], vec![hi], vec![cells]).unwrap();
        PosteriorGrid::from_log_density(spec, vec![0.0], &vec![0.0; cells]).unwrap()
    }

    #[test]
    fn prior_as_posterior_log_density() {
        let test: Vec<TestPair> = (0..20).map(|i| TestPair { theta: vec![-4.9 + i as f64 * 0.5], x: vec![0.0] }).collect();
        let lp = expected_log_posterior(|_| Ok(uniform(-5.0, 5.0, 1024)), &test).unwrap();
        assert!((lp.mean + 10f64.ln()).abs() < 1e-9);
        assert_eq!(lp.floored, 0);
    }

    #[test]
    fn zero_density_cells_are_floored_and_counted() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        let g = PosteriorGrid::from_log_density(spec, vec![], &[0.0, f64::NEG_INFINITY]).unwrap();
        let test = [TestPair { theta: vec![0.75], x: vec![] }, TestPair { theta: vec![0.25], x: vec![] }];
        let lp = expected_log_posterior(|_| Ok(g.clone()), &test).unwrap();
        assert_eq!(lp.floored, 1);
        assert!((lp.mean - 0.5 * (DENSITY_FLOOR.ln() + 2f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn point_mass_has_zero_spread_beyond_its_cell() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![1000]).unwrap();
        let mut logs = vec![f64::NEG_INFINITY; 1000];
        logs[500] = 0.0;
        let g = PosteriorGrid::from_log_density(spec, vec![], &logs).unwrap();
        let test = [TestPair { theta: vec![0.2], x: vec![] }];
        let bv = bias_variance(|_| Ok(g.clone()), &test, &[1.0]).unwrap();
        assert!((bv.variance - 1e-6 / 12.0).abs() < 1e-15);
        assert!((bv.bias - (0.5005f64 - 0.2).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn prior_as_posterior_on_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let test: Vec<TestPair> = (0..20000).map(|_| TestPair { theta: vec![rng.random::<f64>()], x: vec![] }).collect();
        let bv = bias_variance(|_| Ok(uniform(0.0, 1.0, 512)), &test, &[1.0 / 12.0]).unwrap();
        assert!((bv.raw_variance[0] - 1.0 / 12.0).abs() < 1e-12);
        assert!((bv.raw_bias[0] - 1.0 / 12.0).abs() < 3.0 * bv.bias_se / 12.0 + 1e-3);
        assert!((bv.variance - 1.0).abs() < 1e-9);
    }

    /// Monte Carlo oracle for the exact tractable posterior: the posterior is
    /// a truncated normal, sampled by rejection, whose sample moments are
    /// compared with the grid moments.
    #[test]
    fn exact_posterior_moments_match_monte_carlo() {
        let b = Benchmark::Tractable1d;
        let spec = b.grid_spec();
        let data = generate_dataset(b, 5, 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
        for s in &data.samples {
            let grid = tractable_posterior(s.x[0], &spec, 1.0);
            let draws: Vec<f64> = std::iter::repeat_with(|| s.x[0] + rng.sample::<f64, _>(normal))
                .filter(|t| t.abs() <= 5.0)
                .take(200_000)
                .collect();
            let m = MeanSe::of(&draws);
            let var_draws: Vec<f64> = draws.iter().map(|t| (t - m.mean).powi(2)).collect();
            let v = MeanSe::of(&var_draws);
            let (sq, gv) = moments(&grid, &s.theta);
            assert!((grid.mean()[0] - m.mean).abs() < 4.0 * m.se + 1e-4, "mean {} vs {}", grid.mean()[0], m.mean);
            assert!((gv[0] - v.mean).abs() < 4.0 * v.se + 1e-4, "var {} vs {}", gv[0], v.mean);
            assert!((sq[0] - (m.mean - s.theta[0]).powi(2)).abs() < 1e-2);
        }
    }
}
