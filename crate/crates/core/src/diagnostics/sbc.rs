use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TestPair;
use crate::error::{invalid, Result};
use crate::ratio::PosteriorGrid;
use crate::scalar::Real;
use crate::simulators::rng::{derive_seed, stream_rng};

pub const MIN_SBC_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbcResult {
    pub ranks: Vec<f64>,
    /// Kolmogorov-Smirnov distance of the ranks to U(0, 1).
    pub ks_distance: f64,
    pub p_value: f64,
    /// Pairs whose draws all shared the density at the true parameter.
    pub degenerate: usize,
}

/// Draws from the piecewise-constant grid density: a cell by mass, then a
/// uniform point inside it.
pub fn sample_grid<T: Real, R: Rng + ?Sized>(grid: &PosteriorGrid<T>, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let cdf = cumulative_masses(grid);
    let total = *cdf.last().unwrap();
    (0..n)
        .map(|_| {
            let cell = draw_cell(&cdf, total, rng);
            grid.spec
                .unravel(cell)
                .iter()
                .enumerate()
                .map(|(d, &k)| grid.spec.lower[d] + (k as f64 + rng.random::<f64>()) * grid.spec.cell_width(d))
                .collect()
        })
        .collect()
}

fn cumulative_masses<T: Real>(grid: &PosteriorGrid<T>) -> Vec<f64> {
    let mut acc = 0.0;
    (0..grid.densities.len())
        .map(|i| {
            acc += grid.cell_mass(i).as_f64();
            acc
        })
        .collect()
}

fn draw_cell<R: Rng + ?Sized>(cdf: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Rank of the true parameter under the density statistic, and whether the
/// statistic was flat across all draws.
pub(crate) fn sbc_rank<T: Real, R: Rng + ?Sized>(grid: &PosteriorGrid<T>, theta_star: &[f64], samples: usize, rng: &mut R) -> (f64, bool) {
    let f_star = grid.density_at(theta_star).as_f64();
    let mut below = 0usize;
    let mut flat = true;
    for theta in sample_grid(grid, samples, rng) {
        let f = grid.density_at(&theta).as_f64();
        flat &= f == f_star;
        if f <= f_star {
            below += 1;
        }
    }
    (below as f64 / samples as f64, flat)
}

/// Stream seed for the SBC draws of test pair `index`.
pub(crate) fn sbc_stream(seed: u64, index: usize) -> crate::simulators::rng::StreamRng {
    stream_rng(derive_seed("sbc", &[seed]), index as u64)
}

pub fn sbc_ranks<T: Real, F>(mut posterior: F, test: &[TestPair], samples: usize, seed: u64) -> Result<SbcResult>
where
    F: FnMut(&[f64]) -> Result<PosteriorGrid<T>>,
{
    if samples < MIN_SBC_SAMPLES {
        return Err(invalid(format!("need at least {MIN_SBC_SAMPLES} posterior draws per pair")));
    }
    if test.is_empty() {
        return Err(invalid("empty test set"));
    }
    let mut ranks = Vec::with_capacity(test.len());
    let mut degenerate = 0;
    for (i, pair) in test.iter().enumerate() {
        let (r, flat) = sbc_rank(&posterior(&pair.x)?, &pair.theta, samples, &mut sbc_stream(seed, i));
        ranks.push(r);
        degenerate += flat as usize;
    }
    Ok(summarize_sbc(ranks, degenerate))
}

pub(crate) fn summarize_sbc(ranks: Vec<f64>, degenerate: usize) -> SbcResult {
    let ks_distance = ks_uniform_distance(&ranks);
    let p_value = kolmogorov_p_value(ks_distance, ranks.len());
    SbcResult { ranks, ks_distance, p_value, degenerate }
}

/// `sup |F_n(u) - u|` for the empirical CDF of `values` on [0, 1].
pub fn ks_uniform_distance(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov tail probability with the small-sample correction
/// `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) * d`.
pub fn kolmogorov_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_distance_by_hand() {
        assert!((ks_uniform_distance(&[0.5]) - 0.5).abs() < 1e-15);
        assert!((ks_uniform_distance(&[0.25, 0.75]) - 0.25).abs() < 1e-15);
        assert!((ks_uniform_distance(&[1.0, 1.0, 1.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_tail_against_reference_points() {
        // Q(1.36) ~ 0.049 and Q(1.63) ~ 0.0098, the usual 5% and 1% points.
        let n = 1_000_000;
        let scale = (n as f64).sqrt() + 0.12 + 0.11 / (n as f64).sqrt();
        assert!((kolmogorov_p_value(1.358 / scale, n) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_p_value(1.628 / scale, n) - 0.01).abs() < 5e-4);
        assert_eq!(kolmogorov_p_value(0.0, 10), 1.0);
    }

    #[test]
    fn ks_of_uniform_draws_is_not_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..5000).map(|_| rng.random()).collect();
        let d = ks_uniform_distance(&u);
        assert!(kolmogorov_p_value(d, u.len()) > 0.01);
        let skewed: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(kolmogorov_p_value(ks_uniform_distance(&skewed), u.len()) < 1e-6);
    }

    fn two_cell_grid() -> PosteriorGrid<f64> {
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![2]).unwrap();
        PosteriorGrid::from_log_density(spec, vec![], &[0.0, (3.0f64).ln()]).unwrap()
    }

    #[test]
    fn sampler_follows_cell_masses_and_stays_in_cells() {
        let g = two_cell_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draws = sample_grid(&g, 40_000, &mut rng);
        let upper = draws.iter().filter(|t| t[0] >= 0.5).count() as f64 / draws.len() as f64;
        assert!((upper - 0.75).abs() < 3.0 * (0.75 * 0.25 / 40_000f64).sqrt());
        assert!(draws.iter().all(|t| (0.0..=1.0).contains(&t[0])));
    }

    #[test]
    fn rank_is_one_at_the_mode() {
        let g = two_cell_grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (r, flat) = sbc_rank(&g, &[0.9], 500, &mut rng);
        assert_eq!(r, 1.0);
        assert!(!flat);
    }

    #[test]
    fn flat_grid_is_degenerate() {
        let spec = GridSpec::new(vec![0.0], vec![1.0], vec![8]).unwrap();
        let g = PosteriorGrid::from_log_density(spec, vec![], &[0.0; 8]).unwrap();
        let test: Vec<TestPair> = (0..5).map(|i| TestPair { theta: vec![0.1 + 0.2 * i as f64], x: vec![] }).collect();
        let res = sbc_ranks(|_| Ok(g.clone()), &test, 200, 0).unwrap();
        assert!(res.ranks.iter().all(|&r| r == 1.0));
        assert_eq!(res.degenerate, 5);
        assert!(sbc_ranks(|_| Ok(g.clone()), &test, 50, 0).is_err());
    }
}
