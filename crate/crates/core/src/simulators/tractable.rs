//! One-dimensional Gaussian location model with a closed-form posterior,
//! used as a calibration reference: `theta ~ U(-5, 5)`, `x = theta + N(0, 1)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ratio::{GridSpec, PosteriorGrid};

pub const NOISE_SD: f64 = 1.0;

pub fn simulate<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(StandardNormal);
    theta + NOISE_SD * e
}

pub fn log_likelihood(x: f64, theta: f64, noise_sd: f64) -> f64 {
    let z = (x - theta) / noise_sd;
    -0.5 * z * z - noise_sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Exact posterior under a uniform prior on the grid's box: the Gaussian
/// likelihood truncated to the box, renormalised on the grid.
pub fn tractable_posterior(x: f64, spec: &GridSpec, noise_sd: f64) -> PosteriorGrid<f64> {
    let logs: Vec<f64> = (0..spec.cells()).map(|i| log_likelihood(x, spec.center(i)[0], noise_sd)).collect();
    PosteriorGrid::from_log_density(spec.clone(), vec![x], &logs).expect("gaussian log likelihood is finite")
}
