//! Four i.i.d. 2-D Gaussian points with parameterised mean and covariance.

use rand::Rng;
use rand_distr::StandardNormal;

pub const POINTS: usize = 4;

/// `theta = (m1, m2, a, b, c)`: mean `(m1, m2)`, scales `a^2`, `b^2`,
/// correlation `tanh(c)`. Output is `[x1, y1, x2, y2, ...]`.
pub fn simulate<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Vec<f64> {
    let (m1, m2) = (theta[0], theta[1]);
    let s1 = theta[2] * theta[2];
    let s2 = theta[3] * theta[3];
    let rho = theta[4].tanh();
    let tail = (1.0 - rho * rho).max(0.0).sqrt();
    let mut x = Vec::with_capacity(2 * POINTS);
    for _ in 0..POINTS {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        x.push(m1 + s1 * z1);
        x.push(m2 + s2 * (rho * z1 + tail * z2));
    }
    x
}
