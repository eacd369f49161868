//! Forward-backward asymmetry in `e+ e- -> mu+ mu-`.
//!
//! The observable is `cos(theta)` of the muon scattering angle, drawn from
//!
//! ```text
//! dsigma/dcos ~ (1 + c^2 + A c) / (8/3),   A = 2 tanh(10 (sqrt(s) - M_Z) / M_Z) * G_F / G_F0
//! ```
//!
//! with `sqrt(s) = 2 * 42 GeV`, `M_Z = 90 GeV` and `G_F0 = 1`. The parameter is
//! the Fermi-constant surrogate `G_F`. For the prior range `|A| < 2`, so the
//! density is strictly positive on `[-1, 1]`.

use rand::Rng;

pub const BEAM_ENERGY: f64 = 42.0;
pub const Z_MASS: f64 = 90.0;
pub const FERMI_NOMINAL: f64 = 1.0;

pub fn asymmetry(fermi: f64) -> f64 {
    let sqrt_s = 2.0 * BEAM_ENERGY;
    2.0 * ((sqrt_s - Z_MASS) / Z_MASS * 10.0).tanh() * fermi / FERMI_NOMINAL
}

/// Normalised density of `cos(theta)` on `[-1, 1]`.
pub fn density(cos_theta: f64, fermi: f64) -> f64 {
    if !(-1.0..=1.0).contains(&cos_theta) {
        return 0.0;
    }
    (1.0 + cos_theta * cos_theta + asymmetry(fermi) * cos_theta) / (8.0 / 3.0)
}

/// Rejection sampler with the constant envelope `max(f(-1), f(1))`.
pub fn sample_cos_theta<R: Rng + ?Sized>(fermi: f64, rng: &mut R) -> f64 {
    let envelope = (2.0 + asymmetry(fermi).abs()) / (8.0 / 3.0);
    loop {
        let c: f64 = rng.random_range(-1.0..=1.0);
        let u: f64 = rng.random_range(0.0..envelope);
        if u <= density(c, fermi) {
            return c;
        }
    }
}
