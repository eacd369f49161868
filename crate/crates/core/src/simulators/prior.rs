use rand::Rng;
use rand_distr::Open01;

use crate::error::{invalid, Result};

/// Independent uniform prior over an axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPrior {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxPrior {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(invalid("prior bounds must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(invalid("prior bounds must be finite with lower < upper"));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    /// Per-dimension variance `(upper - lower)^2 / 12`.
    pub fn variances(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l).powi(2) / 12.0).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| l <= t && t <= u)
    }

    /// `log(1/volume)` inside the box, `-inf` outside.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if self.contains(theta) {
            -self.volume().ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    /// One draw from the open box.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let v: f64 = rng.sample(Open01);
                l + (u - l) * v
            })
            .collect()
    }

    /// Marginal prior of the listed coordinates.
    pub fn marginal(&self, dims: &[usize]) -> Self {
        Self { lower: dims.iter().map(|&d| self.lower[d]).collect(), upper: dims.iter().map(|&d| self.upper[d]).collect() }
    }
}
