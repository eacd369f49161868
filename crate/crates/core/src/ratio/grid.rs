use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Regular grid of cell centres over a box. Cells are indexed row-major,
/// dimension 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub resolution: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != resolution.len() || lower.is_empty() {
            return Err(invalid("grid bounds and resolution must have equal, non-zero length"));
        }
        if resolution.contains(&0) || lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(invalid("grid needs lower < upper and at least one cell per dimension"));
        }
        Ok(Self { lower, upper, resolution })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_width(&self, d: usize) -> f64 {
        (self.upper[d] - self.lower[d]) / self.resolution[d] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|d| self.cell_width(d)).product()
    }

    /// Per-dimension cell coordinates of a flat index.
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            out[d] = index % self.resolution[d];
            index /= self.resolution[d];
        }
        out
    }

    pub fn center(&self, index: usize) -> Vec<f64> {
        self.unravel(index)
            .iter()
            .enumerate()
            .map(|(d, &k)| self.lower[d] + (k as f64 + 0.5) * self.cell_width(d))
            .collect()
    }

    /// Flat index of the cell containing `theta`; the upper face belongs to
    /// the last cell.
    pub fn cell_of(&self, theta: &[f64]) -> Option<usize> {
        if theta.len() != self.dim() {
            return None;
        }
        let mut index = 0;
        for d in 0..self.dim() {
            let t = theta[d];
            if !(self.lower[d] <= t && t <= self.upper[d]) {
                return None;
            }
            let k = (((t - self.lower[d]) / self.cell_width(d)) as usize).min(self.resolution[d] - 1);
            index = index * self.resolution[d] + k;
        }
        Some(index)
    }
}

/// Piecewise-constant, normalised posterior density on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid<T> {
    pub spec: GridSpec,
    pub densities: Vec<T>,
    pub x: Vec<f64>,
}

impl<T: Real> PosteriorGrid<T> {
    /// Normalises unnormalised log densities (one per cell) by max subtraction.
    pub fn from_log_density(spec: GridSpec, x: Vec<f64>, log_values: &[T]) -> Result<Self> {
        if log_values.len() != spec.cells() {
            return Err(Error::DimensionMismatch { what: "grid cells", expected: spec.cells(), got: log_values.len() });
        }
        if let Some(bad) = log_values.iter().find(|v| v.is_nan() || **v == T::infinity()) {
            return Err(Error::DegenerateGrid(format!("log density {bad} on grid")));
        }
        let max = log_values.iter().copied().fold(T::neg_infinity(), T::max);
        if max == T::neg_infinity() {
            return Err(Error::DegenerateGrid("every cell has zero density".into()));
        }
        let mut densities: Vec<T> = log_values.iter().map(|&v| (v - max).exp()).collect();
        let total = densities.iter().copied().sum::<T>() * T::lit(spec.cell_volume());
        for d in &mut densities {
            *d = *d / total;
        }
        Ok(Self { spec, densities, x })
    }

    pub fn cell_volume(&self) -> T {
        T::lit(self.spec.cell_volume())
    }

    pub fn cell_mass(&self, i: usize) -> T {
        self.densities[i] * self.cell_volume()
    }

    pub fn total_mass(&self) -> T {
        self.densities.iter().copied().sum::<T>() * self.cell_volume()
    }

    /// Density at `theta`, zero outside the grid.
    pub fn density_at(&self, theta: &[f64]) -> T {
        self.spec.cell_of(theta).map_or(T::zero(), |i| self.densities[i])
    }

    /// Posterior mean per dimension.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.spec.dim()];
        for i in 0..self.densities.len() {
            let w = self.cell_mass(i).as_f64();
            if w == 0.0 {
                continue;
            }
            for (acc, c) in m.iter_mut().zip(self.spec.center(i)) {
                *acc += w * c;
            }
        }
        m
    }

    /// Per-dimension variance of the piecewise-constant density (includes
    /// the `h^2 / 12` within-cell spread).
    pub fn variances(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut v: Vec<f64> = (0..self.spec.dim()).map(|d| self.spec.cell_width(d).powi(2) / 12.0).collect();
        for i in 0..self.densities.len() {
            let w = self.cell_mass(i).as_f64();
            if w == 0.0 {
                continue;
            }
            for ((acc, c), m) in v.iter_mut().zip(self.spec.center(i)).zip(&mean) {
                *acc += w * (c - m).powi(2);
            }
        }
        v
    }

    /// JSON document `{benchmark, x, grid_spec, densities}` for plotting.
    pub fn to_json(&self, benchmark: &str) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            benchmark: &'a str,
            x: &'a [f64],
            grid_spec: &'a GridSpec,
            densities: Vec<f64>,
        }
        let doc = Export {
            benchmark,
            x: &self.x,
            grid_spec: &self.spec,
            densities: self.densities.iter().map(|d| d.as_f64()).collect(),
        };
        Ok(serde_json::to_string(&doc)?)
    }
}
