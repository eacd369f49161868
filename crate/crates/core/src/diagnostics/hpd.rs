use serde::Serialize;

use crate::error::{invalid, Result};
use crate::ratio::PosteriorGrid;
use crate::scalar::Real;

/// Regions overshooting the level by more than this are flagged.
pub const MASS_TOLERANCE: f64 = 1e-3;
/// Absorbs rounding in the prefix sums, so that masses like `0.5 + 0.3`
/// still reach a level of `0.8`.
const ROUNDING_SLACK: f64 = 1e-12;

/// Highest-density region `{cells with density >= threshold}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HpdResult {
    pub threshold: f64,
    /// Cell indices, ascending.
    pub region: Vec<usize>,
    pub mass: f64,
    /// Set when tied or coarse cells make the level unreachable within
    /// tolerance, so the region holds visibly more mass than requested.
    pub overshoot: bool,
}

/// Densities sorted once per grid, reused for every level.
#[derive(Debug, Clone)]
pub(crate) struct HpdSearch {
    /// Descending densities.
    sorted: Vec<f64>,
    /// `prefix[k]` = mass of the `k` densest cells.
    prefix: Vec<f64>,
}

impl HpdSearch {
    pub(crate) fn new<T: Real>(grid: &PosteriorGrid<T>) -> Self {
        let mut sorted: Vec<f64> = grid.densities.iter().map(|d| d.as_f64()).collect();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let volume = grid.spec.cell_volume();
        let mut prefix = Vec::with_capacity(sorted.len() + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for d in &sorted {
            acc += d * volume;
            prefix.push(acc);
        }
        Self { sorted, prefix }
    }

    /// Mass of cells with density `>= gamma`.
    fn mass_at(&self, gamma: f64) -> f64 {
        self.prefix[self.sorted.partition_point(|&d| d >= gamma)]
    }

    /// Dichotomic search over the sorted densities for the highest
    /// threshold whose region holds at least `level`. Returns
    /// `(threshold, mass)`; cells tied at the threshold are all included.
    pub(crate) fn threshold(&self, level: f64) -> (f64, f64) {
        let k = self.prefix.partition_point(|&m| m < level - ROUNDING_SLACK).clamp(1, self.sorted.len());
        let gamma = self.sorted[k - 1];
        (gamma, self.mass_at(gamma))
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("credible level must lie in (0, 1), got {level}")))
    }
}

pub fn hpd_threshold<T: Real>(grid: &PosteriorGrid<T>, level: f64) -> Result<HpdResult> {
    check_level(level)?;
    let search = HpdSearch::new(grid);
    let (threshold, mass) = search.threshold(level);
    let region = (0..grid.densities.len()).filter(|&i| grid.densities[i].as_f64() >= threshold).collect();
    Ok(HpdResult { threshold, region, mass, overshoot: mass - level > MASS_TOLERANCE })
}

/// Whether `theta` falls in the level-`level` region of `grid`.
pub(crate) fn in_region(search: &HpdSearch, density_at_theta: f64, level: f64) -> bool {
    density_at_theta > 0.0 && density_at_theta >= search.threshold(level).0
}
