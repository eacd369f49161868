use std::io::Write;

use serde::{Deserialize, Serialize};

use super::hpd::{in_region, check_level, HpdSearch};
use super::TestPair;
use crate::error::{invalid, Result};
use crate::ratio::PosteriorGrid;
use crate::scalar::Real;

/// Nominal levels `0.05, 0.10, ..., 0.95`.
pub fn default_levels() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

/// Parses `"start:stop:step"` (inclusive stop) or a comma-separated list.
pub fn parse_levels(text: &str) -> Result<Vec<f64>> {
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| invalid(format!("bad level `{s}`")));
    let levels = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid("level range must be start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(invalid("level range needs step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + k as f64 * step).map(|v| (v * 1e12).round() / 1e12).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>>>()?
    };
    check_levels(&levels)?;
    Ok(levels)
}

pub(crate) fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() {
        return Err(invalid("need at least one level"));
    }
    for &l in levels {
        check_level(l)?;
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("levels must be strictly increasing"));
    }
    Ok(())
}

/// Trapezoid weights `w` and offset `c` with
/// `AUC = c + sum_j w_j * coverage_j` over the curve padded by (0,0), (1,1).
fn auc_weights(levels: &[f64]) -> (Vec<f64>, f64) {
    let n = levels.len();
    let at = |j: usize| if j == 0 { 0.0 } else if j == n + 1 { 1.0 } else { levels[j - 1] };
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        *wj = 0.5 * (at(j + 2) - at(j));
    }
    // The (1,1) endpoint contributes coverage 1 over the last interval; the
    // diagonal integrates to 1/2.
    let c = 0.5 * (1.0 - at(n)) - 0.5;
    (w, c)
}

/// Expected coverage at each nominal level over a test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub levels: Vec<f64>,
    pub coverage: Vec<f64>,
    pub n_test: usize,
    /// Binomial standard error per level.
    pub se: Vec<f64>,
    /// Monte Carlo standard error of the curve's AUC, when the per-sample
    /// outcomes were available.
    pub auc_se: Option<f64>,
}

impl CoverageCurve {
    /// Curve from per-sample region membership `hits[i][j]`.
    pub fn from_hits(levels: Vec<f64>, hits: &[Vec<bool>]) -> Result<Self> {
        check_levels(&levels)?;
        let n = hits.len();
        if n == 0 || hits.iter().any(|h| h.len() != levels.len()) {
            return Err(invalid("coverage needs at least one sample with one outcome per level"));
        }
        let coverage: Vec<f64> = (0..levels.len())
            .map(|j| hits.iter().filter(|h| h[j]).count() as f64 / n as f64)
            .collect();
        let se = coverage.iter().map(|&c| (c * (1.0 - c) / n as f64).sqrt()).collect();
        let auc_se = (levels.len() >= 2 && n >= 2).then(|| {
            let (w, _) = auc_weights(&levels);
            let a: Vec<f64> = hits.iter().map(|h| h.iter().zip(&w).map(|(&b, wj)| if b { *wj } else { 0.0 }).sum()).collect();
            let mean = a.iter().sum::<f64>() / n as f64;
            let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Ok(Self { levels, coverage, n_test: n, se, auc_se })
    }

    /// CSV with columns `level,coverage,se`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["level", "coverage", "se"])?;
        for ((l, c), s) in self.levels.iter().zip(&self.coverage).zip(&self.se) {
            w.serialize((l, c, s))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Signed area between the coverage curve and the diagonal.
pub fn coverage_auc(curve: &CoverageCurve) -> Result<f64> {
    if curve.levels.len() < 2 || curve.levels.len() != curve.coverage.len() {
        return Err(invalid("coverage AUC needs at least two levels with matching coverage"));
    }
    let (w, c) = auc_weights(&curve.levels);
    Ok(c + w.iter().zip(&curve.coverage).map(|(a, b)| a * b).sum::<f64>())
}

/// Region membership of `theta_star` at every level.
pub(crate) fn coverage_hits<T: Real>(grid: &PosteriorGrid<T>, theta_star: &[f64], levels: &[f64]) -> Vec<bool> {
    let search = HpdSearch::new(grid);
    let f = grid.density_at(theta_star).as_f64();
    levels.iter().map(|&l| in_region(&search, f, l)).collect()
}

pub fn expected_coverage<T: Real, F>(mut posterior: F, test: &[TestPair], levels: &[f64]) -> Result<CoverageCurve>
where
    F: FnMut(&[f64]) -> Result<PosteriorGrid<T>>,
{
    check_levels(levels)?;
    let mut hits = Vec::with_capacity(test.len());
    for pair in test {
        let grid = posterior(&pair.x)?;
        hits.push(coverage_hits(&grid, &pair.theta, levels));
    }
    CoverageCurve::from_hits(levels.to_vec(), &hits)
}
