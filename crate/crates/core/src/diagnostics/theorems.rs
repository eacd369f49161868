//! Exact checks of the balancing results on small discrete joints, where
//! every expectation is a finite sum over the table.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::simulators::rng::{derive_seed, stream_rng};

pub const BALANCE_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_TOY_SIZE: (usize, usize) = (8, 8);

/// Joint table `p(theta_i, x_j)` stored row-major, `k` parameter values by
/// `m` observables.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteToy {
    pub k: usize,
    pub m: usize,
    pub joint: Vec<f64>,
    pub theta_marginal: Vec<f64>,
    pub x_marginal: Vec<f64>,
}

impl DiscreteToy {
    pub fn new(k: usize, m: usize, joint: Vec<f64>) -> Result<Self> {
        if joint.len() != k * m || k == 0 || m == 0 {
            return Err(invalid("toy table must have k * m > 0 entries"));
        }
        if joint.iter().any(|&p| !(p > 0.0)) || (joint.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(invalid("toy table entries must be positive and sum to 1"));
        }
        let theta_marginal = (0..k).map(|i| joint[i * m..(i + 1) * m].iter().sum()).collect();
        let x_marginal = (0..m).map(|j| (0..k).map(|i| joint[i * m + j]).sum()).collect();
        Ok(Self { k, m, joint, theta_marginal, x_marginal })
    }

    /// Flat Dirichlet draw: normalised unit exponentials.
    pub fn random<R: Rng + ?Sized>(k: usize, m: usize, rng: &mut R) -> Result<Self> {
        let raw: Vec<f64> = (0..k * m).map(|_| Exp1.sample(rng)).map(|v: f64| v.max(1e-300)).collect();
        let total: f64 = raw.iter().sum();
        let mut joint: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // Renormalise once more so the sum is 1 to rounding.
        let s: f64 = joint.iter().sum();
        joint.iter_mut().for_each(|v| *v /= s);
        Self::new(k, m, joint)
    }

    pub fn product(&self, cell: usize) -> f64 {
        self.theta_marginal[cell / self.m] * self.x_marginal[cell % self.m]
    }

    /// Bayes-optimal classifier `p / (p + p_theta p_x)` per cell.
    pub fn bayes_classifier(&self) -> Vec<f64> {
        (0..self.joint.len()).map(|c| self.joint[c] / (self.joint[c] + self.product(c))).collect()
    }

    /// `E_joint[d] + E_marginal[d]` for a table classifier.
    pub fn balance(&self, dhat: &[f64]) -> f64 {
        (0..self.joint.len()).map(|c| (self.joint[c] + self.product(c)) * dhat[c]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub balance: f64,
    pub is_balanced: bool,
    /// `E_joint[d / dhat]`.
    pub joint_expectation: f64,
    /// `E_marginal[(1 - d) / (1 - dhat)]`.
    pub marginal_expectation: f64,
}

pub fn verify_balance_theorems(toy: &DiscreteToy, dhat: &[f64]) -> Result<TheoremReport> {
    if dhat.len() != toy.joint.len() {
        return Err(invalid("classifier table does not match the toy"));
    }
    if dhat.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(invalid("classifier outputs must lie in (0, 1)"));
    }
    let d = toy.bayes_classifier();
    let balance = toy.balance(dhat);
    let joint_expectation = (0..d.len()).map(|c| toy.joint[c] * d[c] / dhat[c]).sum();
    let marginal_expectation = (0..d.len()).map(|c| toy.product(c) * (1.0 - d[c]) / (1.0 - dhat[c])).sum();
    Ok(TheoremReport {
        balance,
        is_balanced: (balance - 1.0).abs() <= BALANCE_TOLERANCE,
        joint_expectation,
        marginal_expectation,
    })
}

/// `dhat^t` with `t > 0` chosen by bisection so the tempered table is
/// balanced. The balance falls from 2 at `t = 0` towards 0 as `t` grows.
pub fn temper_to_balance(toy: &DiscreteToy, dhat: &[f64]) -> Result<(Vec<f64>, f64)> {
    if dhat.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(invalid("classifier outputs must lie in (0, 1)"));
    }
    let tempered = |t: f64| -> Vec<f64> { dhat.iter().map(|v| v.powf(t)).collect() };
    let b = |t: f64| toy.balance(&tempered(t));
    let (mut lo, mut hi) = (0.0, 1.0);
    while b(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(invalid("tempering could not balance the classifier"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok((tempered(t), t))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoremSuite {
    pub toys: usize,
    /// Worst `|B - 1|` of the exact classifier.
    pub exact_max_imbalance: f64,
    /// Worst `|E_joint[d / d] - 1|`, zero up to rounding.
    pub exact_identity_error: f64,
    pub constant_half_min_expectation: f64,
    pub tempered_max_imbalance: f64,
    pub tempered_min_expectation: f64,
    /// Toys where the unbalanced `d^3` classifier violates an inequality.
    pub cubed_violations: usize,
    pub cubed_all_unbalanced: bool,
}

impl TheoremSuite {
    pub fn passed(&self) -> bool {
        self.toys > 0
            && self.exact_max_imbalance <= BALANCE_TOLERANCE
            && self.exact_identity_error <= BALANCE_TOLERANCE
            && self.constant_half_min_expectation >= 1.0 - 1e-12
            && self.tempered_max_imbalance <= BALANCE_TOLERANCE
            && self.tempered_min_expectation >= 1.0 - 1e-12
            && self.cubed_all_unbalanced
            && self.cubed_violations > 0
    }
}

/// Runs every check on `toys` random tables drawn from stream `seed`.
pub fn run_theorem_suite(toys: usize, seed: u64) -> Result<TheoremSuite> {
    if toys == 0 {
        return Err(invalid("need at least one toy"));
    }
    let (k, m) = DEFAULT_TOY_SIZE;
    let mut suite = TheoremSuite {
        toys,
        constant_half_min_expectation: f64::INFINITY,
        tempered_min_expectation: f64::INFINITY,
        cubed_all_unbalanced: true,
        ..Default::default()
    };
    let base = derive_seed("theorems", &[seed]);
    for t in 0..toys {
        let mut rng = stream_rng(base, t as u64);
        let toy = DiscreteToy::random(k, m, &mut rng)?;
        let d = toy.bayes_classifier();

        let exact = verify_balance_theorems(&toy, &d)?;
        suite.exact_max_imbalance = suite.exact_max_imbalance.max((exact.balance - 1.0).abs());
        suite.exact_identity_error = suite.exact_identity_error.max((exact.joint_expectation - 1.0).abs());

        let half = verify_balance_theorems(&toy, &vec![0.5; d.len()])?;
        suite.constant_half_min_expectation =
            suite.constant_half_min_expectation.min(half.joint_expectation).min(half.marginal_expectation);

        let random: Vec<f64> = (0..d.len()).map(|_| rng.random_range(0.01..0.99)).collect();
        let (balanced, _) = temper_to_balance(&toy, &random)?;
        let r = verify_balance_theorems(&toy, &balanced)?;
        suite.tempered_max_imbalance = suite.tempered_max_imbalance.max((r.balance - 1.0).abs());
        suite.tempered_min_expectation = suite.tempered_min_expectation.min(r.joint_expectation).min(r.marginal_expectation);

        let cubed: Vec<f64> = d.iter().map(|v| v.powi(3)).collect();
        let c = verify_balance_theorems(&toy, &cubed)?;
        suite.cubed_all_unbalanced &= !c.is_balanced;
        if c.joint_expectation < 1.0 || c.marginal_expectation < 1.0 {
            suite.cubed_violations += 1;
        }
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn toy_validation() {
        assert!(DiscreteToy::new(2, 2, vec![0.25; 4]).is_ok());
        assert!(DiscreteToy::new(2, 2, vec![0.5, 0.5, 0.0, 0.0]).is_err());
        assert!(DiscreteToy::new(2, 2, vec![0.3; 4]).is_err());
    }

    #[test]
    fn independent_toy_has_half_classifier_as_optimum() {
        let toy = DiscreteToy::new(2, 2, vec![0.25; 4]).unwrap();
        assert!(toy.bayes_classifier().iter().all(|&d| (d - 0.5).abs() < 1e-15));
    }

    #[test]
    fn exact_classifier_is_balanced_with_unit_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let toy = DiscreteToy::random(8, 8, &mut rng).unwrap();
        let r = verify_balance_theorems(&toy, &toy.bayes_classifier()).unwrap();
        assert!(r.is_balanced);
        assert!((r.joint_expectation - 1.0).abs() < 1e-12);
        assert!((r.marginal_expectation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_classifiers_on_the_boundary() {
        let toy = DiscreteToy::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(verify_balance_theorems(&toy, &[1.0, 0.5]).is_err());
        assert!(verify_balance_theorems(&toy, &[0.5]).is_err());
    }

    #[test]
    fn suite_passes_and_cubed_classifier_breaks_an_inequality() {
        let s = run_theorem_suite(100, 0).unwrap();
        assert!(s.passed(), "{s:?}");
        assert_eq!(s.cubed_violations, 100);
    }

    proptest! {
        #[test]
        fn tempered_tables_are_balanced_and_satisfy_both_bounds(seed in any::<u64>(), k in 2usize..10, m in 2usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let toy = DiscreteToy::random(k, m, &mut rng).unwrap();
            let dhat: Vec<f64> = (0..k * m).map(|_| rng.random_range(0.001..0.999)).collect();
            let (balanced, t) = temper_to_balance(&toy, &dhat).unwrap();
            prop_assert!(t > 0.0);
            let r = verify_balance_theorems(&toy, &balanced).unwrap();
            prop_assert!(r.is_balanced);
            prop_assert!(r.joint_expectation >= 1.0 - 1e-12);
            prop_assert!(r.marginal_expectation >= 1.0 - 1e-12);
        }
    }
}
