//! Benchmark simulators, priors and simulated datasets.

pub mod gillespie;
pub mod mg1;
mod prior;
pub mod rng;
pub mod slcp;
pub mod tractable;
pub mod weinberg;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use gillespie::{gillespie_run, Reaction};
pub use mg1::mg1_quantiles;
pub use prior::BoxPrior;
use rng::stream_rng;
pub use tractable::tractable_posterior;

/// Redraws allowed for one sample before dataset generation gives up.
pub const MAX_SIMULATION_ATTEMPTS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Tractable1d,
    Weinberg,
    SlcpMarginal,
    Mg1,
    LotkaVolterra,
}

impl Benchmark {
    pub const ALL: [Benchmark; 5] =
        [Benchmark::Tractable1d, Benchmark::Weinberg, Benchmark::SlcpMarginal, Benchmark::Mg1, Benchmark::LotkaVolterra];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Tractable1d => "tractable1d",
            Benchmark::Weinberg => "weinberg",
            Benchmark::SlcpMarginal => "slcp_marginal",
            Benchmark::Mg1 => "mg1",
            Benchmark::LotkaVolterra => "lotka_volterra",
        }
    }

    pub fn theta_dim(self) -> usize {
        match self {
            Benchmark::Tractable1d | Benchmark::Weinberg => 1,
            Benchmark::SlcpMarginal => 5,
            Benchmark::Mg1 => 3,
            Benchmark::LotkaVolterra => 4,
        }
    }

    pub fn x_dim(self) -> usize {
        match self {
            Benchmark::Tractable1d | Benchmark::Weinberg => 1,
            Benchmark::SlcpMarginal => 2 * slcp::POINTS,
            Benchmark::Mg1 => 5,
            Benchmark::LotkaVolterra => 2 * gillespie::lotka_volterra::RECORDS,
        }
    }

    /// Full prior over all simulator parameters.
    pub fn prior(self) -> BoxPrior {
        let (lo, hi): (Vec<f64>, Vec<f64>) = match self {
            Benchmark::Tractable1d => (vec![-5.0], vec![5.0]),
            Benchmark::Weinberg => (vec![0.5], vec![1.5]),
            Benchmark::SlcpMarginal => (vec![-3.0; 5], vec![3.0; 5]),
            Benchmark::Mg1 => (vec![0.0, 0.0, 0.0], vec![10.0, 10.0, 1.0 / 3.0]),
            Benchmark::LotkaVolterra => (vec![-5.0; 4], vec![2.0; 4]),
        };
        BoxPrior::new(lo, hi).expect("static prior bounds are valid")
    }

    /// Coordinates of `theta` whose (marginal) posterior is inferred.
    pub fn inferred(self) -> &'static [usize] {
        match self {
            Benchmark::Tractable1d | Benchmark::Weinberg => &[0],
            Benchmark::SlcpMarginal | Benchmark::Mg1 | Benchmark::LotkaVolterra => &[0, 1],
        }
    }

    pub fn inferred_prior(self) -> BoxPrior {
        self.prior().marginal(self.inferred())
    }

    pub fn grid_resolution(self) -> Vec<usize> {
        match self.inferred().len() {
            1 => vec![1024],
            _ => vec![128, 128],
        }
    }

    pub fn grid_spec(self) -> crate::ratio::GridSpec {
        let p = self.inferred_prior();
        crate::ratio::GridSpec::new(p.lower().to_vec(), p.upper().to_vec(), self.grid_resolution())
            .expect("prior box makes a valid grid")
    }

    /// Network input length: inferred parameters followed by the observable.
    pub fn feature_dim(self) -> usize {
        self.inferred().len() + self.x_dim()
    }

    /// Fixed, data-independent input encoding for the classifier. Inferred
    /// parameters are mapped affinely onto `[-1, 1]`; observables get a
    /// per-benchmark scale (`log1p` for the positive, heavy-tailed ones).
    pub fn write_features(self, theta_inferred: &[f64], x: &[f64], out: &mut Vec<f64>) {
        let p = self.inferred_prior();
        for ((t, l), u) in theta_inferred.iter().zip(p.lower()).zip(p.upper()) {
            out.push(2.0 * (t - l) / (u - l) - 1.0);
        }
        match self {
            Benchmark::Tractable1d => out.extend(x.iter().map(|v| v / 5.0)),
            Benchmark::Weinberg => out.extend_from_slice(x),
            Benchmark::SlcpMarginal => out.extend(x.iter().map(|v| v / 3.0)),
            Benchmark::Mg1 | Benchmark::LotkaVolterra => out.extend(x.iter().map(|v| v.max(0.0).ln_1p())),
        }
    }

    pub fn project(self, theta: &[f64]) -> Vec<f64> {
        self.inferred().iter().map(|&d| theta[d]).collect()
    }

    /// One draw `x ~ p(x | theta)`.
    pub fn simulate<R: Rng + ?Sized>(self, theta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        if !self.prior().contains(theta) {
            return Err(invalid(format!("{} parameters outside the prior box: {theta:?}", self.name())));
        }
        let x = match self {
            Benchmark::Tractable1d => vec![tractable::simulate(theta[0], rng)],
            Benchmark::Weinberg => vec![weinberg::sample_cos_theta(theta[0], rng)],
            Benchmark::SlcpMarginal => slcp::simulate(theta, rng),
            Benchmark::Mg1 => mg1::simulate(theta, rng),
            Benchmark::LotkaVolterra => gillespie::lotka_volterra::simulate(theta, rng)?,
        };
        if x.len() != self.x_dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Simulation(format!("{} produced a non-finite or misshapen observable", self.name())));
        }
        Ok(x)
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| invalid(format!("unknown benchmark \"{s}\"")))
    }
}

pub fn sample_prior<R: Rng + ?Sized>(benchmark: Benchmark, rng: &mut R, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(invalid("need at least one prior draw"));
    }
    let prior = benchmark.prior();
    Ok((0..n).map(|_| prior.sample(rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub benchmark: Benchmark,
    pub seed: u64,
    /// Simulator failures that forced a redraw.
    pub failures: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Joint draw for sample `index` of stream `seed`. A failed simulation
/// redraws both parameters and observable from the same stream.
pub fn simulate_sample(benchmark: Benchmark, seed: u64, index: u64) -> Result<(Sample, u64)> {
    let mut rng = stream_rng(seed, index);
    let prior = benchmark.prior();
    let mut failures = 0;
    loop {
        let theta = prior.sample(&mut rng);
        match benchmark.simulate(&theta, &mut rng) {
            Ok(x) => return Ok((Sample { theta, x }, failures)),
            Err(Error::Simulation(msg)) => {
                failures += 1;
                if failures >= MAX_SIMULATION_ATTEMPTS {
                    return Err(Error::Simulation(format!("sample {index}: {failures} failed attempts, last: {msg}")));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// `budget` joint samples; sample `i` depends only on `(benchmark, seed, i)`.
pub fn generate_dataset(benchmark: Benchmark, budget: usize, seed: u64) -> Result<Dataset> {
    let mut samples = Vec::with_capacity(budget);
    let mut failures = 0;
    for i in 0..budget {
        let (s, f) = simulate_sample(benchmark, seed, i as u64)?;
        failures += f;
        samples.push(s);
    }
    Ok(Dataset { benchmark, seed, failures, samples })
}
