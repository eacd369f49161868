//! The trained classifier read as a likelihood-to-evidence ratio.
//!
//! With `d(theta, x) = sigmoid(f(theta, x))`, the log ratio is the raw logit
//! `f`, and the approximate log posterior is `log p(theta) + f(theta, x)`.

mod grid;

pub use grid::{GridSpec, PosteriorGrid};

use crate::diffnet::ClassifierNet;
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Matrix, Real};
use crate::simulators::Benchmark;

/// Rows per forward call when sweeping a grid.
const GRID_CHUNK: usize = 4096;

fn check_dims(benchmark: Benchmark, theta: &[f64], x: &[f64]) -> Result<()> {
    let k = benchmark.inferred().len();
    if theta.len() != k {
        return Err(Error::DimensionMismatch { what: "inferred parameters", expected: k, got: theta.len() });
    }
    if x.len() != benchmark.x_dim() {
        return Err(Error::DimensionMismatch { what: "observable", expected: benchmark.x_dim(), got: x.len() });
    }
    Ok(())
}

fn features<T: Real>(benchmark: Benchmark, theta: &[f64], x: &[f64]) -> Vec<T> {
    let mut f = Vec::with_capacity(benchmark.feature_dim());
    benchmark.write_features(theta, x, &mut f);
    f.into_iter().map(T::lit).collect()
}

/// `d = sigmoid(logit)`.
pub fn classifier_prob<T: Real>(logit: T) -> T {
    sigmoid(logit)
}

/// `log r(x | theta)`: the network logit for the inferred parameters `theta`.
pub fn log_ratio<T: Real>(net: &ClassifierNet<T>, benchmark: Benchmark, theta: &[f64], x: &[f64]) -> Result<T> {
    check_dims(benchmark, theta, x)?;
    net.forward(&features(benchmark, theta, x))
}

pub fn classifier_prob_at<T: Real>(net: &ClassifierNet<T>, benchmark: Benchmark, theta: &[f64], x: &[f64]) -> Result<T> {
    log_ratio(net, benchmark, theta, x).map(classifier_prob)
}

/// Unnormalised `log p(theta) + log r(x | theta)`; `-inf` outside the prior box.
pub fn log_posterior_at<T: Real>(net: &ClassifierNet<T>, benchmark: Benchmark, theta: &[f64], x: &[f64]) -> Result<T> {
    check_dims(benchmark, theta, x)?;
    let log_prior = benchmark.inferred_prior().log_density(theta);
    if log_prior == f64::NEG_INFINITY {
        return Ok(T::neg_infinity());
    }
    Ok(T::lit(log_prior) + log_ratio(net, benchmark, theta, x)?)
}

/// Logits of every cell centre of `spec` against the observable `x`.
pub fn grid_logits<T: Real>(net: &ClassifierNet<T>, benchmark: Benchmark, spec: &GridSpec, x: &[f64]) -> Result<Vec<T>> {
    check_dims(benchmark, &vec![0.0; spec.dim()], x)?;
    let width = benchmark.feature_dim();
    let mut logits = Vec::with_capacity(spec.cells());
    let mut buf = Vec::with_capacity(width);
    let mut start = 0;
    while start < spec.cells() {
        let end = (start + GRID_CHUNK).min(spec.cells());
        let mut rows = Vec::with_capacity((end - start) * width);
        for i in start..end {
            buf.clear();
            benchmark.write_features(&spec.center(i), x, &mut buf);
            rows.extend(buf.iter().map(|&v| T::lit(v)));
        }
        logits.extend(net.forward_batch(&Matrix::from_vec(end - start, width, rows))?);
        start = end;
    }
    Ok(logits)
}

/// Approximate posterior on the benchmark's default grid, empirically
/// normalised. The prior is uniform on the grid's box, so it cancels in the
/// normalisation.
pub fn posterior_grid<T: Real>(net: &ClassifierNet<T>, benchmark: Benchmark, x: &[f64]) -> Result<PosteriorGrid<T>> {
    posterior_grid_on(net, benchmark, benchmark.grid_spec(), x)
}

pub fn posterior_grid_on<T: Real>(
    net: &ClassifierNet<T>,
    benchmark: Benchmark,
    spec: GridSpec,
    x: &[f64],
) -> Result<PosteriorGrid<T>> {
    if spec.dim() > 2 {
        return Err(Error::InvalidArgument(format!("grid inference supports at most 2 dimensions, got {}", spec.dim())));
    }
    let logits = grid_logits(net, benchmark, &spec, x)?;
    PosteriorGrid::from_log_density(spec, x.to_vec(), &logits)
}
