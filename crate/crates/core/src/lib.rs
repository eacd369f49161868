//! Neural ratio estimation with a balancing penalty, the benchmark
//! simulators it is evaluated on, and the coverage diagnostics used to judge
//! the resulting posteriors.
//!
//! The numerical core is generic over [`Real`]; the aliases below fix it to
//! `f64`, the precision everything else in the crate uses.

pub mod diagnostics;
pub mod diffnet;
pub mod error;
pub mod harness;
pub mod ratio;
pub mod scalar;
pub mod simulators;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Net = diffnet::ClassifierNet<f64>;
pub type Grid = ratio::PosteriorGrid<f64>;
