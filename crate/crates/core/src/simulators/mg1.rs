//! M/G/1 queue: uniform service times, exponential inter-arrival times.

use rand::Rng;
use rand_distr::Open01;

use crate::error::{invalid, Result};

pub const CUSTOMERS: usize = 50;

/// Inter-departure times of `customers` consecutive customers.
///
/// Service ~ `U(service_low, service_low + service_width)`, inter-arrival ~
/// `Exp(arrival_rate)`. The queue starts empty at time 0.
pub fn interdeparture_times<R: Rng + ?Sized>(
    service_low: f64,
    service_width: f64,
    arrival_rate: f64,
    customers: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut arrival = 0.0;
    let mut last_departure = 0.0f64;
    let mut out = Vec::with_capacity(customers);
    for _ in 0..customers {
        let u: f64 = rng.sample(Open01);
        arrival += -u.ln() / arrival_rate;
        let v: f64 = rng.random();
        let service = service_low + service_width * v;
        let departure = arrival.max(last_departure) + service;
        out.push(departure - last_departure);
        last_departure = departure;
    }
    out
}

/// Quantiles at levels 0, 0.25, 0.5, 0.75, 1 with linear interpolation
/// between order statistics.
pub fn mg1_quantiles(times: &[f64]) -> Result<[f64; 5]> {
    if times.is_empty() {
        return Err(invalid("quantiles of an empty sample"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let mut q = [0.0; 5];
    for (k, slot) in q.iter_mut().enumerate() {
        let pos = last * k as f64 / 4.0;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        *slot = sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
    }
    Ok(q)
}

pub fn simulate<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Vec<f64> {
    let times = interdeparture_times(theta[0], theta[1], theta[2], CUSTOMERS, rng);
    mg1_quantiles(&times).expect("non-empty").to_vec()
}
