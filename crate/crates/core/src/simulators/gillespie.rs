//! Exact stochastic simulation of mass-action reaction networks.

use rand::Rng;
use rand_distr::Open01;

use crate::error::{Error, Result};

/// One reaction channel. Propensity is `rate * prod_s C(n_s, order_s) * order_s!`,
/// i.e. `rate * n` for first-order reactants.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    pub rate: f64,
    /// `(species, order)` pairs.
    pub reactants: Vec<(usize, u32)>,
    /// Population change per species when the reaction fires.
    pub change: Vec<i64>,
}

impl Reaction {
    fn propensity(&self, state: &[i64]) -> f64 {
        let mut a = self.rate;
        for &(s, order) in &self.reactants {
            let n = state[s];
            for k in 0..order as i64 {
                a *= (n - k).max(0) as f64;
            }
        }
        a
    }
}

/// Runs Gillespie's direct method and records the state at each of
/// `record_times` (ascending) by zero-order hold.
///
/// Returns one population vector per record time. Fails once more than
/// `event_cap` reactions have fired.
pub fn gillespie_run<R: Rng + ?Sized>(
    reactions: &[Reaction],
    initial: &[i64],
    record_times: &[f64],
    rng: &mut R,
    event_cap: u64,
) -> Result<Vec<Vec<i64>>> {
    if reactions.iter().any(|r| !(r.rate >= 0.0) || r.change.len() != initial.len()) {
        return Err(Error::InvalidArgument("reaction rates must be >= 0 and changes match species".into()));
    }
    if initial.iter().any(|&n| n < 0) {
        return Err(Error::InvalidArgument("initial populations must be >= 0".into()));
    }
    let mut state = initial.to_vec();
    let mut out = Vec::with_capacity(record_times.len());
    let mut t = 0.0;
    let mut events = 0u64;
    let mut props = vec![0.0; reactions.len()];
    while out.len() < record_times.len() {
        for (p, r) in props.iter_mut().zip(reactions) {
            *p = r.propensity(&state);
        }
        let total: f64 = props.iter().sum();
        if total <= 0.0 {
            while out.len() < record_times.len() {
                out.push(state.clone());
            }
            break;
        }
        let u: f64 = rng.sample(Open01);
        let next = t + -u.ln() / total;
        while out.len() < record_times.len() && record_times[out.len()] < next {
            out.push(state.clone());
        }
        if out.len() == record_times.len() {
            break;
        }
        events += 1;
        if events > event_cap {
            return Err(Error::Simulation(format!("event cap {event_cap} exceeded before t = {}", record_times.last().unwrap())));
        }
        let pick = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = reactions.len() - 1;
        for (j, &p) in props.iter().enumerate() {
            acc += p;
            if pick < acc {
                chosen = j;
                break;
            }
        }
        for (s, d) in state.iter_mut().zip(&reactions[chosen].change) {
            *s += d;
        }
        t = next;
    }
    Ok(out)
}

pub mod lotka_volterra {
    //! Predator-prey Markov jump process.
    //!
    //! `theta` holds log-rates `(predator birth, predator death, prey birth,
    //! predation)`. Species 0 is the predator, species 1 the prey:
    //!
    //! ```text
    //! X + Y -> 2X + Y   exp(theta1) X Y
    //! X     -> 0        exp(theta2) X
    //! Y     -> 2Y       exp(theta3) Y
    //! X + Y -> X        exp(theta4) X Y
    //! ```

    use super::*;

    pub const INITIAL: [i64; 2] = [50, 100];
    pub const HORIZON: f64 = 30.0;
    pub const RECORDS: usize = 20;
    pub const EVENT_CAP: u64 = 100_000;

    pub fn reactions(theta: &[f64]) -> Vec<Reaction> {
        let r: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        vec![
            Reaction { rate: r[0], reactants: vec![(0, 1), (1, 1)], change: vec![1, 0] },
            Reaction { rate: r[1], reactants: vec![(0, 1)], change: vec![-1, 0] },
            Reaction { rate: r[2], reactants: vec![(1, 1)], change: vec![0, 1] },
            Reaction { rate: r[3], reactants: vec![(0, 1), (1, 1)], change: vec![0, -1] },
        ]
    }

    /// Record times `1.5, 3.0, ..., 30.0`.
    pub fn record_times() -> Vec<f64> {
        (1..=RECORDS).map(|k| HORIZON * k as f64 / RECORDS as f64).collect()
    }

    /// Predator series followed by prey series (40 values).
    pub fn simulate<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let series = gillespie_run(&reactions(theta), &INITIAL, &record_times(), rng, EVENT_CAP)?;
        let mut x: Vec<f64> = series.iter().map(|s| s[0] as f64).collect();
        x.extend(series.iter().map(|s| s[1] as f64));
        Ok(x)
    }
}
