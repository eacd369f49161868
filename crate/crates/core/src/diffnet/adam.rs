//! Adam with the plateau learning-rate schedule used for training.

use super::net::{ClassifierNet, Gradients};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;
/// Epochs without a strict validation improvement before the rate drops.
pub const PLATEAU_PATIENCE: u32 = 10;
pub const LR_DECAY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step: u64,
    pub learning_rate: T,
    pub plateau: u32,
    pub best_val_loss: T,
    pub reductions: u32,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(net: &ClassifierNet<T>, learning_rate: T) -> Self {
        let n = net.param_count();
        Self {
            first_moment: vec![T::zero(); n],
            second_moment: vec![T::zero(); n],
            step: 0,
            learning_rate,
            plateau: 0,
            best_val_loss: T::infinity(),
            reductions: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
///
/// A non-finite gradient aborts before any parameter is touched.
pub fn adam_step<T: Real>(net: &mut ClassifierNet<T>, grads: &Gradients<T>, state: &mut OptimizerState<T>) -> Result<()> {
    let shapes_match = grads.len() == net.layers().len()
        && grads.iter().zip(net.layers()).all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len());
    if !shapes_match || state.first_moment.len() != net.param_count() {
        return Err(Error::InvalidArgument("gradient shapes do not match network parameters".into()));
    }
    let flat = || grads.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()));
    if let Some(bad) = flat().position(|g| !g.is_finite()) {
        return Err(Error::Divergence(format!("non-finite gradient at parameter {bad} (step {})", state.step)));
    }

    state.step += 1;
    let (b1, b2, eps) = (T::lit(BETA1), T::lit(BETA2), T::lit(EPSILON));
    let t = state.step as i32;
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let lr = state.learning_rate;
    for (((p, &g), m), v) in net
        .params_mut()
        .zip(flat())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    if !net.all_finite() {
        return Err(Error::Divergence(format!("non-finite parameter after step {}", state.step)));
    }
    Ok(())
}

/// Feeds one epoch's validation loss to the plateau schedule. Returns `true`
/// when the learning rate was divided on this call.
pub fn lr_schedule_update<T: Real>(state: &mut OptimizerState<T>, val_loss: T) -> bool {
    if val_loss < state.best_val_loss {
        state.best_val_loss = val_loss;
        state.plateau = 0;
        return false;
    }
    state.plateau += 1;
    if state.plateau >= PLATEAU_PATIENCE {
        state.learning_rate = state.learning_rate / T::lit(LR_DECAY);
        state.reductions += 1;
        state.plateau = 0;
        return true;
    }
    false
}
