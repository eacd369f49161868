//! Ratio-estimator training: plain cross-entropy (`lambda = 0`) or the
//! balanced objective `BCE + lambda * (B - 1)^2`.

mod batches;
mod loss;

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use batches::{make_batches, random_derangement, Batch};
pub use loss::{balance_statistic, bce_loss, bnre_loss, bnre_loss_node};

use crate::diffnet::{adam_step, lr_schedule_update, Activation, ClassifierNet, OptimizerState, Tape};
use crate::error::{invalid, Error, Result};
use crate::scalar::{sigmoid, Matrix, Real};
use crate::simulators::rng::{derive_seed, stream_rng, StreamRng};
use crate::simulators::{Benchmark, Dataset};

/// Default penalty strength for the balanced objective.
pub const DEFAULT_LAMBDA: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Balancing penalty strength; 0 gives plain NRE.
    pub lambda: f64,
    /// Rows per step, half joint and half marginal.
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub validation_fraction: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            batch_size: 256,
            epochs: 150,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            seed: 0,
            hidden: vec![64, 64, 64],
            activation: Activation::Relu,
        }
    }
}

impl TrainConfig {
    /// Head sizes of the reference architectures (six affine layers of
    /// width 256, or three of width 128 for the predator-prey model) and
    /// 500 epochs.
    pub fn reference(benchmark: Benchmark) -> Self {
        let hidden = match benchmark {
            Benchmark::LotkaVolterra => vec![128; 2],
            _ => vec![256; 5],
        };
        Self { hidden, epochs: 500, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid("lambda must be finite and >= 0"));
        }
        if self.batch_size < 2 || self.batch_size % 2 != 0 {
            return Err(invalid("batch size must be even and >= 2"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(invalid("validation fraction must lie in (0, 1)"));
        }
        if self.epochs == 0 || !(self.learning_rate > 0.0) {
            return Err(invalid("need at least one epoch and a positive learning rate"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub balance_b: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (lowest validation loss).
    pub best_epoch: usize,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.get(self.best_epoch)
    }

    /// CSV with columns `epoch,train_loss,val_loss,balance_B,lr`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["epoch", "train_loss", "val_loss", "balance_B", "lr"])?;
        for e in &self.epochs {
            w.serialize((e.epoch, e.train_loss, e.val_loss, e.balance_b, e.lr))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub net: ClassifierNet<T>,
    pub history: TrainHistory,
}

#[derive(Debug, Error)]
#[error("training stopped after {} epochs: {error}", history.len())]
pub struct TrainFailure {
    pub error: Error,
    pub history: TrainHistory,
}

impl From<Error> for TrainFailure {
    fn from(error: Error) -> Self {
        Self { error, history: TrainHistory::default() }
    }
}

/// Network inputs for each sample, split into the parameter and observable
/// parts so that marginal pairs can recombine them.
struct Features<T> {
    theta: Vec<Vec<T>>,
    x: Vec<Vec<T>>,
    width: usize,
}

impl<T: Real> Features<T> {
    fn new(benchmark: Benchmark, dataset: &Dataset) -> Self {
        let k = benchmark.inferred().len();
        let mut theta = Vec::with_capacity(dataset.len());
        let mut x = Vec::with_capacity(dataset.len());
        let mut buf = Vec::new();
        for s in &dataset.samples {
            buf.clear();
            benchmark.write_features(&benchmark.project(&s.theta), &s.x, &mut buf);
            theta.push(buf[..k].iter().map(|&v| T::lit(v)).collect());
            x.push(buf[k..].iter().map(|&v| T::lit(v)).collect());
        }
        Self { theta, x, width: benchmark.feature_dim() }
    }

    fn rows(&self, theta_idx: &[usize], x_idx: &[usize]) -> Matrix<T> {
        let mut data = Vec::with_capacity(theta_idx.len() * self.width);
        for (&t, &x) in theta_idx.iter().zip(x_idx) {
            data.extend_from_slice(&self.theta[t]);
            data.extend_from_slice(&self.x[x]);
        }
        Matrix::from_vec(theta_idx.len(), self.width, data)
    }
}

/// Fixed validation pairs: every held-out sample once as a joint pair, and
/// once as the parameter half of a deranged marginal pair.
struct Validation<T> {
    joint: Matrix<T>,
    marginal: Matrix<T>,
}

impl<T: Real> Validation<T> {
    fn evaluate(&self, net: &ClassifierNet<T>, lambda: T) -> Result<(T, T)> {
        let zj = net.forward_batch(&self.joint)?;
        let zm = net.forward_batch(&self.marginal)?;
        let pj: Vec<T> = zj.iter().map(|&z| sigmoid(z)).collect();
        let pm: Vec<T> = zm.iter().map(|&z| sigmoid(z)).collect();
        Ok((bnre_loss(&zj, &zm, lambda)?, balance_statistic(&pj, &pm)?))
    }
}

/// Deterministic train/validation split of `n` samples.
pub fn split_indices(n: usize, fraction: f64, rng: &mut StreamRng) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = ((n as f64) * fraction).round() as usize;
    if n_val < 2 || n - n_val < 2 {
        return Err(invalid(format!("dataset of {n} samples too small for a {fraction} validation split")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// Full training run. Returns the parameters of the epoch with the lowest
/// validation loss (the same objective as training, penalty included).
pub fn train<T: Real>(benchmark: Benchmark, dataset: &Dataset, config: &TrainConfig) -> Result<Trained<T>, TrainFailure> {
    config.validate()?;
    if dataset.benchmark != benchmark {
        return Err(invalid(format!("dataset was simulated from {}, not {benchmark}", dataset.benchmark)).into());
    }
    let mut rng = stream_rng(derive_seed("train", &[config.seed]), 0);
    let (train_idx, val_idx) = split_indices(dataset.len(), config.validation_fraction, &mut rng)?;
    if train_idx.len() < config.batch_size {
        return Err(invalid(format!("{} training samples cannot fill a batch of {}", train_idx.len(), config.batch_size)).into());
    }
    let features = Features::<T>::new(benchmark, dataset);
    let val_perm = random_derangement(val_idx.len(), &mut rng);
    let val_marginal_x: Vec<usize> = val_perm.iter().map(|&k| val_idx[k]).collect();
    let validation = Validation { joint: features.rows(&val_idx, &val_idx), marginal: features.rows(&val_idx, &val_marginal_x) };

    let mut net = ClassifierNet::<T>::init(benchmark.feature_dim(), &config.hidden, config.activation, &mut rng);
    let mut opt = OptimizerState::new(&net, T::lit(config.learning_rate));
    let lambda = T::lit(config.lambda);
    let mut history = TrainHistory { train_indices: train_idx.clone(), validation_indices: val_idx.clone(), ..Default::default() };
    let mut best: Option<(T, ClassifierNet<T>)> = None;

    for epoch in 0..config.epochs {
        let lr = opt.learning_rate;
        let batches = make_batches(&train_idx, config.batch_size, &mut rng)?;
        let mut loss_sum = T::zero();
        let mut rows = 0usize;
        for batch in &batches {
            let step = (|| -> Result<T> {
                let joint = features.rows(&batch.joint, &batch.joint);
                let marginal = features.rows(&batch.joint, &batch.marginal_x);
                let grads;
                let loss_value;
                {
                    let mut tape = Tape::new(&net);
                    let xj = tape.input(joint);
                    let zj = tape.forward(xj)?;
                    let xm = tape.input(marginal);
                    let zm = tape.forward(xm)?;
                    let loss = bnre_loss_node(&mut tape, zj, zm, lambda)?;
                    loss_value = tape.value(loss).data[0];
                    if !loss_value.is_finite() {
                        return Err(Error::Divergence(format!("non-finite training loss at epoch {epoch}")));
                    }
                    grads = tape.backward(loss)?;
                }
                adam_step(&mut net, &grads, &mut opt)?;
                Ok(loss_value)
            })();
            match step {
                Ok(l) => {
                    loss_sum = loss_sum + l * T::from_usize(batch.joint.len()).unwrap();
                    rows += batch.joint.len();
                }
                Err(error) => return Err(TrainFailure { error, history }),
            }
        }
        let (val_loss, balance) = match validation.evaluate(&net, lambda) {
            Ok(v) => v,
            Err(error) => return Err(TrainFailure { error, history }),
        };
        if !val_loss.is_finite() {
            let error = Error::Divergence(format!("non-finite validation loss at epoch {epoch}"));
            return Err(TrainFailure { error, history });
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: (loss_sum / T::from_usize(rows).unwrap()).as_f64(),
            val_loss: val_loss.as_f64(),
            balance_b: balance.as_f64(),
            lr: lr.as_f64(),
        });
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            history.best_epoch = epoch;
        }
        lr_schedule_update(&mut opt, val_loss);
    }
    let (_, net) = best.expect("at least one epoch ran");
    Ok(Trained { net, history })
}
