//! Small reverse-mode differentiation core for fully connected classifiers.

mod adam;
mod gradcheck;
mod net;
mod tape;

pub use adam::{adam_step, lr_schedule_update, OptimizerState, BETA1, BETA2, EPSILON, LR_DECAY, PLATEAU_PATIENCE};
pub use gradcheck::finite_diff_check;
pub use net::{Activation, ClassifierNet, Gradients, Layer, WeightsFile};
pub use tape::{NodeId, Tape};
pub(crate) use tape::bce_term;
