//! Mini-batch Adam training with validation-driven callbacks.

mod adam;
mod callbacks;
mod fit;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use callbacks::{early_stop_update, plateau_update, EarlyStopper, LrSchedule};
pub use fit::{batch_gradient, evaluate, fit, EpochRecord, FitOutcome, Sample, TrainConfig};
