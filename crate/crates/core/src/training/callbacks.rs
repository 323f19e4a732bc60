//! Validation-loss driven learning-rate reduction and early stopping.

use serde::{Deserialize, Serialize};

/// Halve-on-plateau schedule. A loss counts as an improvement when it is
/// below the best seen so far by more than `min_delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub current_lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    pub min_delta: f64,
    pub best_val_loss: f64,
    pub epochs_without_improvement: usize,
}

impl LrSchedule {
    pub fn new(initial_lr: f64) -> Self {
        LrSchedule {
            current_lr: initial_lr,
            factor: 0.5,
            patience: 3,
            min_lr: 5e-5,
            min_delta: 0.0,
            best_val_loss: f64::INFINITY,
            epochs_without_improvement: 0,
        }
    }
}

pub fn plateau_update(mut sched: LrSchedule, val_loss: f64) -> LrSchedule {
    if val_loss < sched.best_val_loss - sched.min_delta {
        sched.best_val_loss = val_loss;
        sched.epochs_without_improvement = 0;
        return sched;
    }
    sched.epochs_without_improvement += 1;
    if sched.epochs_without_improvement >= sched.patience {
        sched.current_lr = (sched.current_lr * sched.factor).max(sched.min_lr);
        sched.epochs_without_improvement = 0;
    }
    sched
}

/// Stops after `patience` consecutive non-improving epochs and keeps the
/// parameters from the best epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopper {
    pub patience: usize,
    pub min_delta: f64,
    pub best_val_loss: f64,
    pub best_epoch: Option<usize>,
    best_weights: Option<Vec<f64>>,
    pub epochs_without_improvement: usize,
    pub stopped: bool,
    seen: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            min_delta: 0.0,
            best_val_loss: f64::INFINITY,
            best_epoch: None,
            best_weights: None,
            epochs_without_improvement: 0,
            stopped: false,
            seen: 0,
        }
    }

    /// Snapshot from the best epoch so far, never the latest one.
    pub fn best_weights(&self) -> Option<&[f64]> {
        self.best_weights.as_deref()
    }
}

pub fn early_stop_update(mut st: EarlyStopper, val_loss: f64, current_weights: &[f64]) -> EarlyStopper {
    let epoch = st.seen;
    st.seen += 1;
    if val_loss < st.best_val_loss - st.min_delta {
        st.best_val_loss = val_loss;
        st.best_epoch = Some(epoch);
        st.best_weights = Some(current_weights.to_vec());
        st.epochs_without_improvement = 0;
    } else {
        st.epochs_without_improvement += 1;
        if st.epochs_without_improvement >= st.patience {
            st.stopped = true;
        }
    }
    st
}
