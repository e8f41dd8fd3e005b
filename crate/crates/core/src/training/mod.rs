//! Loss, metric, optimizer, the windowed training loop, evaluation and random search.

mod adam;
mod eval;
mod metrics;
mod search;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use eval::{evaluate, predict_test, report, EvalReport};
pub use metrics::{accuracy_within, mse_grad, mse_loss};
pub use search::{trial_search, SearchOutcome, SearchSetup, TrialParams, TrialRecord, TrialSpace};
pub use trainer::{train, untrained, History, Normalizers, TrainConfig, TrainedModel, TrialData};
