//! Training engine: optimizer configuration, the warmup/poly learning-rate
//! policy, AdamW, and the seeded training loop.

mod adamw;
mod config;
mod schedule;
mod trainer;

pub use adamw::{adamw_step, OptimState};
pub use config::OptimConfig;
pub use schedule::lr_at;
pub use trainer::{log_to_csv, train_loop, train_step, LogRow, TrainConfig, TrainOutcome, TrainSample};
