//! Experiment runner: reference states, restriction, lifting error tables.

pub mod config;
pub mod diffusion;
pub mod experiment;

pub use config::{Cell, ExperimentConfig, InitialData, Method, NormKind, Preset};
pub use diffusion::{DiffusionCheck, DiffusionResult};
pub use experiment::{
    lifting_errors, make_reference, norm2, norm2_per_velocity, restrict, run_table, run_table_with_reference,
    train_and_lift, ExperimentReport, ReportRow, TrainedLift,
};
