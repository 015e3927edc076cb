//! Experiment runner: configuration, data loading, evaluation, the
//! all-strategy comparison, the KG-availability sweep and run manifests.

pub mod config;
pub mod data;
pub mod experiment;
pub mod manifest;
pub mod report;

pub use config::Config;
pub use data::{DatasetRef, LoadedData};
pub use experiment::{
    compare, evaluate, run_sweep, train_variant, Comparison, PlotPoint, Sweep, SweepMask, SweepRow,
};
pub use manifest::{execute, rerun, Command, RunManifest};
pub use report::{ResultRow, SummaryRow};
