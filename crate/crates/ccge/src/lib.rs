//! Harness around `ccge-core`: configuration files, checkpoints, metrics
//! streams, the training/evaluation/ablation commands and SVG replays.

pub mod config;
pub mod io;
pub mod run;
pub mod svg;

pub use config::ExperimentConfig;
