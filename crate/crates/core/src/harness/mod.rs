//! Experiment orchestration, result files and the command-line interface.

pub mod cli;
pub mod experiments;
pub mod io;

pub use experiments::{
    compare_experiment, generalization_experiment, ExperimentResult, GeneralizationRow, GeneralizationTable,
};
