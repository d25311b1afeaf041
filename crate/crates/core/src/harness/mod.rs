//! Experiment configuration, the synthetic car dataset, evaluation runs and
//! the command line.

pub mod cli;
mod config;
mod experiment;
mod synth;

pub use config::{parse_score, ConfigMap, Dataset, ExperimentConfig, Method};
pub use experiment::{
    holed_for_imputation, imputation_rows, load_dataset, rewriting_curves, run_eval, run_imputation_experiment,
    run_rewriting_experiment, split, sub_seed, train_models, write_imputation_outputs, write_rewriting_outputs,
    ImputationRow, PrCurve, PrPoint, TrainedModels,
};
pub use synth::{cars_net, cars_table};
