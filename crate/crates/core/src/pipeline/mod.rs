//! Dataset generation, splitting, training and evaluation.

pub mod config;
pub mod dataset;
pub mod experiment;
pub mod split;

pub use config::{EstimatorKind, ExperimentConfig, ExperimentSection, SplitSizes};
pub use dataset::{generate_dataset, generate_realization, Dataset, DatasetHeader, DatasetRecord};
pub use experiment::{
    artifact_name, estimate, evaluate, load_model, model_stem, run_experiment, samples, save_model, train_cell,
    training_seed, write_outputs, CellResult, ExperimentOutput, Manifest, ManifestRow, ResultTable, TimingRecord,
};
pub use split::{split_dataset, SplitIndices};
