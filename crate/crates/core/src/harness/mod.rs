//! Datasets, experiments and the property suite behind the CLI.

pub mod datasets;
pub mod experiments;
pub mod properties;

pub use datasets::{generate_dataset, Dataset, DatasetKind, DatasetSpec};
pub use experiments::{
    run_dimred_experiment, run_ptas_experiment, DimredReport, ExperimentSpec, PtasReport,
};
pub use properties::{run_property_suite, PropertyReport, PropertyResult, SuiteOptions};
