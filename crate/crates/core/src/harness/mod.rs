//! Instance generators, reference clusterings and evaluation experiments.

pub mod experiments;
pub mod fully_dynamic;
pub mod generators;
pub mod reference;
pub mod stats;

pub use experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutput, GeneratorKind};
pub use fully_dynamic::{run_fully_dynamic, DynamicClusterer, NaiveRecompute, PointRequest, StaticClusterer};
pub use reference::reference_kmedians;
