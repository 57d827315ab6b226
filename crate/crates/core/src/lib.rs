//! Regression with interval targets: weak-label generation, losses,
//! small regressors with analytic gradients, and a benchmark harness.

pub mod datagen;
pub mod error;
pub mod harness;
pub mod interval;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
pub use interval::{
    Interval, IntervalDataset, IntervalExample, LabeledDataset, LabeledExample, Supervision,
    WeakLabel,
};
pub use losses::{BaseLossKind, LossSpec, SelectionStrategy};
pub use metrics::MetricReport;
pub use models::{ModelKind, ModelParams, ModelSpec};
pub use optim::{TrainConfig, TrainHistory};
pub use rng::RngHandle;
pub use harness::{ExperimentConfig, ResultTable};
