//! Evaluation: metrics, synthetic benchmarks, cross-validation and sweeps.

pub mod cv;
pub mod metrics;
pub mod synth;

pub use cv::{aggregate, cross_validate, sweep_model_size, CvConfig, CvReport, CvRun, SweepReport, SweepRow};
pub use metrics::{classification_metrics, evaluate, regression_metrics, MetricsReport};
pub use synth::{synth_generate, to_dataset, SynthSpec, SynthTruth};
