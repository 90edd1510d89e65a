//! Sample splitting, the end-to-end adaptive pipelines and the Monte-Carlo
//! rate experiments.

pub mod experiment;
pub mod pipelines;
pub mod split;

pub use experiment::{
    evaluate_run, run_pipeline, run_rate_experiment, ExperimentConfig, ExperimentResult, ExperimentSummary, PipelineTag,
    ReplicationRecord, SizeSummary,
};
pub use pipelines::{
    pipeline_recursive, pipeline_sieve, pipeline_split_average, pipeline_svm_lambda, pipeline_svm_sigma_lambda,
    PipelineRun,
};
pub use split::{split, SplitPlan};
