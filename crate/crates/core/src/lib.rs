//! Aggregation of classifiers with exponential weights.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] and [`risk`]: labelled samples, prediction rules, empirical and
//!   population (0-1 and hinge) risks.
//! * [`aggregate`]: exponential-weights aggregation (AEW), the ERM selector,
//!   the recursive (running-average) aggregate, weights under a generic convex
//!   loss and averaging over sample splits.
//! * [`svm`]: L1-SVM with a Gaussian RBF kernel, trained in the dual by
//!   coordinate ascent.
//! * [`grids`]: the adaptive `λ` and `(σ, λ)` grids and the closed-form
//!   parameter choices and rates they are meant to track.
//! * [`sieve`]: dyadic-partition ERM classifiers at increasing depth.
//! * [`synth`]: one-dimensional distributions with a tunable margin exponent
//!   and exact Bayes quantities.
//! * [`harness`]: sample splitting, the end-to-end adaptive pipelines and the
//!   Monte-Carlo rate experiments.

pub mod aggregate;
pub mod data;
pub mod error;
pub mod grids;
pub mod harness;
pub mod quadrature;
pub mod risk;
pub mod sieve;
pub mod stats;
pub mod svm;
pub mod synth;

pub use aggregate::{AggregateKind, AggregateModel, ConvexLoss, WeightVector};
pub use data::{Dataset, Label, LabeledSample};
pub use error::{Error, Result};
pub use risk::{PredictionRule, SoftClassifier};
pub use sieve::{DomainBox, DyadicPartitionRule, SieveLadder};
pub use svm::{KernelSpec, SolverOptions, SvmModel};
pub use synth::SyntheticDist;
pub use harness::{ExperimentConfig, ExperimentResult, PipelineTag};
