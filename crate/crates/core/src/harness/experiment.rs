//! Monte-Carlo rate experiments on the synthetic margin family.
//!
//! For every sample size `n` (at position `i` of the size list) and every
//! replication `r`, the sample is drawn from ChaCha20 stream
//! `(i << 32) | r` of the configured seed. Replications are independent and
//! run in parallel; results are collected in `(n, r)` order, so the output
//! does not depend on the number of worker threads.
//!
//! Excess risks are exact (quadrature against the known distribution), not
//! test-set estimates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::AggregateModel;
use crate::error::{Error, Result};
use crate::grids;
use crate::risk::{excess_risk, SoftClassifier};
use crate::sieve::DomainBox;
use crate::stats;
use crate::svm::SolverOptions;
use crate::synth::{substream, SyntheticDist};

use super::pipelines::{self, PipelineRun};
use super::split::DEFAULT_A;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineTag {
    Sieve,
    SvmLambda,
    #[serde(alias = "svm-grid")]
    SvmSigmaLambda,
    Recursive,
    SplitAverage,
}

impl PipelineTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            PipelineTag::Sieve => "sieve",
            PipelineTag::SvmLambda => "svm-lambda",
            PipelineTag::SvmSigmaLambda => "svm-sigma-lambda",
            PipelineTag::Recursive => "recursive",
            PipelineTag::SplitAverage => "split-average",
        }
    }
}

impl std::str::FromStr for PipelineTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidParameter(format!("unknown pipeline `{s}`")))
    }
}

fn default_replications() -> usize {
    50
}
fn default_a() -> f64 {
    DEFAULT_A
}
fn default_b0() -> f64 {
    grids::DEFAULT_B0
}
fn default_d0() -> usize {
    1
}
fn default_sigma() -> f64 {
    1.0
}
fn default_splits() -> usize {
    2
}
fn default_svm_tol() -> f64 {
    SolverOptions::default().tol
}

/// Experiment description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: PipelineTag,
    pub alpha: f64,
    pub sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_b0")]
    pub b0: f64,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_d0")]
    pub d0: usize,
    /// Kernel parameter for `svm-lambda`.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Sieve ladder height; `⌈log2 m⌉` when absent.
    #[serde(default)]
    pub depth: Option<usize>,
    /// Number of splits for `split-average`.
    #[serde(default = "default_splits")]
    pub splits: usize,
    #[serde(default = "default_svm_tol")]
    pub svm_tol: f64,
    /// Declared complexity exponent, for the sieve theory exponent.
    #[serde(default)]
    pub rho: Option<f64>,
    /// Declared `(p, β)`, for the generic-kernel theory exponent.
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    /// Geometric-noise exponent; defaults to `1 + 1/α`, the value for the
    /// synthetic family.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Where the CLI writes results; ignored by the library.
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn new(pipeline: PipelineTag, alpha: f64, sizes: Vec<usize>, replications: usize, seed: u64) -> Self {
        ExperimentConfig {
            pipeline,
            alpha,
            sizes,
            replications,
            seed,
            b0: default_b0(),
            a: default_a(),
            d0: default_d0(),
            sigma: default_sigma(),
            depth: None,
            splits: default_splits(),
            svm_tol: default_svm_tol(),
            rho: None,
            p: None,
            beta: None,
            gamma: None,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidParameter("experiment needs at least one sample size".into()));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 8) {
            return Err(Error::InvalidParameter(format!("sample sizes must be at least 8, got {n}")));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be at least 1".into()));
        }
        if self.sizes.len() >= 1 << 31 || self.replications >= 1 << 32 {
            return Err(Error::InvalidParameter("too many sizes or replications for the stream layout".into()));
        }
        SyntheticDist::new(self.alpha)?;
        Ok(())
    }

    /// Theory rate exponent as a slope (negative), when the declared
    /// parameters determine it.
    pub fn theory_exponent(&self) -> Option<f64> {
        let kappa = grids::kappa_from_alpha(self.alpha).ok()?;
        match self.pipeline {
            PipelineTag::Sieve | PipelineTag::Recursive | PipelineTag::SplitAverage => {
                grids::rate_exponent(kappa, self.rho?).ok().map(|e| -e)
            }
            PipelineTag::SvmLambda => grids::lambda_ab_rate_exponent(self.alpha, self.beta?, self.p?).ok().map(|e| -e),
            PipelineTag::SvmSigmaLambda => {
                let gamma = self.gamma.unwrap_or(1.0 + 1.0 / self.alpha);
                grids::gauss_rate_exponent(self.alpha, gamma).ok().map(|e| -e)
            }
        }
    }
}

/// Runs the configured pipeline on one sample.
pub fn run_pipeline(config: &ExperimentConfig, data: &crate::data::Dataset) -> Result<PipelineRun> {
    let domain = DomainBox::interval(-1.0, 1.0);
    let opts = SolverOptions { tol: config.svm_tol, max_updates: None };
    match config.pipeline {
        PipelineTag::Sieve => pipelines::pipeline_sieve(data, config.a, config.depth, &domain),
        PipelineTag::Recursive => pipelines::pipeline_recursive(data, config.a, config.depth, &domain),
        PipelineTag::SplitAverage => {
            pipelines::pipeline_split_average(data, config.a, config.depth, &domain, config.splits)
        }
        PipelineTag::SvmLambda => pipelines::pipeline_svm_lambda(data, config.a, config.b0, config.sigma, &opts),
        PipelineTag::SvmSigmaLambda => {
            pipelines::pipeline_svm_sigma_lambda(data, config.a, config.b0, config.d0, &opts)
        }
    }
}

/// One row of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub pipeline: String,
    pub n: usize,
    pub replication: usize,
    pub excess_risk: f64,
    pub min_member_excess: f64,
    pub weights_entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationFailure {
    pub n: usize,
    pub replication: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub replications: usize,
    pub mean_excess: f64,
    pub stderr_excess: f64,
    pub mean_min_member_excess: f64,
    pub stderr_min_member_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub pipeline: String,
    pub alpha: f64,
    pub per_n: Vec<SizeSummary>,
    pub slope: Option<f64>,
    pub slope_ci: Option<(f64, f64)>,
    pub theory_exponent: Option<f64>,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<ReplicationFailure>,
    pub summary: ExperimentSummary,
}

impl ExperimentResult {
    /// CSV `pipeline,n,replication,excess_risk,min_member_excess,weights_entropy`
    /// with shortest round-trip decimal formatting.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for r in &self.records {
            wtr.serialize(r)?;
        }
        if self.records.is_empty() {
            wtr.write_record(["pipeline", "n", "replication", "excess_risk", "min_member_excess", "weights_entropy"])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Experiment(e.to_string()))
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    pub fn size_summary(&self, n: usize) -> Option<&SizeSummary> {
        self.summary.per_n.iter().find(|s| s.n == n)
    }
}

/// Exact excess risks of the aggregate and of its best member.
pub fn evaluate_run(model: &AggregateModel, dist: &SyntheticDist) -> Result<(f64, f64)> {
    let agg = excess_risk(model, dist)?;
    let members = model
        .rules()
        .par_iter()
        .map(|r| excess_risk(r, dist))
        .collect::<Result<Vec<_>>>()?;
    let best = members.into_iter().fold(f64::INFINITY, f64::min);
    Ok((agg, best))
}

fn replicate(config: &ExperimentConfig, dist: &SyntheticDist, size_index: usize, rep: usize) -> Result<ReplicationRecord> {
    let n = config.sizes[size_index];
    let mut rng = substream(config.seed, ((size_index as u64) << 32) | rep as u64);
    let data = dist.sample_with(&mut rng, n)?;
    let run = run_pipeline(config, &data)?;
    let (excess, min_member) = evaluate_run(&run.model, dist)?;
    Ok(ReplicationRecord {
        pipeline: config.pipeline.as_str().to_string(),
        n,
        replication: rep,
        excess_risk: excess,
        min_member_excess: min_member,
        weights_entropy: run.model.weights().entropy(),
    })
}

pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let dist = SyntheticDist::new(config.alpha)?;
    let jobs: Vec<(usize, usize)> = (0..config.sizes.len())
        .flat_map(|i| (0..config.replications).map(move |r| (i, r)))
        .collect();
    let outcomes: Vec<Result<ReplicationRecord>> =
        jobs.par_iter().map(|&(i, r)| replicate(config, &dist, i, r)).collect();

    let mut records = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (&(i, r), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push(ReplicationFailure { n: config.sizes[i], replication: r, error: e.to_string() }),
        }
    }
    if failures.len() * 10 > jobs.len() {
        return Err(Error::Experiment(format!(
            "{} of {} replications failed; first: {}",
            failures.len(),
            jobs.len(),
            failures[0].error
        )));
    }

    let mut per_n = Vec::new();
    for &n in &config.sizes {
        let rows: Vec<&ReplicationRecord> = records.iter().filter(|r| r.n == n).collect();
        if rows.is_empty() {
            continue;
        }
        let ex: Vec<f64> = rows.iter().map(|r| r.excess_risk).collect();
        let mm: Vec<f64> = rows.iter().map(|r| r.min_member_excess).collect();
        let (mean_excess, stderr_excess) = stats::mean_and_std_error(&ex);
        let (mean_min, stderr_min) = stats::mean_and_std_error(&mm);
        per_n.push(SizeSummary {
            n,
            replications: rows.len(),
            mean_excess,
            stderr_excess,
            mean_min_member_excess: mean_min,
            stderr_min_member_excess: stderr_min,
        });
    }

    let (slope, slope_ci) = if per_n.len() >= 2 {
        let ns: Vec<f64> = per_n.iter().map(|s| s.n as f64).collect();
        let means: Vec<f64> = per_n.iter().map(|s| s.mean_excess).collect();
        match stats::log_log_fit(&ns, &means) {
            Ok(fit) => (Some(fit.slope), fit.slope_interval(0.95)),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };

    let summary = ExperimentSummary {
        pipeline: config.pipeline.as_str().to_string(),
        alpha: config.alpha,
        per_n,
        slope,
        slope_ci,
        theory_exponent: config.theory_exponent(),
        failures: failures.len(),
    };
    Ok(ExperimentResult { records, failures, summary })
}

/// Convenience for soft classifiers outside an aggregate.
pub fn exact_excess_risk<C: SoftClassifier + ?Sized>(f: &C, dist: &SyntheticDist) -> Result<f64> {
    excess_risk(f, dist)
}
