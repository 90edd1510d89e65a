//! End-to-end adaptive classifiers: fit a family of base classifiers on the
//! first part of a split, aggregate them with weights computed on the second.

use std::sync::Arc;

use rayon::prelude::*;

use crate::aggregate::{self, AggregateModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::grids;
use crate::risk::PredictionRule;
use crate::sieve::{self, DomainBox};
use crate::svm::{self, KernelSpec, SolverOptions, SvmModel};

use super::split::{split, SplitPlan};

/// Non-converged SVMs are kept when their KKT violation is within this
/// multiple of the solver tolerance.
pub const KKT_ACCEPT_FACTOR: f64 = 100.0;

/// Output of one pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub model: AggregateModel,
    pub plan: SplitPlan,
    /// Grid positions of SVMs that did not converge but were kept.
    pub flagged: Vec<usize>,
    /// Grid positions of SVMs dropped for excessive KKT violation.
    pub excluded: Vec<usize>,
}

fn sieve_rules(train: &Dataset, depth: Option<usize>, domain: &DomainBox) -> Result<Vec<PredictionRule>> {
    let depth = depth.unwrap_or_else(|| sieve::default_depth(train.len(), train.dim()));
    Ok(sieve::sieve_ladder(train, depth, domain)?.to_rules())
}

/// Dyadic ERM ladder on `D_m` (depths `0..=depth`, default
/// `⌈log2(m)/d⌉`), AEW-aggregated on `D_l`.
pub fn pipeline_sieve(data: &Dataset, a: f64, depth: Option<usize>, domain: &DomainBox) -> Result<PipelineRun> {
    let (train, hold, plan) = split(data, a)?;
    let rules = sieve_rules(&train, depth, domain)?;
    let model = aggregate::aew_aggregate(&rules, &hold)?;
    Ok(PipelineRun { model, plan, flagged: Vec::new(), excluded: Vec::new() })
}

/// As [`pipeline_sieve`] but with the recursive aggregate on `D_l`.
pub fn pipeline_recursive(data: &Dataset, a: f64, depth: Option<usize>, domain: &DomainBox) -> Result<PipelineRun> {
    let (train, hold, plan) = split(data, a)?;
    let rules = sieve_rules(&train, depth, domain)?;
    let model = aggregate::recursive_aggregate(&rules, &hold)?;
    Ok(PipelineRun { model, plan, flagged: Vec::new(), excluded: Vec::new() })
}

/// Average of sieve aggregates over `splits` splits. Split `s` is the
/// standard split of the sample rotated left by `s·l` positions, so each
/// split holds out a different contiguous block.
pub fn pipeline_split_average(
    data: &Dataset,
    a: f64,
    depth: Option<usize>,
    domain: &DomainBox,
    splits: usize,
) -> Result<PipelineRun> {
    if splits == 0 {
        return Err(Error::InvalidParameter("split-average needs at least one split".into()));
    }
    let plan = SplitPlan::new(data.len(), a)?;
    let runs = (0..splits)
        .map(|s| pipeline_sieve(&data.rotate_left(s * plan.l), a, depth, domain))
        .collect::<Result<Vec<_>>>()?;
    let models: Vec<AggregateModel> = runs.into_iter().map(|r| r.model).collect();
    let model = aggregate::split_average(&models)?;
    Ok(PipelineRun { model, plan, flagged: Vec::new(), excluded: Vec::new() })
}

/// Fits one SVM per `(σ, λ)` on `train` and applies the convergence policy.
fn fit_family(
    train: &Dataset,
    params: &[(f64, f64)],
    opts: &SolverOptions,
) -> Result<(Vec<PredictionRule>, Vec<usize>, Vec<usize>)> {
    let fits = params
        .par_iter()
        .map(|&(sigma, lambda)| svm::solve_dual(train, KernelSpec::new(sigma)?, lambda, opts))
        .collect::<Result<Vec<SvmModel>>>()?;
    let mut rules = Vec::with_capacity(fits.len());
    let (mut flagged, mut excluded) = (Vec::new(), Vec::new());
    for (i, m) in fits.into_iter().enumerate() {
        if m.converged() {
            rules.push(PredictionRule::SvmSign(Arc::new(m)));
        } else if m.kkt_violation() <= KKT_ACCEPT_FACTOR * opts.tol {
            flagged.push(i);
            rules.push(PredictionRule::SvmSign(Arc::new(m)));
        } else {
            excluded.push(i);
        }
    }
    if rules.is_empty() {
        return Err(Error::NoConvergedModels);
    }
    Ok((rules, flagged, excluded))
}

/// SVMs with fixed `σ` over the `λ` grid `G(l)`, aggregated on `D_l`.
pub fn pipeline_svm_lambda(
    data: &Dataset,
    a: f64,
    b0: f64,
    sigma: f64,
    opts: &SolverOptions,
) -> Result<PipelineRun> {
    let (train, hold, plan) = split(data, a)?;
    let grid = grids::lambda_grid(plan.l, b0)?;
    let params: Vec<(f64, f64)> = grid.entries.iter().map(|e| (sigma, e.lambda)).collect();
    let (rules, flagged, excluded) = fit_family(&train, &params, opts)?;
    let model = aggregate::aew_aggregate(&rules, &hold)?;
    Ok(PipelineRun { model, plan, flagged, excluded })
}

/// SVMs over the `(σ, λ)` grid `N(l)`, aggregated on `D_l`.
pub fn pipeline_svm_sigma_lambda(
    data: &Dataset,
    a: f64,
    b0: f64,
    d0: usize,
    opts: &SolverOptions,
) -> Result<PipelineRun> {
    let (train, hold, plan) = split(data, a)?;
    let grid = grids::sigma_lambda_grid(plan.l, b0, d0)?;
    let params: Vec<(f64, f64)> = grid.entries.iter().map(|e| (e.sigma, e.lambda)).collect();
    let (rules, flagged, excluded) = fit_family(&train, &params, opts)?;
    let model = aggregate::aew_aggregate(&rules, &hold)?;
    Ok(PipelineRun { model, plan, flagged, excluded })
}
