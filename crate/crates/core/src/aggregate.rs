//! Aggregation of a finite family of prediction rules.
//!
//! The AEW aggregate is the convex combination `Σ w_j f_j` with
//! `w_j ∝ exp(−n A_n(f_j))`, where `A_n` is the empirical hinge risk on the
//! aggregation sample. Because every `f_j` takes values in `{−1, +1}`,
//! `n A_n(f_j)` is twice the number of mistakes of `f_j`, and the weights are
//! equivalently `∝ exp(Σ_i y_i f_j(x_i))`.
//!
//! Weights are formed from log-weights by subtracting the maximum before
//! exponentiating; entries whose shifted log-weight is below [`UNDERFLOW`]
//! are set to exactly zero.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::risk::{hinge, PredictionRule, SoftClassifier};

/// Shifted log-weights below this are flushed to zero.
pub const UNDERFLOW: f64 = -745.0;

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Normalised `exp(log_weights)` computed with a max shift.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::NoRules);
        }
        if log_weights.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::NonFinite("log-weights"));
        }
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::NonFinite("log-weights"));
        }
        let raw: Vec<f64> = log_weights
            .iter()
            .map(|&v| {
                let s = v - max;
                if s < UNDERFLOW {
                    0.0
                } else {
                    s.exp()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        Ok(WeightVector(raw.into_iter().map(|v| v / total).collect()))
    }

    /// Uniform weights over `m` entries.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::NoRules);
        }
        Ok(WeightVector(vec![1.0 / m as f64; m]))
    }

    /// All mass on `index`.
    pub fn point_mass(m: usize, index: usize) -> Result<Self> {
        if index >= m {
            return Err(Error::InvalidParameter(format!("index {index} out of range for {m} rules")));
        }
        let mut w = vec![0.0; m];
        w[index] = 1.0;
        Ok(WeightVector(w))
    }

    /// Validates an explicit weight vector (nonnegative, sums to one within
    /// `1e-12`).
    pub fn from_vec(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::NoRules);
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightVector(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self.0.iter().filter(|w| **w > 0.0).map(|w| w * w.ln()).sum::<f64>()
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateKind {
    Aew,
    Erm,
    Recursive,
    SplitAverage,
}

impl fmt::Display for AggregateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregateKind::Aew => "aew",
            AggregateKind::Erm => "erm",
            AggregateKind::Recursive => "recursive",
            AggregateKind::SplitAverage => "split-average",
        })
    }
}

/// A convex combination of hard rules; evaluates into `[−1, 1]`.
#[derive(Clone, Debug)]
pub struct AggregateModel {
    kind: AggregateKind,
    rules: Vec<PredictionRule>,
    weights: WeightVector,
}

impl AggregateModel {
    pub fn new(kind: AggregateKind, rules: Vec<PredictionRule>, weights: WeightVector) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::NoRules);
        }
        if rules.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: rules.len(), got: weights.len() });
        }
        Ok(AggregateModel { kind, rules, weights })
    }

    pub fn kind(&self) -> AggregateKind {
        self.kind
    }

    pub fn rules(&self) -> &[PredictionRule] {
        &self.rules
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// `Σ_j w_j f_j(x)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.rules
            .iter()
            .zip(self.weights.as_slice())
            .filter(|(_, w)| **w > 0.0)
            .map(|(r, w)| w * r.score(x))
            .sum()
    }

    /// Serialisable view. `rule_refs[j]` names rule `j` (a file name, an
    /// index, ...); when absent, each rule's descriptor is used.
    pub fn to_json(&self, rule_refs: Option<&[String]>) -> Result<AggregateJson> {
        let refs: Vec<String> = match rule_refs {
            Some(r) if r.len() != self.rules.len() => {
                return Err(Error::DimensionMismatch { expected: self.rules.len(), got: r.len() })
            }
            Some(r) => r.to_vec(),
            None => self.rules.iter().map(PredictionRule::descriptor).collect(),
        };
        Ok(AggregateJson {
            kind: self.kind,
            weights: self.weights.as_slice().iter().map(f64::to_string).collect(),
            rules: refs,
        })
    }
}

impl SoftClassifier for AggregateModel {
    fn score(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }

    /// The sign of the aggregate can only change where a member jumps.
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .rules
            .iter()
            .zip(self.weights.as_slice())
            .filter(|(_, w)| **w > 0.0)
            .flat_map(|(r, _)| r.breakpoints(lo, hi))
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }
}

/// Serialised aggregate: weights as full-precision decimal strings and rules
/// by reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateJson {
    pub kind: AggregateKind,
    pub weights: Vec<String>,
    pub rules: Vec<String>,
}

impl AggregateJson {
    pub fn parsed_weights(&self) -> Result<WeightVector> {
        let w = self
            .weights
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse { record: 0, msg: format!("weight `{s}` is not a number") })
            })
            .collect::<Result<Vec<_>>>()?;
        WeightVector::from_vec(w)
    }
}

/// A convex surrogate loss `φ(y f(x))`.
#[derive(Clone)]
pub enum ConvexLoss {
    Hinge,
    /// `e^{−v}`
    Exponential,
    /// `ln(1 + e^{−v})`
    Logit,
    Custom(String, Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ConvexLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexLoss::Hinge => f.write_str("Hinge"),
            ConvexLoss::Exponential => f.write_str("Exponential"),
            ConvexLoss::Logit => f.write_str("Logit"),
            ConvexLoss::Custom(name, _) => write!(f, "Custom({name})"),
        }
    }
}

impl ConvexLoss {
    pub fn custom(name: impl Into<String>, phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ConvexLoss::Custom(name.into(), Arc::new(phi))
    }

    #[inline]
    pub fn eval(&self, margin: f64) -> f64 {
        match self {
            ConvexLoss::Hinge => hinge(margin),
            ConvexLoss::Exponential => (-margin).exp(),
            ConvexLoss::Logit => (-margin).exp().ln_1p(),
            ConvexLoss::Custom(_, phi) => phi(margin),
        }
    }

    /// Midpoint-convexity spot check on `points` equispaced nodes of
    /// `[−1, 1]`, up to `slack`.
    pub fn is_midpoint_convex(&self, points: usize, slack: f64) -> bool {
        let points = points.max(3);
        let xs: Vec<f64> = (0..points).map(|i| -1.0 + 2.0 * i as f64 / (points - 1) as f64).collect();
        xs.iter().enumerate().all(|(i, &a)| {
            xs[i + 1..]
                .iter()
                .all(|&b| self.eval(0.5 * (a + b)) <= 0.5 * (self.eval(a) + self.eval(b)) + slack)
        })
    }
}

fn check_inputs(rules: &[PredictionRule], data: &Dataset) -> Result<()> {
    if rules.is_empty() {
        return Err(Error::NoRules);
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// `Σ_i φ(y_i f_j(x_i))` per rule, each summed in dataset order.
pub fn loss_sums(rules: &[PredictionRule], data: &Dataset, loss: &ConvexLoss) -> Vec<f64> {
    rules
        .par_iter()
        .map(|r| data.iter().map(|s| loss.eval(s.y.value() * r.score(&s.x))).sum())
        .collect()
}

/// Empirical hinge risks `A_n(f_j)`.
pub fn hinge_risks(rules: &[PredictionRule], data: &Dataset) -> Result<Vec<f64>> {
    check_inputs(rules, data)?;
    let n = data.len() as f64;
    Ok(loss_sums(rules, data, &ConvexLoss::Hinge).into_iter().map(|s| s / n).collect())
}

/// `w_j ∝ exp(−n A_n^{(φ)}(f_j))`.
pub fn phi_weights(rules: &[PredictionRule], data: &Dataset, loss: &ConvexLoss) -> Result<WeightVector> {
    check_inputs(rules, data)?;
    let log_w: Vec<f64> = loss_sums(rules, data, loss).into_iter().map(|s| -s).collect();
    WeightVector::from_log_weights(&log_w)
}

/// Exponential weights `w_j ∝ exp(−n A_n(f_j))`.
pub fn aew_weights(rules: &[PredictionRule], data: &Dataset) -> Result<WeightVector> {
    phi_weights(rules, data, &ConvexLoss::Hinge)
}

/// Exponential weights in label-agreement form `w_j ∝ exp(Σ_i y_i f_j(x_i))`.
/// Equal to [`aew_weights`] for hard rules.
pub fn agreement_weights(rules: &[PredictionRule], data: &Dataset) -> Result<WeightVector> {
    check_inputs(rules, data)?;
    let log_w: Vec<f64> = rules
        .par_iter()
        .map(|r| data.iter().map(|s| s.y.value() * r.score(&s.x)).sum())
        .collect();
    WeightVector::from_log_weights(&log_w)
}

pub fn aew_aggregate(rules: &[PredictionRule], data: &Dataset) -> Result<AggregateModel> {
    let w = aew_weights(rules, data)?;
    AggregateModel::new(AggregateKind::Aew, rules.to_vec(), w)
}

/// Index and rule with the smallest empirical 0-1 risk; ties go to the
/// smallest index.
pub fn erm_select(rules: &[PredictionRule], data: &Dataset) -> Result<(usize, PredictionRule)> {
    check_inputs(rules, data)?;
    let errors: Vec<usize> = rules
        .par_iter()
        .map(|r| data.iter().filter(|s| s.y.value() * r.score(&s.x) <= 0.0).count())
        .collect();
    let (best, _) = errors
        .iter()
        .enumerate()
        .fold((0, usize::MAX), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    Ok((best, rules[best].clone()))
}

/// The ERM selector as a degenerate aggregate.
pub fn erm_aggregate(rules: &[PredictionRule], data: &Dataset) -> Result<AggregateModel> {
    let (best, _) = erm_select(rules, data)?;
    AggregateModel::new(AggregateKind::Erm, rules.to_vec(), WeightVector::point_mass(rules.len(), best)?)
}

/// Per-observation hinge losses `ℓ[j][i] = (1 − y_i f_j(x_i))_+`.
fn hinge_table(rules: &[PredictionRule], data: &Dataset) -> Vec<Vec<f64>> {
    rules
        .par_iter()
        .map(|r| data.iter().map(|s| hinge(s.y.value() * r.score(&s.x))).collect())
        .collect()
}

/// Averaged weights `Σ_k π_k w^{(k)}`, where `w^{(k)}` are the exponential
/// weights computed on the first `k` observations and `π` is a probability
/// vector over `k = 1..=n`. Running sums `k A_k(f_j)` are maintained in one
/// pass.
pub fn recursive_weights_with(
    rules: &[PredictionRule],
    data: &Dataset,
    prefix_weights: &[f64],
) -> Result<WeightVector> {
    check_inputs(rules, data)?;
    let n = data.len();
    if prefix_weights.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: prefix_weights.len() });
    }
    WeightVector::from_vec(prefix_weights.to_vec())?;
    let losses = hinge_table(rules, data);
    let m = rules.len();
    let mut running = vec![0.0; m];
    let mut acc = vec![0.0; m];
    let mut log_w = vec![0.0; m];
    for (k, &pk) in prefix_weights.iter().enumerate() {
        for j in 0..m {
            running[j] += losses[j][k];
            log_w[j] = -running[j];
        }
        if pk == 0.0 {
            continue;
        }
        let w = WeightVector::from_log_weights(&log_w)?;
        for (a, wj) in acc.iter_mut().zip(w.as_slice()) {
            *a += pk * wj;
        }
    }
    // Renormalise away the rounding in Σ π_k.
    let total: f64 = acc.iter().sum();
    WeightVector::from_vec(acc.into_iter().map(|a| a / total).collect())
}

/// Uniform average over prefixes: `w̄_j = (1/n) Σ_k w_j^{(k)}`.
pub fn recursive_weights(rules: &[PredictionRule], data: &Dataset) -> Result<WeightVector> {
    check_inputs(rules, data)?;
    let n = data.len();
    recursive_weights_with(rules, data, &vec![1.0 / n as f64; n])
}

pub fn recursive_aggregate(rules: &[PredictionRule], data: &Dataset) -> Result<AggregateModel> {
    let w = recursive_weights(rules, data)?;
    AggregateModel::new(AggregateKind::Recursive, rules.to_vec(), w)
}

/// Uniform average of aggregates, as one aggregate over the concatenated
/// rule lists.
pub fn split_average(aggregates: &[AggregateModel]) -> Result<AggregateModel> {
    match aggregates {
        [] => Err(Error::NoRules),
        [single] => Ok(single.clone()),
        many => {
            let scale = 1.0 / many.len() as f64;
            let rules: Vec<PredictionRule> = many.iter().flat_map(|a| a.rules.iter().cloned()).collect();
            let w: Vec<f64> = many
                .iter()
                .flat_map(|a| a.weights.as_slice().iter().map(move |w| w * scale))
                .collect();
            let total: f64 = w.iter().sum();
            let w = WeightVector::from_vec(w.into_iter().map(|v| v / total).collect())?;
            AggregateModel::new(AggregateKind::SplitAverage, rules, w)
        }
    }
}
