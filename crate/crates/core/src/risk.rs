//! Prediction rules, empirical risks and population risks.
//!
//! Conventions: `sign(0) = +1`, and the empirical 0-1 loss counts
//! `y·f(x) <= 0` as an error, so a soft score of exactly zero is always
//! charged.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::quadrature::{self, DEFAULT_TOL};
use crate::sieve::DyadicPartitionRule;
use crate::svm::SvmModel;
use crate::synth::SyntheticDist;

/// Grid resolution used when locating sign changes of an opaque function.
pub const DEFAULT_SCAN_POINTS: usize = 8192;

/// A real-valued classifier. Hard rules score in `{-1, +1}`; aggregates
/// score in `[-1, 1]`.
pub trait SoftClassifier: Send + Sync {
    fn score(&self, x: &[f64]) -> f64;

    /// Points of `(lo, hi)` where the one-dimensional restriction of the
    /// score may be discontinuous or change sign. Between two consecutive
    /// breakpoints the score must be continuous and of constant sign.
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        scan_sign_changes(|x| self.score(&[x]), lo, hi, DEFAULT_SCAN_POINTS)
    }
}

impl<T: SoftClassifier + ?Sized> SoftClassifier for &T {
    fn score(&self, x: &[f64]) -> f64 {
        (**self).score(x)
    }
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        (**self).breakpoints(lo, hi)
    }
}

impl<T: SoftClassifier + ?Sized> SoftClassifier for Arc<T> {
    fn score(&self, x: &[f64]) -> f64 {
        (**self).score(x)
    }
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        (**self).breakpoints(lo, hi)
    }
}

/// Locates the sign changes of `f` on `[lo, hi]` by scanning `points`
/// equispaced nodes and bisecting every bracket down to adjacent floats.
pub fn scan_sign_changes<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev = Label::from_sign(f(lo));
    for i in 1..points {
        let x = if i + 1 == points { hi } else { lo + step * i as f64 };
        let cur = Label::from_sign(f(x));
        if cur != prev {
            let (mut a, mut b) = (prev_x, x);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if Label::from_sign(f(mid)) == prev {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(b);
        }
        prev = cur;
        prev_x = x;
    }
    out
}

/// Exact-match lookup of labels, with a default for unseen points.
#[derive(Clone, Debug, Default)]
pub struct LookupTable {
    table: HashMap<Vec<u64>, Label>,
    default: Option<Label>,
}

impl LookupTable {
    pub fn new(default: Label) -> Self {
        LookupTable { table: HashMap::new(), default: Some(default) }
    }

    pub fn insert(&mut self, x: &[f64], y: Label) {
        self.table.insert(key(x), y);
    }

    pub fn get(&self, x: &[f64]) -> Label {
        self.table.get(&key(x)).copied().or(self.default).unwrap_or(Label::Pos)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Label assigned to points not in the table.
    pub fn default_label(&self) -> Label {
        self.default.unwrap_or(Label::Pos)
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same point
    x.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

type RuleFn = Arc<dyn Fn(&[f64]) -> Label + Send + Sync>;

/// Opaque hard classifier.
#[derive(Clone)]
pub struct BoxedRule {
    name: String,
    f: RuleFn,
}

impl BoxedRule {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> Label + Send + Sync + 'static) -> Self {
        BoxedRule { name: name.into(), f: Arc::new(f) }
    }
}

impl fmt::Debug for BoxedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoxedRule").field("name", &self.name).finish_non_exhaustive()
    }
}

/// A hard classifier `x -> {-1, +1}`.
#[derive(Clone, Debug)]
pub enum PredictionRule {
    Constant(Label),
    LookupTable(Arc<LookupTable>),
    Dyadic(Arc<DyadicPartitionRule>),
    SvmSign(Arc<SvmModel>),
    Boxed(BoxedRule),
}

impl PredictionRule {
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            PredictionRule::Constant(l) => *l,
            PredictionRule::LookupTable(t) => t.get(x),
            PredictionRule::Dyadic(r) => r.predict(x),
            PredictionRule::SvmSign(m) => Label::from_sign(m.decision_unchecked(x)),
            PredictionRule::Boxed(b) => (b.f)(x),
        }
    }

    /// Builds a table rule from explicit `(point, label)` pairs.
    pub fn table<'a>(entries: impl IntoIterator<Item = (&'a [f64], Label)>, default: Label) -> Self {
        let mut t = LookupTable::new(default);
        for (x, y) in entries {
            t.insert(x, y);
        }
        PredictionRule::LookupTable(Arc::new(t))
    }

    pub fn boxed(name: impl Into<String>, f: impl Fn(&[f64]) -> Label + Send + Sync + 'static) -> Self {
        PredictionRule::Boxed(BoxedRule::new(name, f))
    }

    /// Short human-readable identifier used when serialising aggregates.
    pub fn descriptor(&self) -> String {
        match self {
            PredictionRule::Constant(l) => format!("constant:{l}"),
            PredictionRule::LookupTable(t) => format!("table:{}", t.len()),
            PredictionRule::Dyadic(r) => format!("dyadic:depth={},dims={}", r.depth(), r.dims()),
            PredictionRule::SvmSign(m) => format!("svm:sigma={},lambda={}", m.kernel().sigma(), m.lambda()),
            PredictionRule::Boxed(b) => format!("boxed:{}", b.name),
        }
    }
}

impl SoftClassifier for PredictionRule {
    fn score(&self, x: &[f64]) -> f64 {
        self.predict(x).value()
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            // Tables differ from their default only on a null set.
            PredictionRule::Constant(_) | PredictionRule::LookupTable(_) => Vec::new(),
            PredictionRule::Dyadic(r) => r.breakpoints_1d(lo, hi),
            PredictionRule::SvmSign(m) => m.sign_changes_1d(lo, hi),
            PredictionRule::Boxed(b) => scan_sign_changes(|x| (b.f)(&[x]).value(), lo, hi, DEFAULT_SCAN_POINTS),
        }
    }
}

/// Hard classifier `sign(f)` of a soft classifier.
#[derive(Clone, Copy, Debug)]
pub struct SignOf<C>(pub C);

impl<C: SoftClassifier> SoftClassifier for SignOf<C> {
    fn score(&self, x: &[f64]) -> f64 {
        Label::from_sign(self.0.score(x)).value()
    }
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.0.breakpoints(lo, hi)
    }
}

/// `(1/n) Σ 1{y_i f(x_i) <= 0}`.
pub fn empirical_risk<C: SoftClassifier + ?Sized>(f: &C, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let errors = data.iter().filter(|s| s.y.value() * f.score(&s.x) <= 0.0).count();
    Ok(errors as f64 / data.len() as f64)
}

/// Hinge loss `(1 - v)_+` of a margin `v = y f(x)`.
#[inline]
pub fn hinge(margin: f64) -> f64 {
    (1.0 - margin).max(0.0)
}

/// `Σ (1 - y_i f(x_i))_+`, summed in dataset order.
pub fn hinge_loss_sum<C: SoftClassifier + ?Sized>(f: &C, data: &Dataset) -> f64 {
    data.iter().map(|s| hinge(s.y.value() * f.score(&s.x))).sum()
}

/// `(1/n) Σ (1 - y_i f(x_i))_+`.
pub fn empirical_hinge_risk<C: SoftClassifier + ?Sized>(f: &C, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(hinge_loss_sum(f, data) / data.len() as f64)
}

fn population_breaks<C: SoftClassifier + ?Sized>(f: &C, dist: &SyntheticDist) -> Vec<f64> {
    let (lo, hi) = dist.support();
    quadrature::normalize_breaks(lo, hi, f.breakpoints(lo, hi).into_iter().chain(dist.kinks()))
}

/// Population misclassification probability `P(Y != sign f(X))`.
pub fn expected_risk<C: SoftClassifier + ?Sized>(f: &C, dist: &SyntheticDist) -> Result<f64> {
    let breaks = population_breaks(f, dist);
    quadrature::integrate(
        |x| {
            let eta = dist.eta(x);
            let p_err = match Label::from_sign(f.score(&[x])) {
                Label::Pos => 1.0 - eta,
                Label::Neg => eta,
            };
            dist.density(x) * p_err
        },
        &breaks,
        DEFAULT_TOL,
    )
}

/// Population hinge risk `E (1 - Y f(X))_+`.
pub fn expected_hinge_risk<C: SoftClassifier + ?Sized>(f: &C, dist: &SyntheticDist) -> Result<f64> {
    let breaks = population_breaks(f, dist);
    quadrature::integrate(
        |x| {
            let eta = dist.eta(x);
            let v = f.score(&[x]);
            dist.density(x) * (eta * hinge(v) + (1.0 - eta) * hinge(-v))
        },
        &breaks,
        DEFAULT_TOL,
    )
}

/// `R(sign f) - R*`.
pub fn excess_risk<C: SoftClassifier + ?Sized>(f: &C, dist: &SyntheticDist) -> Result<f64> {
    Ok(expected_risk(f, dist)? - dist.bayes_risk())
}

/// `A(f) - A*` with `A* = 2 R*`.
pub fn excess_hinge_risk<C: SoftClassifier + ?Sized>(f: &C, dist: &SyntheticDist) -> Result<f64> {
    Ok(expected_hinge_risk(f, dist)? - dist.optimal_hinge_risk())
}

/// Monte-Carlo estimate of a population risk, kept distinct from the
/// quadrature values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Estimates `R(f)` from `draws` fresh samples of `dist`.
pub fn monte_carlo_risk<C: SoftClassifier + ?Sized>(
    f: &C,
    dist: &SyntheticDist,
    draws: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let data = dist.sample(draws, seed)?;
    let mean = empirical_risk(f, &data)?;
    Ok(MonteCarloEstimate { mean, std_error: (mean * (1.0 - mean) / draws as f64).sqrt(), draws })
}
