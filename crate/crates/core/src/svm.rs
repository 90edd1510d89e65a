//! L1-SVM with a Gaussian RBF kernel, trained in the dual.
//!
//! The dual problem is
//!
//! ```text
//! maximise   2 Σ C_i y_i − Σ_{i,j} C_i C_j K(x_i, x_j)
//! subject to 0 <= 2 λ C_i y_i <= 1/n
//! ```
//!
//! with `K(x, x') = exp(−σ² ‖x − x'‖²)`. The decision function is
//! `F(x) = Σ C_i K(x_i, x)` with no offset, so there is no equality
//! constraint and single-coordinate ascent is valid: pick the coordinate
//! with the largest projected-gradient violation, maximise the objective in
//! that coordinate exactly, clip to the box, repeat.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, LabeledSample};
use crate::error::{Error, Result};
use crate::risk::scan_sign_changes;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    sigma: f64,
}

impl KernelSpec {
    /// `sigma` is the inverse kernel width.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("kernel sigma must be positive and finite, got {sigma}")));
        }
        Ok(KernelSpec { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        (-self.sigma * self.sigma * d2).exp()
    }
}

/// `exp(−σ² ‖x − x'‖²)`.
pub fn rbf_kernel(x: &[f64], z: &[f64], sigma: f64) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: z.len() });
    }
    Ok(KernelSpec::new(sigma)?.eval_unchecked(x, z))
}

/// Dense row-major Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Gram {
    n: usize,
    values: Vec<f64>,
}

impl Gram {
    pub fn new(points: &[&[f64]], kernel: KernelSpec) -> Result<Self> {
        let n = points.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = kernel.eval_unchecked(points[i], points[j]);
                if !k.is_finite() {
                    return Err(Error::NonFinite("Gram matrix"));
                }
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        Ok(Gram { n, values })
    }

    pub fn from_dataset(data: &Dataset, kernel: KernelSpec) -> Result<Self> {
        let pts: Vec<&[f64]> = data.iter().map(|s| s.x.as_slice()).collect();
        Self::new(&pts, kernel)
    }

    /// Wraps an explicit symmetric matrix.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Gram matrix"));
        }
        Ok(Gram { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }
}

/// Double-double accumulator: products are split exactly with `mul_add`
/// and the running sum carries its rounding error.
#[derive(Clone, Copy, Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let s = self.hi + v;
        let bb = s - self.hi;
        self.lo += (self.hi - (s - bb)) + (v - bb);
        self.hi = s;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `2 Σ C_i y_i − Cᵀ K C`, accumulated in double-double so successive
/// iterates compare reliably even when the terms cancel heavily.
pub fn dual_objective(coeffs: &[f64], gram: &Gram, labels: &[Label]) -> Result<f64> {
    let n = gram.n();
    if coeffs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: coeffs.len() });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
    }
    let mut total = Compensated::default();
    for i in 0..n {
        if coeffs[i] == 0.0 {
            continue;
        }
        total.add(2.0 * coeffs[i] * labels[i].value());
        let mut row = Compensated::default();
        for (k, c) in gram.row(i).iter().zip(coeffs) {
            row.add_product(*k, *c);
        }
        total.add_product(-coeffs[i], row.hi);
        total.add_product(-coeffs[i], row.lo);
    }
    Ok(total.value())
}

/// Feasible interval of `C_i`: `[0, U]` for `y = +1`, `[−U, 0]` for
/// `y = −1`, with `U = 1 / (2 λ n)`.
#[inline]
pub fn box_bounds(y: Label, upper: f64) -> (f64, f64) {
    match y {
        Label::Pos => (0.0, upper),
        Label::Neg => (-upper, 0.0),
    }
}

/// Violation of the optimality conditions at one coordinate, given the
/// gradient `g_i` of the objective.
#[inline]
fn violation(c: f64, g: f64, lo: f64, hi: f64) -> f64 {
    if c <= lo {
        g.max(0.0)
    } else if c >= hi {
        (-g).max(0.0)
    } else {
        g.abs()
    }
}

/// Largest projected-gradient magnitude over all coordinates.
pub fn kkt_violation_raw(coeffs: &[f64], gram: &Gram, labels: &[Label], upper: f64) -> Result<f64> {
    let n = gram.n();
    if coeffs.len() != n || labels.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: coeffs.len().min(labels.len()) });
    }
    Ok((0..n)
        .map(|i| {
            let kc: f64 = gram.row(i).iter().zip(coeffs).map(|(k, c)| k * c).sum();
            let g = 2.0 * labels[i].value() - 2.0 * kc;
            let (lo, hi) = box_bounds(labels[i], upper);
            violation(coeffs[i], g, lo, hi)
        })
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Stop when the largest KKT violation is at most `tol`.
    pub tol: f64,
    /// Cap on coordinate updates; `None` means `10^4 · n`.
    pub max_updates: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-8, max_updates: None }
    }
}

/// A trained model. Immutable after fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel {
    kernel: KernelSpec,
    lambda: f64,
    coeffs: Vec<f64>,
    support: Vec<LabeledSample>,
    dual_value: f64,
    kkt_violation: f64,
    converged: bool,
    updates: usize,
}

impl SvmModel {
    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    pub fn support(&self) -> &[LabeledSample] {
        &self.support
    }
    pub fn dual_value(&self) -> f64 {
        self.dual_value
    }
    /// KKT violation at the returned coefficients.
    pub fn kkt_violation(&self) -> f64 {
        self.kkt_violation
    }
    pub fn converged(&self) -> bool {
        self.converged
    }
    pub fn updates(&self) -> usize {
        self.updates
    }
    pub fn dim(&self) -> usize {
        self.support.first().map_or(0, |s| s.x.len())
    }
    /// `U = 1 / (2 λ n)`.
    pub fn upper_bound(&self) -> f64 {
        1.0 / (2.0 * self.lambda * self.support.len() as f64)
    }

    pub(crate) fn decision_unchecked(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&self.support)
            .filter(|(c, _)| **c != 0.0)
            .map(|(c, s)| c * self.kernel.eval_unchecked(&s.x, x))
            .sum()
    }

    /// `F(x) = Σ C_i K(x_i, x)`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.decision_unchecked(x))
    }

    /// `sign(F(x))` with `sign(0) = +1`.
    pub fn classify(&self, x: &[f64]) -> Result<Label> {
        Ok(Label::from_sign(self.decision(x)?))
    }

    /// Sign changes of `F` on `[lo, hi]` for one-dimensional models. The scan
    /// step resolves features down to a tenth of the kernel width.
    pub fn sign_changes_1d(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.dim() != 1 || self.coeffs.iter().all(|c| *c == 0.0) {
            return Vec::new();
        }
        let step = (0.1 / self.kernel.sigma).min((hi - lo) / 4096.0);
        let points = ((hi - lo) / step).ceil() as usize + 1;
        scan_sign_changes(|x| self.decision_unchecked(&[x]), lo, hi, points)
    }

    /// Recomputes the KKT violation from scratch.
    pub fn recompute_kkt_violation(&self) -> Result<f64> {
        let gram = self.gram()?;
        let labels: Vec<Label> = self.support.iter().map(|s| s.y).collect();
        kkt_violation_raw(&self.coeffs, &gram, &labels, self.upper_bound())
    }

    pub fn gram(&self) -> Result<Gram> {
        let pts: Vec<&[f64]> = self.support.iter().map(|s| s.x.as_slice()).collect();
        Gram::new(&pts, self.kernel)
    }

    pub fn to_json(&self) -> SvmModelJson {
        SvmModelJson {
            sigma: self.kernel.sigma.to_string(),
            lambda: self.lambda.to_string(),
            coeffs: self.coeffs.iter().map(f64::to_string).collect(),
            support_points: self.support.clone(),
            dual_value: self.dual_value.to_string(),
            kkt_violation: self.kkt_violation.to_string(),
            converged: self.converged,
        }
    }

    pub fn from_json(json: &SvmModelJson) -> Result<Self> {
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse { record: 0, msg: format!("{what} `{s}` is not a number") })
        };
        let kernel = KernelSpec::new(num(&json.sigma, "sigma")?)?;
        let lambda = num(&json.lambda, "lambda")?;
        check_lambda(lambda)?;
        let coeffs = json.coeffs.iter().map(|c| num(c, "coefficient")).collect::<Result<Vec<_>>>()?;
        if coeffs.len() != json.support_points.len() {
            return Err(Error::DimensionMismatch { expected: json.support_points.len(), got: coeffs.len() });
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("coefficients"));
        }
        // Validates dimensions and finiteness of the support points.
        let support = Dataset::new(json.support_points.clone())?.samples().to_vec();
        Ok(SvmModel {
            kernel,
            lambda,
            coeffs,
            support,
            dual_value: num(&json.dual_value, "dual value")?,
            kkt_violation: num(&json.kkt_violation, "KKT violation")?,
            converged: json.converged,
            updates: 0,
        })
    }
}

/// Serialised model. Reals are decimal strings carrying full precision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModelJson {
    pub sigma: String,
    pub lambda: String,
    pub coeffs: Vec<String>,
    pub support_points: Vec<LabeledSample>,
    pub dual_value: String,
    pub kkt_violation: String,
    pub converged: bool,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

/// Solves the dual by max-violation coordinate ascent.
///
/// Reaching the update cap is not an error: the model comes back with
/// `converged() == false` and its final KKT violation.
pub fn solve_dual(data: &Dataset, kernel: KernelSpec, lambda: f64, opts: &SolverOptions) -> Result<SvmModel> {
    solve(data, kernel, lambda, opts, None)
}

/// As [`solve_dual`], also returning the exact dual objective after every
/// coordinate update (starting with the value at zero).
pub fn solve_dual_traced(
    data: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<(SvmModel, Vec<f64>)> {
    let mut trace = Vec::new();
    let model = solve(data, kernel, lambda, opts, Some(&mut trace))?;
    Ok((model, trace))
}

fn solve(
    data: &Dataset,
    kernel: KernelSpec,
    lambda: f64,
    opts: &SolverOptions,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<SvmModel> {
    check_lambda(lambda)?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("solver tolerance must be positive, got {}", opts.tol)));
    }
    let n = data.len();
    let gram = Gram::from_dataset(data, kernel)?;
    let labels: Vec<Label> = data.iter().map(|s| s.y).collect();
    let upper = 1.0 / (2.0 * lambda * n as f64);
    let bounds: Vec<(f64, f64)> = labels.iter().map(|&y| box_bounds(y, upper)).collect();
    let cap = opts.max_updates.unwrap_or(10_000 * n);

    let mut coeffs = vec![0.0; n];
    // Gradient of the objective: 2 y_i − 2 (K C)_i.
    let mut grad: Vec<f64> = labels.iter().map(|y| 2.0 * y.value()).collect();
    if let Some(t) = trace.as_deref_mut() {
        t.push(0.0);
    }

    let mut updates = 0;
    let mut worst;
    loop {
        let (best, v) = (0..n)
            .map(|i| (i, violation(coeffs[i], grad[i], bounds[i].0, bounds[i].1)))
            .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        worst = v;
        if worst <= opts.tol || updates >= cap {
            break;
        }
        let i = best;
        let kii = gram.get(i, i);
        let target = (coeffs[i] + grad[i] / (2.0 * kii)).clamp(bounds[i].0, bounds[i].1);
        let delta = target - coeffs[i];
        if delta == 0.0 {
            // The step underflows at this magnitude; no further progress.
            break;
        }
        coeffs[i] = target;
        for (g, k) in grad.iter_mut().zip(gram.row(i)) {
            *g -= 2.0 * k * delta;
        }
        updates += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(dual_objective(&coeffs, &gram, &labels)?);
        }
    }

    let dual_value = dual_objective(&coeffs, &gram, &labels)?;
    let kkt_violation = kkt_violation_raw(&coeffs, &gram, &labels, upper)?;
    Ok(SvmModel {
        kernel,
        lambda,
        coeffs,
        support: data.samples().to_vec(),
        dual_value,
        kkt_violation,
        converged: kkt_violation <= opts.tol,
        updates,
    })
}
