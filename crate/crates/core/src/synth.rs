//! One-dimensional synthetic distributions with a tunable margin exponent.
//!
//! `X` is uniform on `[-1, 1]` and
//! `η(x) = P(Y = 1 | X = x) = (1 + sign(x)·|x|^{1/α}) / 2`,
//! so `|2η(X) - 1| = |X|^{1/α}` and `P(|2η(X) - 1| <= t) = t^α` exactly.
//! The Bayes rule is `sign(x)` and the Bayes risk is
//! `E[(1 - |X|^{1/α}) / 2] = 1/2 - α / (2(α + 1))`.
//!
//! Random streams: every draw comes from ChaCha20 seeded with
//! `seed_from_u64(seed)`; independent replications select distinct
//! ChaCha stream ids via [`substream`], never a shared generator.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::data::{Dataset, Label, LabeledSample};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::risk::PredictionRule;
use crate::sieve::{DomainBox, DyadicPartitionRule};
use crate::stats;

/// Generator for stream `stream` of base seed `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticDist {
    alpha: f64,
}

impl SyntheticDist {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("margin exponent must be positive and finite, got {alpha}")));
        }
        Ok(SyntheticDist { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// MA1 margin parameter `κ = (1 + α) / α`.
    pub fn kappa(&self) -> f64 {
        (1.0 + self.alpha) / self.alpha
    }

    pub fn support(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    /// Points where `η` or the density is not smooth.
    pub fn kinks(&self) -> [f64; 1] {
        [0.0]
    }

    pub fn density(&self, x: f64) -> f64 {
        if (-1.0..=1.0).contains(&x) {
            0.5
        } else {
            0.0
        }
    }

    pub fn eta(&self, x: f64) -> f64 {
        let x = x.clamp(-1.0, 1.0);
        0.5 * (1.0 + x.signum() * x.abs().powf(1.0 / self.alpha))
    }

    /// `sign(x)` with `sign(0) = +1`, as a depth-one partition of `[-1, 1]`.
    pub fn bayes_rule(&self) -> PredictionRule {
        let rule = DyadicPartitionRule::from_labels(1, DomainBox::interval(-1.0, 1.0), vec![Label::Neg, Label::Pos])
            .expect("depth-one partition is always valid");
        PredictionRule::Dyadic(std::sync::Arc::new(rule))
    }

    pub fn bayes_risk(&self) -> f64 {
        0.5 - self.alpha / (2.0 * (self.alpha + 1.0))
    }

    /// `A* = 2 R*`; `η` has no atom at 1/2.
    pub fn optimal_hinge_risk(&self) -> f64 {
        2.0 * self.bayes_risk()
    }

    /// `P(|2η(X) - 1| <= t)`.
    pub fn margin_cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= 1.0 {
            1.0
        } else {
            t.powf(self.alpha)
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LabeledSample {
        let x = rng.gen_range(-1.0..=1.0);
        let y = if rng.gen::<f64>() < self.eta(x) { Label::Pos } else { Label::Neg };
        LabeledSample { x: vec![x], y }
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        Dataset::new((0..n).map(|_| self.draw(rng)).collect())
    }

    /// `n` i.i.d. draws, fully determined by `seed` (stream 0).
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample_with(&mut substream(seed, 0), n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginDiagnostics {
    pub t_grid: Vec<f64>,
    /// `P(|2η(X) - 1| <= t)` at each grid point.
    pub cdf: Vec<f64>,
    /// Log-log least-squares slope of the CDF against `t`.
    pub fitted_alpha: f64,
    pub kappa: f64,
}

fn check_grid(t_grid: &[f64], upper: f64) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("threshold grid is empty".into()));
    }
    if t_grid.iter().any(|&t| !(t > 0.0 && t <= upper)) {
        return Err(Error::InvalidParameter(format!("thresholds must lie in (0, {upper}]")));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("threshold grid must be increasing".into()));
    }
    Ok(())
}

fn finish_margin(t_grid: &[f64], cdf: Vec<f64>) -> Result<MarginDiagnostics> {
    let fitted_alpha = stats::log_log_fit(t_grid, &cdf)?.slope;
    Ok(MarginDiagnostics {
        t_grid: t_grid.to_vec(),
        cdf,
        fitted_alpha,
        kappa: (1.0 + fitted_alpha) / fitted_alpha,
    })
}

/// Exact margin CDF of `dist` on `t_grid ⊂ (0, 1]`.
pub fn margin_diagnostics(dist: &SyntheticDist, t_grid: &[f64]) -> Result<MarginDiagnostics> {
    check_grid(t_grid, 1.0)?;
    let cdf = t_grid.iter().map(|&t| dist.margin_cdf(t)).collect();
    finish_margin(t_grid, cdf)
}

/// Empirical margin CDF of a sample whose regression function is known.
pub fn empirical_margin_diagnostics<F: Fn(&[f64]) -> f64>(
    data: &Dataset,
    eta: F,
    t_grid: &[f64],
) -> Result<MarginDiagnostics> {
    check_grid(t_grid, 1.0)?;
    let mut margins: Vec<f64> = data.iter().map(|s| (2.0 * eta(&s.x) - 1.0).abs()).collect();
    margins.sort_by(f64::total_cmp);
    let n = margins.len() as f64;
    let cdf = t_grid
        .iter()
        .map(|&t| margins.partition_point(|&m| m <= t) as f64 / n)
        .collect();
    finish_margin(t_grid, cdf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricNoiseDiagnostics {
    pub t_grid: Vec<f64>,
    /// `E[|2η(X) - 1| exp(-τ(X)²/t)]` at each grid point.
    pub values: Vec<f64>,
    /// Log-log slope on the fit window; estimates `γ·d0/2`.
    pub slope: f64,
    pub fitted_gamma: f64,
    /// `max_t value(t) / t^{γ d0 / 2}` over the whole grid.
    pub c1_estimate: f64,
}

/// Dimension of the synthetic feature space.
const D0: f64 = 1.0;

/// `E[|2η(X) - 1| exp(-τ(X)²/t)]` with `τ(x) = |x|` (distance to the
/// decision boundary `{0}`).
pub fn geometric_noise_integral(dist: &SyntheticDist, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("geometric-noise threshold must be positive, got {t}")));
    }
    let inv_alpha = 1.0 / dist.alpha();
    let s = t.sqrt();
    let breaks = quadrature::normalize_breaks(
        -1.0,
        1.0,
        [0.0, s, -s, 4.0 * s, -4.0 * s, 10.0 * s, -10.0 * s],
    );
    quadrature::integrate(
        |x| dist.density(x) * x.abs().powf(inv_alpha) * (-x * x / t).exp(),
        &breaks,
        1e-13,
    )
}

/// Quadrature values on `t_grid` and a slope fit over `t <= fit_max_t`.
pub fn geometric_noise_diagnostics(
    dist: &SyntheticDist,
    t_grid: &[f64],
    fit_max_t: f64,
) -> Result<GeometricNoiseDiagnostics> {
    check_grid(t_grid, f64::INFINITY)?;
    let values = t_grid
        .iter()
        .map(|&t| geometric_noise_integral(dist, t))
        .collect::<Result<Vec<_>>>()?;
    let (ft, fv): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(&values)
        .filter(|(t, _)| **t <= fit_max_t)
        .map(|(t, v)| (*t, *v))
        .unzip();
    let slope = stats::log_log_fit(&ft, &fv)?.slope;
    let c1_estimate = t_grid
        .iter()
        .zip(&values)
        .map(|(t, v)| v / t.powf(slope))
        .fold(0.0, f64::max);
    Ok(GeometricNoiseDiagnostics {
        t_grid: t_grid.to_vec(),
        values,
        slope,
        fitted_gamma: 2.0 * slope / D0,
        c1_estimate,
    })
}
