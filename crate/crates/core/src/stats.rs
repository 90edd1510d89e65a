//! Small descriptive-statistics helpers shared by the diagnostics and the
//! experiment harness.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Ordinary least-squares fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `None` with fewer than three points.
    pub slope_std_error: Option<f64>,
    pub points: usize,
}

impl LinearFit {
    /// Two-sided confidence interval for the slope at `level` (e.g. 0.95),
    /// using the Student-t quantile with `points - 2` degrees of freedom.
    pub fn slope_interval(&self, level: f64) -> Option<(f64, f64)> {
        let se = self.slope_std_error?;
        let df = (self.points - 2) as f64;
        let t = StudentsT::new(0.0, 1.0, df).ok()?.inverse_cdf(0.5 + level / 2.0);
        Some((self.slope - t * se, self.slope + t * se))
    }
}

pub fn ols(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::InvalidParameter("a line fit needs at least two points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression input"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("regressor has zero variance".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_std_error = (n > 2).then(|| {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    });
    Ok(LinearFit { slope, intercept, slope_std_error, points: n })
}

/// Log-log fit of `ys` against `xs`, skipping pairs with a non-positive
/// coordinate.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    ols(&lx, &ly)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}
