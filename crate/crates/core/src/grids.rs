//! Hyperparameter grids for the adaptive SVM aggregates, and the closed-form
//! parameter choices and rates they track.
//!
//! Both grids use `Δ = l^{b0}` kept as a real number; floors are applied only
//! to the index ranges.

use std::io::Write;

use crate::error::{Error, Result};

/// Default grid density exponent.
pub const DEFAULT_B0: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LambdaEntry {
    pub k: usize,
    pub phi: f64,
    pub lambda: f64,
}

/// `{ λ_k = l^{−φ_k} : φ_k = 1/2 + k/Δ, k = 0..=⌊3Δ/2⌋ }`.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaGrid {
    pub l: usize,
    pub b0: f64,
    pub delta: f64,
    pub entries: Vec<LambdaEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaLambdaEntry {
    pub p1: usize,
    pub p2: usize,
    pub phi: f64,
    pub psi: f64,
    pub sigma: f64,
    pub lambda: f64,
}

/// `{ (l^{φ/d0}, l^{−ψ}) : φ = p1/(2Δ), ψ = p2/Δ + 1/2 }` for
/// `p1 = 1..=2⌊Δ⌋`, `p2 = 1..=⌊Δ/2⌋`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaLambdaGrid {
    pub l: usize,
    pub b0: f64,
    pub d0: usize,
    pub delta: f64,
    pub entries: Vec<SigmaLambdaEntry>,
}

fn check_l_b0(l: usize, b0: f64) -> Result<f64> {
    if l < 2 {
        return Err(Error::InvalidParameter(format!("grid subsample size must be at least 2, got {l}")));
    }
    if !(b0 > 0.0 && b0.is_finite()) {
        return Err(Error::InvalidParameter(format!("b0 must be positive and finite, got {b0}")));
    }
    Ok((l as f64).powf(b0))
}

pub fn lambda_grid(l: usize, b0: f64) -> Result<LambdaGrid> {
    let delta = check_l_b0(l, b0)?;
    let lf = l as f64;
    let kmax = (1.5 * delta).floor() as usize;
    let entries = (0..=kmax)
        .map(|k| {
            let phi = 0.5 + k as f64 / delta;
            LambdaEntry { k, phi, lambda: lf.powf(-phi) }
        })
        .collect();
    Ok(LambdaGrid { l, b0, delta, entries })
}

pub fn sigma_lambda_grid(l: usize, b0: f64, d0: usize) -> Result<SigmaLambdaGrid> {
    let delta = check_l_b0(l, b0)?;
    if d0 == 0 {
        return Err(Error::InvalidParameter("ambient dimension d0 must be at least 1".into()));
    }
    let p1max = 2 * delta.floor() as usize;
    let p2max = (delta / 2.0).floor() as usize;
    if p1max == 0 || p2max == 0 {
        return Err(Error::EmptyGrid(format!(
            "Δ = {delta} gives ⌊Δ/2⌋ = 0; increase b0 or the subsample size"
        )));
    }
    let lf = l as f64;
    let mut entries = Vec::with_capacity(p1max * p2max);
    for p1 in 1..=p1max {
        let phi = p1 as f64 / (2.0 * delta);
        let sigma = lf.powf(phi / d0 as f64);
        for p2 in 1..=p2max {
            let psi = p2 as f64 / delta + 0.5;
            entries.push(SigmaLambdaEntry { p1, p2, phi, psi, sigma, lambda: lf.powf(-psi) });
        }
    }
    Ok(SigmaLambdaGrid { l, b0, d0, delta, entries })
}

impl LambdaGrid {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with header `k,phi,lambda`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "phi", "lambda"])?;
        for e in &self.entries {
            wtr.write_record([e.k.to_string(), e.phi.to_string(), e.lambda.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl SigmaLambdaGrid {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with header `p1,p2,phi,psi,sigma,lambda`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["p1", "p2", "phi", "psi", "sigma", "lambda"])?;
        for e in &self.entries {
            wtr.write_record([
                e.p1.to_string(),
                e.p2.to_string(),
                e.phi.to_string(),
                e.psi.to_string(),
                e.sigma.to_string(),
                e.lambda.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Distribution parameters appearing in the rate formulas. Only `alpha` and
/// `d0` are required; the rest are declared by the user when known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    pub alpha: f64,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub d0: usize,
}

impl TheoryParams {
    /// `κ = (1 + α) / α`.
    pub fn kappa(&self) -> Result<f64> {
        kappa_from_alpha(self.alpha)
    }
}

pub fn kappa_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    Ok((1.0 + alpha) / alpha)
}

fn check_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(n as f64)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Exponent `4(α+1) / ((2α + pα + 4)(1 + β))` of the regularisation choice
/// for a generic kernel.
pub fn lambda_ab_exponent(alpha: f64, beta: f64, p: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {beta}")));
    }
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::InvalidParameter(format!("p must lie in (0, 2), got {p}")));
    }
    Ok(4.0 * (alpha + 1.0) / ((2.0 * alpha + p * alpha + 4.0) * (1.0 + beta)))
}

/// `λ = n^{−4(α+1)/((2α+pα+4)(1+β))}`.
pub fn theory_lambda_ab(n: usize, alpha: f64, beta: f64, p: f64) -> Result<f64> {
    let nf = check_n(n)?;
    Ok(nf.powf(-lambda_ab_exponent(alpha, beta, p)?))
}

/// Branch point `γ = (α + 2) / (2α)` of the Gaussian-kernel formulas.
pub fn gauss_branch_point(alpha: f64) -> f64 {
    (alpha + 2.0) / (2.0 * alpha)
}

/// Exponent of `λ` in the first (low geometric noise) branch.
pub fn gauss_lambda_exponent_low(gamma: f64) -> f64 {
    (gamma + 1.0) / (2.0 * gamma + 1.0)
}

/// Exponent of `λ` in the second (high geometric noise) branch.
pub fn gauss_lambda_exponent_high(alpha: f64, gamma: f64) -> f64 {
    2.0 * (gamma + 1.0) * (alpha + 1.0) / (2.0 * gamma * (alpha + 2.0) + 3.0 * alpha + 4.0)
}

/// `(λ, σ)` for the Gaussian kernel; `σ = λ^{−1/((γ+1) d0)}`.
pub fn theory_lambda_sigma_gauss(n: usize, alpha: f64, gamma: f64, d0: usize) -> Result<(f64, f64)> {
    let nf = check_n(n)?;
    check_positive("alpha", alpha)?;
    check_positive("gamma", gamma)?;
    if d0 == 0 {
        return Err(Error::InvalidParameter("d0 must be at least 1".into()));
    }
    let exp = if gamma <= gauss_branch_point(alpha) {
        gauss_lambda_exponent_low(gamma)
    } else {
        gauss_lambda_exponent_high(alpha, gamma)
    };
    let lambda = nf.powf(-exp);
    let sigma = lambda.powf(-1.0 / ((gamma + 1.0) * d0 as f64));
    Ok((lambda, sigma))
}

/// Rate exponent `κ / (2κ + ρ − 1)` of the sieve aggregate.
pub fn rate_exponent(kappa: f64, rho: f64) -> Result<f64> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be at least 1, got {kappa}")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidParameter(format!("rho must lie in (0, 1), got {rho}")));
    }
    Ok(kappa / (2.0 * kappa + rho - 1.0))
}

/// `n^{−κ/(2κ+ρ−1)}`.
pub fn theory_rate(n: usize, kappa: f64, rho: f64) -> Result<f64> {
    let nf = check_n(n)?;
    Ok(nf.powf(-rate_exponent(kappa, rho)?))
}

/// Rate exponent of the Gaussian-kernel aggregate: `γ/(2γ+1)` when
/// `γ <= (α+2)/(2α)`, else `2γ(α+1) / (2γ(α+2) + 3α + 4)`.
pub fn gauss_rate_exponent(alpha: f64, gamma: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("gamma", gamma)?;
    Ok(if gamma <= gauss_branch_point(alpha) {
        gamma / (2.0 * gamma + 1.0)
    } else {
        2.0 * gamma * (alpha + 1.0) / (2.0 * gamma * (alpha + 2.0) + 3.0 * alpha + 4.0)
    })
}

pub fn theory_rate_gauss(n: usize, alpha: f64, gamma: f64) -> Result<f64> {
    let nf = check_n(n)?;
    Ok(nf.powf(-gauss_rate_exponent(alpha, gamma)?))
}

/// Rate exponent `4β(α+1) / ((2α+pα+4)(1+β))` of the generic-kernel
/// aggregate.
pub fn lambda_ab_rate_exponent(alpha: f64, beta: f64, p: f64) -> Result<f64> {
    Ok(beta * lambda_ab_exponent(alpha, beta, p)?)
}

/// Margin exponent implied by a grid point `(φ, ψ)`.
pub fn implied_alpha(phi: f64, psi: f64) -> f64 {
    (4.0 * psi - 2.0) / (2.0 - 2.0 * psi - phi)
}

/// Geometric-noise exponent implied by a grid point `(φ, ψ)`.
pub fn implied_gamma(phi: f64, psi: f64) -> f64 {
    psi / phi - 1.0
}

/// The `(φ, ψ)` whose implied exponents are `(α, γ)`:
/// `φ = 2(1+α) / (4(1+γ) + α(2γ+3))`, `ψ = (1+γ) φ`.
pub fn grid_target(alpha: f64, gamma: f64) -> Result<(f64, f64)> {
    check_positive("alpha", alpha)?;
    check_positive("gamma", gamma)?;
    let phi = 2.0 * (1.0 + alpha) / (4.0 * (1.0 + gamma) + alpha * (2.0 * gamma + 3.0));
    Ok((phi, (1.0 + gamma) * phi))
}
