//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use aew_core::data::{Label, LabeledSample};
use aew_core::Dataset;
use rand::Rng;

/// `exp(−σ²‖x − z‖²)` written out again, so the oracles do not share the
/// library's kernel code.
pub fn gaussian(x: &[f64], z: &[f64], sigma: f64) -> f64 {
    let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
    (-sigma * sigma * d2).exp()
}

pub fn gram_matrix(data: &Dataset, sigma: f64) -> Vec<Vec<f64>> {
    let s = data.samples();
    s.iter().map(|a| s.iter().map(|b| gaussian(&a.x, &b.x, sigma)).collect()).collect()
}

pub fn labels(data: &Dataset) -> Vec<f64> {
    data.iter().map(|s| s.y.value()).collect()
}

pub fn objective(c: &[f64], k: &[Vec<f64>], y: &[f64]) -> f64 {
    let lin: f64 = c.iter().zip(y).map(|(a, b)| a * b).sum();
    let mut quad = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            quad += c[i] * c[j] * k[i][j];
        }
    }
    2.0 * lin - quad
}

fn bounds(y: f64, u: f64) -> (f64, f64) {
    if y > 0.0 {
        (0.0, u)
    } else {
        (-u, 0.0)
    }
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(r);
            for (x, p) in bottom[0][col..n].iter_mut().zip(&top[col][col..n]) {
                *x -= f * p;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Exact dual optimum by enumerating all `3^n` faces of the box: each
/// coordinate is pinned at its lower bound, its upper bound, or free; free
/// coordinates solve the stationarity system. The best feasible stationary
/// point of any face is the global maximum of the concave objective.
pub fn svm_dual_by_faces(data: &Dataset, sigma: f64, lambda: f64) -> (Vec<f64>, f64) {
    let n = data.len();
    assert!(n <= 10, "face enumeration is exponential");
    let k = gram_matrix(data, sigma);
    let y = labels(data);
    let u = 1.0 / (2.0 * lambda * n as f64);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let faces = 3usize.pow(n as u32);
    for code in 0..faces {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut coeffs = vec![0.0; n];
        let mut free = Vec::new();
        for i in 0..n {
            let (lo, hi) = bounds(y[i], u);
            match state[i] {
                0 => coeffs[i] = lo,
                1 => coeffs[i] = hi,
                _ => free.push(i),
            }
        }
        if !free.is_empty() {
            let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| k[i][j]).collect()).collect();
            let b: Vec<f64> = free
                .iter()
                .map(|&i| y[i] - (0..n).filter(|j| !free.contains(j)).map(|j| k[i][j] * coeffs[j]).sum::<f64>())
                .collect();
            let Some(sol) = solve_linear(a, b) else { continue };
            let mut ok = true;
            for (&i, v) in free.iter().zip(sol) {
                let (lo, hi) = bounds(y[i], u);
                if v < lo - 1e-12 || v > hi + 1e-12 {
                    ok = false;
                    break;
                }
                coeffs[i] = v.clamp(lo, hi);
            }
            if !ok {
                continue;
            }
        }
        let val = objective(&coeffs, &k, &y);
        if best.as_ref().is_none_or(|(_, b)| val > *b) {
            best = Some((coeffs, val));
        }
    }
    best.expect("the zero vector's face is always feasible")
}

/// Literal grid search over the box at step `U/steps`, followed by cyclic
/// coordinate refinement by golden-section search. Only for `n <= 2`.
pub fn svm_dual_by_grid(data: &Dataset, sigma: f64, lambda: f64, steps: usize) -> f64 {
    let n = data.len();
    assert!(n <= 2);
    let k = gram_matrix(data, sigma);
    let y = labels(data);
    let u = 1.0 / (2.0 * lambda * n as f64);
    let pt = |idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .zip(&y)
            .map(|(&t, &yi)| {
                let (lo, _) = bounds(yi, u);
                lo + u * t as f64 / steps as f64
            })
            .collect()
    };
    let mut best = (vec![0.0; n], f64::NEG_INFINITY);
    let mut idx = vec![0usize; n];
    loop {
        let c = pt(&idx);
        let v = objective(&c, &k, &y);
        if v > best.1 {
            best = (c, v);
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] <= steps {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            break;
        }
    }
    let mut c = best.0;
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        for i in 0..n {
            let (mut lo, mut hi) = bounds(y[i], u);
            let f = |v: f64, c: &mut Vec<f64>| {
                c[i] = v;
                objective(c, &k, &y)
            };
            for _ in 0..200 {
                let a = hi - gr * (hi - lo);
                let b = lo + gr * (hi - lo);
                if f(a, &mut c) < f(b, &mut c) {
                    lo = a;
                } else {
                    hi = b;
                }
            }
            c[i] = 0.5 * (lo + hi);
        }
    }
    objective(&c, &k, &y)
}

/// Projected gradient ascent with Nesterov momentum and gradient-based
/// restart, finished by solving the stationarity system on the face it
/// identified. Returns the coefficients, objective value and the final
/// projected-gradient norm (max over coordinates).
pub fn svm_dual_by_projected_gradient(data: &Dataset, sigma: f64, lambda: f64, tol: f64) -> (Vec<f64>, f64, f64) {
    let n = data.len();
    let k = gram_matrix(data, sigma);
    let y = labels(data);
    let u = 1.0 / (2.0 * lambda * n as f64);
    let bx: Vec<(f64, f64)> = y.iter().map(|&v| bounds(v, u)).collect();
    let matvec = |c: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| k[i][j] * c[j]).sum()).collect() };
    // Power iteration for λ_max(K); the objective's Hessian is −2K.
    let mut v = vec![1.0; n];
    let mut top = 1.0;
    for _ in 0..500 {
        let w = matvec(&v);
        top = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / top).collect();
    }
    let lip = 2.0 * top * 1.01;
    let grad = |c: &[f64]| -> Vec<f64> {
        let kc = matvec(c);
        (0..n).map(|i| 2.0 * y[i] - 2.0 * kc[i]).collect()
    };
    let proj = |v: f64, i: usize| v.clamp(bx[i].0, bx[i].1);
    let pg_norm = |c: &[f64]| -> f64 {
        let g = grad(c);
        (0..n)
            .map(|i| {
                let (lo, hi) = bx[i];
                if c[i] <= lo {
                    g[i].max(0.0)
                } else if c[i] >= hi {
                    (-g[i]).max(0.0)
                } else {
                    g[i].abs()
                }
            })
            .fold(0.0, f64::max)
    };
    let mut x = vec![0.0; n];
    let mut z = x.clone();
    let mut t = 1.0f64;
    for it in 0..2_000_000 {
        let g = grad(&z);
        let next: Vec<f64> = (0..n).map(|i| proj(z[i] + g[i] / lip, i)).collect();
        // Restart when the step points against the gradient at z.
        let ascent: f64 = (0..n).map(|i| g[i] * (next[i] - x[i])).sum();
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if ascent < 0.0 {
            z = x.clone();
            t = 1.0;
            continue;
        }
        z = (0..n).map(|i| next[i] + (t - 1.0) / tn * (next[i] - x[i])).collect();
        x = next;
        t = tn;
        if it % 256 == 0 && pg_norm(&x) < tol {
            break;
        }
    }
    // Polish: solve for the free coordinates of the identified face.
    let free: Vec<usize> = (0..n).filter(|&i| x[i] > bx[i].0 && x[i] < bx[i].1).collect();
    if !free.is_empty() {
        let a: Vec<Vec<f64>> = free.iter().map(|&i| free.iter().map(|&j| k[i][j]).collect()).collect();
        let b: Vec<f64> = free
            .iter()
            .map(|&i| y[i] - (0..n).filter(|j| !free.contains(j)).map(|j| k[i][j] * x[j]).sum::<f64>())
            .collect();
        if let Some(sol) = solve_linear(a, b) {
            let mut cand = x.clone();
            for (&i, v) in free.iter().zip(sol) {
                cand[i] = v;
            }
            let feasible = (0..n).all(|i| cand[i] >= bx[i].0 && cand[i] <= bx[i].1);
            if feasible && pg_norm(&cand) < pg_norm(&x) {
                x = cand;
            }
        }
    }
    let r = pg_norm(&x);
    (x.clone(), objective(&x, &k, &y), r)
}

pub fn random_dataset<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Dataset {
    let samples = (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = if rng.gen_bool(0.5) { Label::Pos } else { Label::Neg };
            LabeledSample::new(x, y).unwrap()
        })
        .collect();
    Dataset::new(samples).unwrap()
}

/// `∫_{-1}^{x} η(s)/2 ds` for `η(s) = (1 + sign(s)|s|^{1/α})/2`, in closed
/// form.
pub fn eta_antiderivative(alpha: f64, x: f64) -> f64 {
    let p = 1.0 / alpha + 1.0;
    let tail = |s: f64| s.abs().powf(p) / p; // ∫_0^{|s|} t^{1/α} dt
    // ∫_{-1}^{x} sign(s)|s|^{1/α} ds = tail(x) − tail(1) on both sides of 0.
    0.25 * ((x + 1.0) + tail(x) - tail(1.0))
}

/// Root of `f` on `[lo, hi]` by bisection, given a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(φ, ψ)` with `ψ = (1+γ)φ` and implied margin exponent `α`, found by
/// bisection on `φ` of `(4ψ − 2) − α(2 − 2ψ − φ) = 0`.
pub fn grid_target_by_bisection(alpha: f64, gamma: f64) -> (f64, f64) {
    let g = |phi: f64| {
        let psi = (1.0 + gamma) * phi;
        (4.0 * psi - 2.0) - alpha * (2.0 - 2.0 * psi - phi)
    };
    let phi = bisect(g, 0.0, 1.0);
    (phi, (1.0 + gamma) * phi)
}
