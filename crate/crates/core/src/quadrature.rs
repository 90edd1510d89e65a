//! Globally adaptive Gauss–Kronrod (7/15) quadrature on piecewise-smooth
//! integrands.
//!
//! The caller supplies the known kinks and jumps as breakpoints. Every
//! breakpoint interval is integrated separately and the interval with the
//! largest error estimate is bisected until the summed estimate drops below
//! the absolute tolerance. Nodes never touch interval endpoints, so an
//! integrand that is constant on each breakpoint interval is never evaluated
//! exactly on a jump.
//!
//! A jump that is not listed can go unnoticed: once it sits between the
//! outermost node and an endpoint of a small subinterval, the Gauss and
//! Kronrod sums agree and the error estimate reads zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Absolute tolerance used for every population-level risk.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Upper bound on the number of live subintervals.
const MAX_INTERVALS: usize = 400_000;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let s = f(centre - dx) + f(centre + dx);
        kronrod += wk * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Integrates `f` over `[breaks[0], breaks[last]]`, treating every
/// consecutive pair of breakpoints as a separate smooth piece.
///
/// `breaks` must be sorted; degenerate pieces are skipped.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    if breaks.len() < 2 {
        return Err(Error::InvalidParameter("quadrature needs at least two breakpoints".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("quadrature tolerance {tol} must be positive")));
    }
    let mut heap = BinaryHeap::with_capacity(breaks.len() * 2);
    let mut settled = 0.0;
    let mut settled_err = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite("quadrature breakpoints"));
        }
        if b < a {
            return Err(Error::InvalidParameter("quadrature breakpoints must be sorted".into()));
        }
        if b > a {
            let seg = gauss_kronrod(&f, a, b);
            if !seg.value.is_finite() {
                return Err(Error::NonFinite("integrand"));
            }
            heap.push(seg);
        }
    }
    let total_err = |heap: &BinaryHeap<Segment>, settled_err: f64| -> f64 {
        heap.iter().map(|s| s.error).sum::<f64>() + settled_err
    };
    let mut err = total_err(&heap, settled_err);
    let mut steps = 0usize;
    while err > tol {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        // Interval too narrow to split further: its error is final.
        if !(mid > worst.a && mid < worst.b) {
            settled += worst.value;
            settled_err += worst.error;
            err = total_err(&heap, settled_err);
            continue;
        }
        let left = gauss_kronrod(&f, worst.a, mid);
        let right = gauss_kronrod(&f, mid, worst.b);
        if !(left.value.is_finite() && right.value.is_finite()) {
            return Err(Error::NonFinite("integrand"));
        }
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        steps += 1;
        // Resum periodically so the running estimate does not drift.
        if steps.is_multiple_of(256) {
            err = total_err(&heap, settled_err);
        }
        if heap.len() > MAX_INTERVALS {
            return Err(Error::Quadrature { tol, estimate: total_err(&heap, settled_err) });
        }
    }
    let err = total_err(&heap, settled_err);
    if err > tol {
        return Err(Error::Quadrature { tol, estimate: err });
    }
    // Sum in interval order so the result does not depend on heap layout.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    Ok(settled + segs.iter().map(|s| s.value).sum::<f64>())
}

/// Sorts, deduplicates and restricts candidate breakpoints to `[lo, hi]`,
/// always including both endpoints.
pub fn normalize_breaks(lo: f64, hi: f64, extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = extra.into_iter().filter(|&x| x > lo && x < hi).collect();
    v.push(lo);
    v.push(hi);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}
