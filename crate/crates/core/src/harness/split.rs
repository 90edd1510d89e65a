use crate::data::Dataset;
use crate::error::{Error, Result};

/// Default split constant `a`.
pub const DEFAULT_A: f64 = 1.0;

/// Sizes of the two halves of a sample split: the first `m` observations
/// train the base classifiers and the last `l = ⌈a n / ln n⌉` compute the
/// aggregation weights. `l` is clamped to `[1, ⌊n/2⌋]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitPlan {
    pub n: usize,
    pub a: f64,
    pub l: usize,
    pub m: usize,
}

impl SplitPlan {
    pub fn new(n: usize, a: f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::SampleTooSmall { n, min: 4 });
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidParameter(format!("split constant a must be positive, got {a}")));
        }
        let nf = n as f64;
        let raw = (a * nf / nf.ln()).ceil();
        let l = (raw as usize).clamp(1, n / 2);
        Ok(SplitPlan { n, a, l, m: n - l })
    }
}

/// `(D_m, D_l)` in stored order.
pub fn split(data: &Dataset, a: f64) -> Result<(Dataset, Dataset, SplitPlan)> {
    let plan = SplitPlan::new(data.len(), a)?;
    let (first, second) = data.split_at(plan.m)?;
    Ok((first, second, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Label;

    #[test]
    fn worked_sizes() {
        let p = SplitPlan::new(100, 1.0).unwrap();
        assert_eq!((p.l, p.m), (22, 78));
        let p = SplitPlan::new(4, 1.0).unwrap();
        assert_eq!((p.l, p.m), (2, 2));
        let p = SplitPlan::new(1024, 1.0).unwrap();
        assert_eq!((p.l, p.m), (148, 876));
        assert!(matches!(SplitPlan::new(3, 1.0), Err(Error::SampleTooSmall { .. })));
        assert!(SplitPlan::new(10, 0.0).is_err());
    }

    #[test]
    fn tiny_a_keeps_one_point() {
        let p = SplitPlan::new(1000, 1e-9).unwrap();
        assert_eq!((p.l, p.m), (1, 999));
    }

    #[test]
    fn halves_concatenate_back() {
        let pairs: Vec<(f64, Label)> = (0..37).map(|i| (i as f64 / 37.0, if i % 3 == 0 { Label::Neg } else { Label::Pos })).collect();
        let d = Dataset::from_pairs(&pairs).unwrap();
        let (a, b, plan) = split(&d, 1.0).unwrap();
        assert_eq!(a.len(), plan.m);
        assert_eq!(b.len(), plan.l);
        assert_eq!(a.concat(&b).unwrap(), d);
    }
}
