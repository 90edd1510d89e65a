//! Dyadic-partition ERM classifiers.
//!
//! At depth `j` the domain box is cut into `2^j` equal slabs along each axis,
//! giving `2^{j·d}` cells. Any labelling of the cells is a classifier; the
//! empirical-risk minimiser over all labellings is the per-cell majority
//! vote. A ladder of depths `0..=J` gives a family of increasingly complex
//! base classifiers for aggregation.
//!
//! These partitions are a concrete choice of nets over classes of sets. No
//! entropy bound is checked for them.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::risk::PredictionRule;

/// Largest supported `depth · dims`, i.e. at most `2^20` cells.
pub const MAX_CELL_BITS: usize = 20;

/// Axis-aligned box that a partition subdivides. Points outside are clamped
/// to the nearest cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.is_empty() {
            return Err(Error::InvalidParameter("domain box needs at least one dimension".into()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("domain box"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(Error::InvalidParameter("domain box must have lo < hi on every axis".into()));
        }
        Ok(DomainBox { lo, hi })
    }

    /// `[0, 1]^d`.
    pub fn unit(d: usize) -> Self {
        DomainBox { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        DomainBox { lo: vec![lo], hi: vec![hi] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicPartitionRule {
    depth: usize,
    domain: DomainBox,
    cell_labels: Vec<Label>,
}

fn check_depth(depth: usize, dims: usize) -> Result<()> {
    if dims == 0 || dims > 2 {
        return Err(Error::InvalidParameter(format!("dyadic partitions support 1 or 2 dimensions, got {dims}")));
    }
    if depth * dims > MAX_CELL_BITS {
        return Err(Error::DepthTooLarge { depth, dims });
    }
    Ok(())
}

impl DyadicPartitionRule {
    pub fn from_labels(depth: usize, domain: DomainBox, cell_labels: Vec<Label>) -> Result<Self> {
        check_depth(depth, domain.dim())?;
        let cells = 1usize << (depth * domain.dim());
        if cell_labels.len() != cells {
            return Err(Error::InvalidParameter(format!(
                "depth {depth} needs {cells} cell labels, got {}",
                cell_labels.len()
            )));
        }
        Ok(DyadicPartitionRule { depth, domain, cell_labels })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dims(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn cell_labels(&self) -> &[Label] {
        &self.cell_labels
    }

    fn slabs(&self) -> usize {
        1usize << self.depth
    }

    /// Linear cell index; axis 0 varies fastest.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let k = self.slabs();
        let mut index = 0;
        let mut stride = 1;
        for (axis, (&lo, &hi)) in self.domain.lo.iter().zip(&self.domain.hi).enumerate() {
            let v = x.get(axis).copied().unwrap_or(lo);
            let pos = (v - lo) / (hi - lo) * k as f64;
            // NaN and negatives clamp to 0 through the float-to-int cast.
            let i = (pos.floor() as usize).min(k - 1);
            index += i * stride;
            stride *= k;
        }
        index
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        self.cell_labels[self.cell_of(x)]
    }

    /// Cell boundaries inside `(lo, hi)` across which the label changes.
    /// Only meaningful for one-dimensional partitions; empty otherwise.
    pub fn breakpoints_1d(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.dims() != 1 {
            return Vec::new();
        }
        let (a, b) = (self.domain.lo[0], self.domain.hi[0]);
        let width = (b - a) / self.slabs() as f64;
        self.cell_labels
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(c, _)| a + (c + 1) as f64 * width)
            .filter(|&x| x > lo && x < hi)
            .collect()
    }

    pub fn into_rule(self) -> PredictionRule {
        PredictionRule::Dyadic(Arc::new(self))
    }

    pub fn to_json(&self) -> RuleJson {
        let mut runs: Vec<(i8, usize)> = Vec::new();
        for &l in &self.cell_labels {
            match runs.last_mut() {
                Some((v, count)) if *v == i8::from(l) => *count += 1,
                _ => runs.push((l.into(), 1)),
            }
        }
        RuleJson { depth: self.depth, dims: self.dims(), domain: self.domain.clone(), cell_labels: runs }
    }

    pub fn from_json(json: &RuleJson) -> Result<Self> {
        if json.dims != json.domain.dim() {
            return Err(Error::DimensionMismatch { expected: json.dims, got: json.domain.dim() });
        }
        let domain = DomainBox::new(json.domain.lo.clone(), json.domain.hi.clone())?;
        check_depth(json.depth, json.dims)?;
        let cells = 1usize << (json.depth * json.dims);
        let total: usize = json.cell_labels.iter().map(|(_, c)| *c).sum();
        if total != cells {
            return Err(Error::InvalidParameter(format!("run lengths cover {total} cells, expected {cells}")));
        }
        let mut labels = Vec::with_capacity(cells);
        for &(v, count) in &json.cell_labels {
            let l = Label::try_from(v)?;
            labels.extend(std::iter::repeat_n(l, count));
        }
        Self::from_labels(json.depth, domain, labels)
    }
}

/// Serialised form: run-length-encoded cell labels as `[label, count]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleJson {
    pub depth: usize,
    pub dims: usize,
    pub domain: DomainBox,
    pub cell_labels: Vec<(i8, usize)>,
}

/// Majority vote per cell; empty cells and ties get `+1`.
pub fn erm_over_partition(data: &Dataset, depth: usize, domain: &DomainBox) -> Result<DyadicPartitionRule> {
    if data.dim() != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: data.dim() });
    }
    check_depth(depth, domain.dim())?;
    let skeleton = DyadicPartitionRule {
        depth,
        domain: domain.clone(),
        cell_labels: Vec::new(),
    };
    let cells = 1usize << (depth * domain.dim());
    let mut votes = vec![0i64; cells];
    for s in data {
        votes[skeleton.cell_of(&s.x)] += i8::from(s.y) as i64;
    }
    let cell_labels = votes.into_iter().map(|v| if v >= 0 { Label::Pos } else { Label::Neg }).collect();
    Ok(DyadicPartitionRule { cell_labels, ..skeleton })
}

/// Default ladder height `⌈log2(m) / d⌉`, enough for the finest partition
/// to separate `m` points on average.
pub fn default_depth(m: usize, d: usize) -> usize {
    if m <= 1 || d == 0 {
        return 0;
    }
    ((m as f64).log2() / d as f64).ceil() as usize
}

/// ERM rules at depths `0..=max_depth`.
#[derive(Clone, Debug)]
pub struct SieveLadder {
    pub rules: Vec<DyadicPartitionRule>,
}

impl SieveLadder {
    pub fn to_rules(&self) -> Vec<PredictionRule> {
        self.rules.iter().cloned().map(DyadicPartitionRule::into_rule).collect()
    }
}

pub fn sieve_ladder(data: &Dataset, max_depth: usize, domain: &DomainBox) -> Result<SieveLadder> {
    check_depth(max_depth, domain.dim())?;
    let rules = (0..=max_depth)
        .into_par_iter()
        .map(|j| erm_over_partition(data, j, domain))
        .collect::<Result<Vec<_>>>()?;
    Ok(SieveLadder { rules })
}
