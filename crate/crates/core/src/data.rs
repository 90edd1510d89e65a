//! Labelled samples and the CSV dataset format.
//!
//! A dataset file has a header `x1,...,xd,y`, one sample per row, features as
//! finite decimals and the label literally `-1` or `1`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary class label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    /// `+1.0` or `-1.0`.
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    /// Sign of a real score, with `sign(0) = +1`.
    #[inline]
    pub fn from_sign(v: f64) -> Label {
        if v >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }

    #[inline]
    pub fn flip(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }
}

impl From<Label> for i8 {
    fn from(l: Label) -> i8 {
        match l {
            Label::Pos => 1,
            Label::Neg => -1,
        }
    }
}

impl TryFrom<i8> for Label {
    type Error = Error;

    fn try_from(v: i8) -> Result<Label> {
        match v {
            1 => Ok(Label::Pos),
            -1 => Ok(Label::Neg),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Pos => "1",
            Label::Neg => "-1",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Label> {
        match s {
            "1" => Ok(Label::Pos),
            "-1" => Ok(Label::Neg),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

/// One observation `(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: Label,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: Label) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature vector"));
        }
        Ok(LabeledSample { x, y })
    }

    /// Convenience constructor for one-dimensional samples.
    pub fn scalar(x: f64, y: Label) -> Result<Self> {
        Self::new(vec![x], y)
    }
}

/// A nonempty, ordered collection of samples sharing one dimension.
///
/// The stored order is meaningful: sample splitting and the recursive
/// aggregate both index observations by position.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<LabeledSample>) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let dim = first.x.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("samples must have at least one feature".into()));
        }
        for s in &samples {
            if s.x.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.x.len() });
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("feature vector"));
            }
        }
        Ok(Dataset { samples, dim })
    }

    /// Builds a one-dimensional dataset from `(x, y)` pairs.
    pub fn from_pairs(pairs: &[(f64, Label)]) -> Result<Self> {
        let samples = pairs
            .iter()
            .map(|&(x, y)| LabeledSample::scalar(x, y))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; kept for API symmetry with collections.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSample> {
        self.samples.iter()
    }

    /// First `k` samples, `1 <= k <= len`.
    pub fn prefix(&self, k: usize) -> Result<Dataset> {
        if k == 0 {
            return Err(Error::EmptyDataset);
        }
        if k > self.len() {
            return Err(Error::InvalidParameter(format!("prefix {k} longer than dataset {}", self.len())));
        }
        Ok(Dataset { samples: self.samples[..k].to_vec(), dim: self.dim })
    }

    /// Splits into `[0, m)` and `[m, n)`; both parts must be nonempty.
    pub fn split_at(&self, m: usize) -> Result<(Dataset, Dataset)> {
        if m == 0 || m >= self.len() {
            return Err(Error::InvalidParameter(format!("split point {m} outside (0, {})", self.len())));
        }
        let (a, b) = self.samples.split_at(m);
        Ok((
            Dataset { samples: a.to_vec(), dim: self.dim },
            Dataset { samples: b.to_vec(), dim: self.dim },
        ))
    }

    /// Cyclic rotation to the left by `k` positions.
    pub fn rotate_left(&self, k: usize) -> Dataset {
        let mut samples = self.samples.clone();
        let n = samples.len();
        samples.rotate_left(k % n);
        Dataset { samples, dim: self.dim }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Ok(Dataset { samples, dim: self.dim })
    }

    /// Same samples with every label negated.
    pub fn flip_labels(&self) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample { x: s.x.clone(), y: s.y.flip() })
            .collect();
        Dataset { samples, dim: self.dim }
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .quoting(false)
            .trim(csv::Trim::None)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let cols = headers.len();
        if cols < 2 {
            return Err(Error::Parse { record: 0, msg: "header needs at least one feature column and `y`".into() });
        }
        for (i, h) in headers.iter().enumerate() {
            let expected = if i + 1 == cols { "y".to_string() } else { format!("x{}", i + 1) };
            if h != expected {
                return Err(Error::Parse { record: 0, msg: format!("header column {} is `{h}`, expected `{expected}`", i + 1) });
            }
        }
        let mut samples = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let record = idx + 1;
            let mut x = Vec::with_capacity(cols - 1);
            for field in rec.iter().take(cols - 1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse { record, msg: format!("`{field}` is not a number") })?;
                if !v.is_finite() {
                    return Err(Error::Parse { record, msg: format!("non-finite feature `{field}`") });
                }
                x.push(v);
            }
            let y: Label = rec[cols - 1]
                .parse()
                .map_err(|_| Error::Parse { record, msg: format!("label `{}` is not -1 or 1", &rec[cols - 1]) })?;
            samples.push(LabeledSample { x, y });
        }
        Dataset::new(samples)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Never).from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        let mut row = Vec::with_capacity(self.dim + 1);
        for s in &self.samples {
            row.clear();
            row.extend(s.x.iter().map(|v| v.to_string()));
            row.push(s.y.to_string());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Dataset> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.to_csv_writer(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a LabeledSample;
    type IntoIter = std::slice::Iter<'a, LabeledSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}
