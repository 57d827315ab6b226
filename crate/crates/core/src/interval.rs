//! Interval targets and the dataset containers built on them.
//!
//! An [`IntervalDataset`] keeps the true targets (when known) in a separate
//! column that is only reachable through [`IntervalDataset::hidden_targets`].
//! Training code consumes data through the [`Supervision`] trait, which for
//! interval data only ever yields the interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed real interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct Interval {
    lower: f64,
    upper: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    lower: f64,
    upper: f64,
}

impl TryFrom<RawInterval> for Interval {
    type Error = Error;
    fn try_from(raw: RawInterval) -> Result<Self> {
        Interval::new(raw.lower, raw.upper)
    }
}

impl From<Interval> for RawInterval {
    fn from(i: Interval) -> Self {
        RawInterval {
            lower: i.lower,
            upper: i.upper,
        }
    }
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() || lower > upper {
            return Err(Error::InvalidRange {
                lo: lower,
                hi: upper,
            });
        }
        Ok(Interval { lower, upper })
    }

    /// The degenerate interval `[y, y]` of a fully supervised label.
    pub fn point(y: f64) -> Result<Self> {
        Interval::new(y, y)
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// `upper - lower`.
    #[inline]
    pub fn size(&self) -> f64 {
        self.upper - self.lower
    }

    #[inline]
    pub fn midpoint(&self) -> f64 {
        (self.lower + self.upper) / 2.0
    }

    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    /// Clip both endpoints into `[lo, hi]`.
    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Self> {
        Interval::new(self.lower.clamp(lo, hi), self.upper.clamp(lo, hi))
    }
}

/// What a training loss gets to see about one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakLabel {
    Exact(f64),
    Interval(Interval),
}

/// Read access for training and risk evaluation.
pub trait Supervision: Sync {
    fn dimension(&self) -> usize;
    fn len(&self) -> usize;
    fn features(&self, index: usize) -> &[f64];
    fn label(&self, index: usize) -> WeakLabel;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalExample {
    pub features: Vec<f64>,
    pub interval: Interval,
}

fn check_range(range: (f64, f64)) -> Result<()> {
    if !(range.0 <= range.1) {
        return Err(Error::InvalidRange {
            lo: range.0,
            hi: range.1,
        });
    }
    Ok(())
}

fn observed_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    values.fold(None, |acc, y| match acc {
        None => Some((y, y)),
        Some((lo, hi)) => Some((lo.min(y), hi.max(y))),
    })
}

/// Fully labeled data.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dimension: usize,
    rows: Vec<LabeledExample>,
    label_range: Option<(f64, f64)>,
}

impl LabeledDataset {
    /// Builds a dataset; the label range defaults to the observed target span.
    pub fn new(dimension: usize, rows: Vec<LabeledExample>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        for row in &rows {
            if row.features.len() != dimension {
                return Err(Error::shape(dimension, row.features.len()));
            }
            if !row.target.is_finite() {
                return Err(Error::InvalidLabel(format!("non-finite target {}", row.target)));
            }
        }
        let label_range = observed_range(rows.iter().map(|r| r.target));
        Ok(LabeledDataset {
            dimension,
            rows,
            label_range,
        })
    }

    /// Overrides the label range; it must bound every target.
    pub fn with_label_range(mut self, y_min: f64, y_max: f64) -> Result<Self> {
        check_range((y_min, y_max))?;
        if let Some(bad) = self.rows.iter().find(|r| r.target < y_min || r.target > y_max) {
            return Err(Error::InvalidLabel(format!(
                "target {} outside label range [{y_min}, {y_max}]",
                bad.target
            )));
        }
        self.label_range = Some((y_min, y_max));
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> &[LabeledExample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_range(&self) -> Option<(f64, f64)> {
        self.label_range
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    /// Rows at `indices`, in that order. The label range is inherited.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            dimension: self.dimension,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            label_range: self.label_range,
        }
    }

    /// Applies `f` to every feature row (used for standardization).
    pub fn map_features(&self, mut f: impl FnMut(&mut [f64])) -> LabeledDataset {
        let mut out = self.clone();
        for row in &mut out.rows {
            f(&mut row.features);
        }
        out
    }
}

impl Supervision for LabeledDataset {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn features(&self, index: usize) -> &[f64] {
        &self.rows[index].features
    }
    fn label(&self, index: usize) -> WeakLabel {
        WeakLabel::Exact(self.rows[index].target)
    }
}

/// Interval-labeled data with an optional, separately stored column of true
/// targets used only for evaluating the generator and trained models.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalDataset {
    dimension: usize,
    rows: Vec<IntervalExample>,
    hidden_targets: Option<Vec<f64>>,
    label_range: Option<(f64, f64)>,
}

impl IntervalDataset {
    pub fn new(
        dimension: usize,
        rows: Vec<IntervalExample>,
        hidden_targets: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::config("feature dimension must be positive"));
        }
        for row in &rows {
            if row.features.len() != dimension {
                return Err(Error::shape(dimension, row.features.len()));
            }
        }
        if let Some(hidden) = &hidden_targets {
            if hidden.len() != rows.len() {
                return Err(Error::shape(rows.len(), hidden.len()));
            }
            for (i, (row, &y)) in rows.iter().zip(hidden).enumerate() {
                if !row.interval.contains(y) {
                    return Err(Error::InvalidLabel(format!(
                        "row {i}: hidden target {y} outside [{}, {}]",
                        row.interval.lower(),
                        row.interval.upper()
                    )));
                }
            }
        }
        Ok(IntervalDataset {
            dimension,
            rows,
            hidden_targets,
            label_range: None,
        })
    }

    pub fn with_label_range(mut self, range: Option<(f64, f64)>) -> Result<Self> {
        if let Some(r) = range {
            check_range(r)?;
        }
        self.label_range = range;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rows(&self) -> &[IntervalExample] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_range(&self) -> Option<(f64, f64)> {
        self.label_range
    }

    /// True targets, for evaluation only.
    pub fn hidden_targets(&self) -> Option<&[f64]> {
        self.hidden_targets.as_deref()
    }

    /// Rebuilds the fully labeled view from the hidden column.
    pub fn to_labeled(&self) -> Option<LabeledDataset> {
        let hidden = self.hidden_targets.as_ref()?;
        let rows = self
            .rows
            .iter()
            .zip(hidden)
            .map(|(r, &y)| LabeledExample {
                features: r.features.clone(),
                target: y,
            })
            .collect();
        LabeledDataset::new(self.dimension, rows).ok()
    }

    pub fn subset(&self, indices: &[usize]) -> IntervalDataset {
        IntervalDataset {
            dimension: self.dimension,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            hidden_targets: self
                .hidden_targets
                .as_ref()
                .map(|h| indices.iter().map(|&i| h[i]).collect()),
            label_range: self.label_range,
        }
    }
}

impl Supervision for IntervalDataset {
    fn dimension(&self) -> usize {
        self.dimension
    }
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn features(&self, index: usize) -> &[f64] {
        &self.rows[index].features
    }
    fn label(&self, index: usize) -> WeakLabel {
        WeakLabel::Interval(self.rows[index].interval)
    }
}
