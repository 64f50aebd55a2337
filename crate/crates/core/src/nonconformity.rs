//! Non-conformity scores for classification.

use crate::data::ProbabilityRecord;
use crate::error::{Error, Result};

/// Closed interval `[lower, upper]` containing every score a measure can emit.
///
/// Hoeffding's bound depends on the width `upper - lower`, so each measure
/// states its bounds explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBounds {
    lower: f64,
    upper: f64,
}

impl ScoreBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::invalid(format!(
                "score bounds [{lower}, {upper}] must be finite with lower < upper"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[0, 1]`, the range of `1 - p`.
    pub const fn unit() -> Self {
        Self {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, score: f64) -> bool {
        (self.lower..=self.upper).contains(&score)
    }

    /// Errors on the first score outside the bounds.
    pub fn check_all(&self, scores: &[f64]) -> Result<()> {
        match scores.iter().position(|s| !self.contains(*s)) {
            Some(index) => Err(Error::ScoreOutOfBounds {
                index,
                score: scores[index],
                lower: self.lower,
                upper: self.upper,
            }),
            None => Ok(()),
        }
    }
}

/// A label-wise strangeness score computed from a probability vector.
pub trait NonconformityMeasure: Send + Sync {
    fn bounds(&self) -> ScoreBounds;

    /// Score of candidate label `label` for an instance with class probabilities `probs`.
    fn score(&self, probs: &[f64], label: usize) -> f64;

    fn score_all(&self, probs: &[f64]) -> Vec<f64> {
        (0..probs.len()).map(|k| self.score(probs, k)).collect()
    }

    fn score_record(&self, record: &ProbabilityRecord) -> f64 {
        self.score(record.probs(), record.label())
    }
}

/// `L(x, y) = 1 - p(y | x)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OneMinusProbability;

impl NonconformityMeasure for OneMinusProbability {
    fn bounds(&self) -> ScoreBounds {
        ScoreBounds::unit()
    }

    #[inline]
    fn score(&self, probs: &[f64], label: usize) -> f64 {
        1.0 - probs[label]
    }
}

/// Score of the record's true label under `1 - p`.
pub fn score_true(record: &ProbabilityRecord) -> f64 {
    OneMinusProbability.score_record(record)
}

/// Scores of every candidate label under `1 - p`.
pub fn score_all_labels(probs: &[f64]) -> Vec<f64> {
    OneMinusProbability.score_all(probs)
}

/// Arithmetic mean using Neumaier-compensated summation.
pub fn empirical_mean(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    Ok(compensated_sum(scores) / scores.len() as f64)
}

pub(crate) fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}
