//! Raw observations and the order-statistic helpers shared by every estimator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this length the cascade falls back to a straight loop.
const PAIRWISE_BASE: usize = 16;

/// An ordered batch of i.i.d. observations.
///
/// Every value is finite and the batch is never empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleBatch {
    values: Vec<f64>,
}

impl SampleBatch {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of observations `N`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Applies `x -> scale * x + shift` to every observation.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|&x| scale * x + shift).collect())
    }
}

impl TryFrom<Vec<f64>> for SampleBatch {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SampleBatch> for Vec<f64> {
    fn from(batch: SampleBatch) -> Self {
        batch.values
    }
}

/// Cascade (pairwise) summation.
///
/// The rounding error grows as `O(log n)` rather than `O(n)`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    centered_sum(values, 0.0)
}

fn centered_sum(values: &[f64], anchor: f64) -> f64 {
    if values.len() <= PAIRWISE_BASE {
        return values.iter().map(|&v| v - anchor).sum();
    }
    let (left, right) = values.split_at(values.len() / 2);
    centered_sum(left, anchor) + centered_sum(right, anchor)
}

/// Pairwise-summed arithmetic mean, anchored at the first value so that a
/// constant slice averages to exactly that constant. NaN on an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    let Some(&anchor) = values.first() else {
        return f64::NAN;
    };
    anchor + centered_sum(values, anchor) / values.len() as f64
}

/// Median with the midpoint convention for even lengths.
///
/// The returned value minimizes `z -> sum |v_i - z|`.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut scratch = values.to_vec();
    Ok(median_in_place(&mut scratch))
}

/// Median of a nonempty slice of finite values; reorders the slice.
pub(crate) fn median_in_place(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let len = values.len();
    let mid = len / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        return upper;
    }
    let lower = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    midpoint(lower, upper)
}

fn midpoint(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        0.5 * a + 0.5 * b
    }
}

/// Arithmetic mean of all `N` observations.
pub fn sample_mean(batch: &SampleBatch) -> f64 {
    pairwise_mean(batch.values())
}
