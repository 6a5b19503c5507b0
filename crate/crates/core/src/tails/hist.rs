//! Historical simulation: empirical quantiles of the standardized sample.

use serde::{Deserialize, Serialize};

use super::TailSide;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTail {
    /// Sample in ascending order.
    pub sorted: Vec<f64>,
    pub tail: TailSide,
}

impl EmpiricalTail {
    pub fn new(values: &[f64], tail: TailSide) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewObservations { needed: 1, got: 0 });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("empirical sample".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, tail })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

/// Linear-interpolation (type 7) quantile of an ascending sample.
pub fn type7_quantile(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Signed return-space quantile exceeded with probability `p0` on the tail:
/// the `p0` quantile for the left tail, the `1 - p0` quantile for the right.
pub fn hist_quantile(sample: &EmpiricalTail, p0: f64) -> Result<f64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!("tail probability {p0}")));
    }
    let n = sample.len();
    if (n as f64) * p0 < 1.0 {
        return Err(Error::TooFewObservations {
            needed: (1.0 / p0).ceil() as usize,
            got: n,
        });
    }
    let prob = match sample.tail {
        TailSide::Left => p0,
        TailSide::Right => 1.0 - p0,
    };
    Ok(type7_quantile(&sample.sorted, prob))
}
