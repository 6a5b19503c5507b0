use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::bars::TradingDay;
use crate::error::{Error, Result};
use crate::numeric::exact_sum;

/// Dated realized variance, with realized quarticity when it was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RvSeries {
    pub dates: Vec<NaiveDate>,
    pub rv: Vec<f64>,
    pub rq: Option<Vec<f64>>,
}

impl RvSeries {
    pub fn len(&self) -> usize {
        self.rv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rv.is_empty()
    }

    /// Restrict to observations dated on or before `end`.
    pub fn through(&self, end: NaiveDate) -> RvSeries {
        let n = self.dates.partition_point(|d| *d <= end);
        RvSeries {
            dates: self.dates[..n].to_vec(),
            rv: self.rv[..n].to_vec(),
            rq: self.rq.as_ref().map(|q| q[..n].to_vec()),
        }
    }
}

fn log_changes(levels: &[f64]) -> Result<Vec<f64>> {
    if levels.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: levels.len(),
        });
    }
    Ok(levels.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// `ln(p_{i+1} / p_i)` for consecutive bars.
pub fn intraday_log_returns(day: &TradingDay) -> Result<Vec<f64>> {
    let prices: Vec<f64> = day.prices().collect();
    log_changes(&prices)
}

/// Sum of squared intraday log returns, accumulated without rounding loss.
pub fn realized_volatility(day: &TradingDay) -> Result<f64> {
    let returns = intraday_log_returns(day)?;
    Ok(sum_of_squares(&returns))
}

/// `(N/3) * sum r_i^4` over the N intraday log returns.
pub fn realized_quarticity(day: &TradingDay) -> Result<f64> {
    Ok(quarticity(&intraday_log_returns(day)?))
}

/// Realized variance of the intraday volume path, on `ln(1 + volume)` so that
/// bars with zero volume stay finite.
pub fn volume_realized_volatility(day: &TradingDay) -> Result<f64> {
    let levels: Vec<f64> = day.bars.iter().map(|b| 1.0 + b.volume).collect();
    Ok(sum_of_squares(&log_changes(&levels)?))
}

/// Realized quarticity of the `ln(1 + volume)` path.
pub fn volume_realized_quarticity(day: &TradingDay) -> Result<f64> {
    let levels: Vec<f64> = day.bars.iter().map(|b| 1.0 + b.volume).collect();
    Ok(quarticity(&log_changes(&levels)?))
}

fn quarticity(returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    n / 3.0 * exact_sum(returns.iter().map(|r| r.powi(4)))
}

fn sum_of_squares(xs: &[f64]) -> f64 {
    exact_sum(xs.iter().map(|r| r * r))
}
