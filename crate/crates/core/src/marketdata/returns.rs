use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::bars::TradingDay;
use super::realized::{
    realized_quarticity, realized_volatility, volume_realized_quarticity,
    volume_realized_volatility, RvSeries,
};
use crate::error::{Error, Result};
use crate::numeric::{mean, sample_std};

/// Daily close-to-close log returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} dates for {} values",
                dates.len(),
                values.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DateMisalignment(
                "dates must be strictly increasing".into(),
            ));
        }
        Ok(Self { dates, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn through(&self, end: NaiveDate) -> ReturnSeries {
        let n = self.dates.partition_point(|d| *d <= end);
        ReturnSeries {
            dates: self.dates[..n].to_vec(),
            values: self.values[..n].to_vec(),
        }
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.dates.binary_search(&date).ok().map(|i| self.values[i])
    }
}

/// Returns after removing `mu` and dividing by `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedReturns {
    pub values: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

impl StandardizedReturns {
    pub fn unstandardize(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|z| z * self.sigma + self.mu)
            .collect()
    }
}

/// `ln(close_t / close_{t-1})` for every day after the first.
pub fn daily_returns(days: &[TradingDay]) -> Result<ReturnSeries> {
    if days.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: days.len(),
        });
    }
    let closes = days
        .iter()
        .map(|d| {
            d.close()
                .ok_or_else(|| Error::InvalidParameter(format!("day {} has no bars", d.date)))
        })
        .collect::<Result<Vec<f64>>>()?;
    ReturnSeries::new(
        days[1..].iter().map(|d| d.date).collect(),
        closes.windows(2).map(|w| (w[1] / w[0]).ln()).collect(),
    )
}

/// Center and scale by the sample mean and sample (n-1) standard deviation.
pub fn standardize(values: &[f64]) -> Result<StandardizedReturns> {
    if values.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: values.len(),
        });
    }
    let mu = mean(values);
    let sigma = sample_std(values);
    if !(sigma > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(standardize_with(values, mu, sigma))
}

pub fn standardize_with(values: &[f64], mu: f64, sigma: f64) -> StandardizedReturns {
    StandardizedReturns {
        values: values.iter().map(|x| (x - mu) / sigma).collect(),
        mu,
        sigma,
    }
}

/// Date-aligned daily inputs of the pipeline: the close-to-close return of
/// each day together with that day's price and volume realized measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyPanel {
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
    pub rv_price: Vec<f64>,
    pub rq_price: Vec<f64>,
    pub rv_volume: Vec<f64>,
    pub rq_volume: Vec<f64>,
}

impl DailyPanel {
    /// Build the panel from usable days (each with at least two bars). The
    /// first day only serves as the base close and is not part of the panel.
    pub fn from_days(days: &[TradingDay]) -> Result<Self> {
        let returns = daily_returns(days)?;
        let mut panel = DailyPanel {
            dates: returns.dates,
            returns: returns.values,
            rv_price: Vec::with_capacity(days.len()),
            rq_price: Vec::with_capacity(days.len()),
            rv_volume: Vec::with_capacity(days.len()),
            rq_volume: Vec::with_capacity(days.len()),
        };
        for day in &days[1..] {
            panel.rv_price.push(realized_volatility(day)?);
            panel.rq_price.push(realized_quarticity(day)?);
            panel.rv_volume.push(volume_realized_volatility(day)?);
            panel.rq_volume.push(volume_realized_quarticity(day)?);
        }
        Ok(panel)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn return_series(&self) -> ReturnSeries {
        ReturnSeries {
            dates: self.dates.clone(),
            values: self.returns.clone(),
        }
    }

    pub fn price_rv(&self) -> RvSeries {
        RvSeries {
            dates: self.dates.clone(),
            rv: self.rv_price.clone(),
            rq: Some(self.rq_price.clone()),
        }
    }

    pub fn volume_rv(&self) -> RvSeries {
        RvSeries {
            dates: self.dates.clone(),
            rv: self.rv_volume.clone(),
            rq: Some(self.rq_volume.clone()),
        }
    }

    pub fn through(&self, end: NaiveDate) -> DailyPanel {
        let n = self.dates.partition_point(|d| *d <= end);
        DailyPanel {
            dates: self.dates[..n].to_vec(),
            returns: self.returns[..n].to_vec(),
            rv_price: self.rv_price[..n].to_vec(),
            rq_price: self.rq_price[..n].to_vec(),
            rv_volume: self.rv_volume[..n].to_vec(),
            rq_volume: self.rq_volume[..n].to_vec(),
        }
    }
}
