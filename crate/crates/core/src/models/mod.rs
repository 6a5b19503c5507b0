//! Volatility forecasting models: a from-scratch LSTM and the HAR family and
//! ARFIMA baselines, plus the rolling out-of-sample driver.

pub mod arfima;
pub mod har;
pub mod lstm;
pub mod rolling;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arfima::{arfima_fit, arfima_forecast, frac_diff, frac_diff_weights, ArfimaParams};
pub use har::{har_fit, har_forecast, HarCoefficients, HarVariant};
pub use lstm::{lstm_cell, lstm_forward, lstm_gradients, Gate, LstmParams, LstmState, Matrix};
pub use rolling::{
    fit_model, log_rv, rolling_forecast, FittedModel, ForecastConfig, ForecastSeries, Split,
    VolInputs,
};
pub use train::{make_samples, train_lstm, LstmModel, Sample, TrainConfig, TrainingLog};

/// Lower bound applied to every variance forecast.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VolModel {
    #[serde(rename = "LSTM-RV")]
    LstmRv,
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "HAR")]
    Har,
    #[serde(rename = "HARQ")]
    Harq,
    #[serde(rename = "HARQF")]
    Harqf,
    #[serde(rename = "ARFIMA")]
    Arfima,
}

impl VolModel {
    pub const ALL: [VolModel; 6] = [
        VolModel::LstmRv,
        VolModel::Lstm,
        VolModel::Har,
        VolModel::Harq,
        VolModel::Harqf,
        VolModel::Arfima,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VolModel::LstmRv => "LSTM-RV",
            VolModel::Lstm => "LSTM",
            VolModel::Har => "HAR",
            VolModel::Harq => "HARQ",
            VolModel::Harqf => "HARQF",
            VolModel::Arfima => "ARFIMA",
        }
    }

    pub fn is_lstm(self) -> bool {
        matches!(self, VolModel::Lstm | VolModel::LstmRv)
    }
}

impl fmt::Display for VolModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VolModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VolModel::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown volatility model `{s}`")))
    }
}

/// Serialize a fitted model to the plain-text JSON save format.
pub fn save_model(model: &FittedModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn load_model(text: &str) -> Result<FittedModel> {
    Ok(serde_json::from_str(text)?)
}
