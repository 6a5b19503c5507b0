use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::arfima::{arfima_fit, arfima_forecast, ArfimaParams};
use super::har::{har_fit, har_forecast, HarCoefficients, HarVariant};
use super::train::{make_samples, train_lstm, LstmModel, TrainConfig};
use super::{VolModel, VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::marketdata::RvSeries;

/// Chronological train / validation / test boundaries (inclusive ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_end: NaiveDate,
    pub val_end: NaiveDate,
    pub test_end: NaiveDate,
}

/// Index ranges of the three segments within a date vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitIndices {
    pub train_end: usize,
    pub val_end: usize,
    pub test_end: usize,
}

impl Split {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_end < self.val_end && self.val_end < self.test_end) {
            return Err(Error::InvalidSplit(format!(
                "need train_end < val_end < test_end, got {} / {} / {}",
                self.train_end, self.val_end, self.test_end
            )));
        }
        Ok(())
    }

    /// Exclusive end indices of each segment; every segment must be non-empty.
    pub fn indices(&self, dates: &[NaiveDate]) -> Result<SplitIndices> {
        self.validate()?;
        let idx = SplitIndices {
            train_end: dates.partition_point(|d| *d <= self.train_end),
            val_end: dates.partition_point(|d| *d <= self.val_end),
            test_end: dates.partition_point(|d| *d <= self.test_end),
        };
        if idx.train_end == 0 {
            return Err(Error::InvalidSplit("training segment is empty".into()));
        }
        if idx.val_end == idx.train_end {
            return Err(Error::InvalidSplit("validation segment is empty".into()));
        }
        if idx.test_end == idx.val_end {
            return Err(Error::InvalidSplit("test segment is empty".into()));
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Econometric models are refit every this many test days.
    pub refit_cadence: usize,
    pub lstm: TrainConfig,
    pub arfima_max_p: usize,
    pub arfima_max_q: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            refit_cadence: 22,
            lstm: TrainConfig::default(),
            arfima_max_p: 1,
            arfima_max_q: 1,
        }
    }
}

/// Inputs of one volatility model: the series being forecast and, for the
/// joint model, a companion series used as a second input channel.
#[derive(Debug, Clone, Copy)]
pub struct VolInputs<'a> {
    pub target: &'a RvSeries,
    pub companion: Option<&'a RvSeries>,
}

/// One-step-ahead forecasts over the test segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub model: VolModel,
    pub dates: Vec<NaiveDate>,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
}

/// A fitted model in its persisted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Lstm {
        model: VolModel,
        lstm: LstmModel,
    },
    Har {
        model: VolModel,
        coefficients: HarCoefficients,
    },
    Arfima {
        model: VolModel,
        params: ArfimaParams,
    },
}

impl FittedModel {
    pub fn model(&self) -> VolModel {
        match self {
            FittedModel::Lstm { model, .. }
            | FittedModel::Har { model, .. }
            | FittedModel::Arfima { model, .. } => *model,
        }
    }

    /// Forecast of the value following `upto` observations of the inputs.
    pub fn forecast(&self, inputs: VolInputs<'_>, upto: usize) -> Result<f64> {
        match self {
            FittedModel::Lstm { model, lstm } => {
                let lag = lstm.config.lag_p;
                if upto < lag {
                    return Err(Error::TooFewObservations {
                        needed: lag,
                        got: upto,
                    });
                }
                let channels = lstm_channels(*model, inputs)?;
                let window: Vec<Vec<f64>> = (upto - lag..upto)
                    .map(|s| channels.iter().map(|c| c[s]).collect())
                    .collect();
                Ok(lstm.predict(&window)?.exp().max(VARIANCE_FLOOR))
            }
            FittedModel::Har { coefficients, .. } => {
                let rq = inputs.target.rq.as_deref().map(|q| &q[..upto]);
                har_forecast(coefficients, &inputs.target.rv[..upto], rq)
            }
            FittedModel::Arfima { params, .. } => {
                let logs = log_rv(&inputs.target.rv[..upto]);
                Ok(arfima_forecast(params, &logs)?.exp().max(VARIANCE_FLOOR))
            }
        }
    }
}

pub fn log_rv(rv: &[f64]) -> Vec<f64> {
    rv.iter().map(|v| v.max(VARIANCE_FLOOR).ln()).collect()
}

fn lstm_channels(model: VolModel, inputs: VolInputs<'_>) -> Result<Vec<Vec<f64>>> {
    let mut channels = vec![log_rv(&inputs.target.rv)];
    if model == VolModel::LstmRv {
        let companion = inputs.companion.ok_or_else(|| {
            Error::InvalidParameter("LSTM-RV needs the companion (volume) series".into())
        })?;
        if companion.dates != inputs.target.dates {
            return Err(Error::DateMisalignment(
                "companion series dates differ from target".into(),
            ));
        }
        channels.push(log_rv(&companion.rv));
    }
    Ok(channels)
}

/// Fit `model` on the first `upto` observations.
pub fn fit_model(
    model: VolModel,
    inputs: VolInputs<'_>,
    upto: usize,
    config: &ForecastConfig,
) -> Result<FittedModel> {
    let rv = &inputs.target.rv[..upto];
    let rq = inputs.target.rq.as_deref().map(|q| &q[..upto]);
    match model {
        VolModel::LstmRv | VolModel::Lstm => {
            let channels = lstm_channels(model, inputs)?;
            let truncated: Vec<&[f64]> = channels.iter().map(|c| &c[..upto]).collect();
            let samples = make_samples(&truncated, truncated[0], config.lstm.lag_p);
            let (lstm, log) = train_lstm(&samples, &config.lstm)?;
            log::debug!(
                "{model}: best epoch {} of {}, validation loss {:.6}",
                log.best_epoch,
                log.epochs.len(),
                log.best_val_loss
            );
            Ok(FittedModel::Lstm { model, lstm })
        }
        VolModel::Har | VolModel::Harq | VolModel::Harqf => {
            let variant = match model {
                VolModel::Har => HarVariant::Har,
                VolModel::Harq => HarVariant::Harq,
                _ => HarVariant::Harqf,
            };
            Ok(FittedModel::Har {
                model,
                coefficients: har_fit(rv, rq, variant)?,
            })
        }
        VolModel::Arfima => Ok(FittedModel::Arfima {
            model,
            params: arfima_fit(&log_rv(rv), config.arfima_max_p, config.arfima_max_q)?,
        }),
    }
}

/// One forecast per test day, each using only observations strictly before
/// it. Econometric models are refit on an expanding window every
/// `refit_cadence` test days; the LSTM is trained once on train+validation
/// (or `pretrained` is used) and then rolled forward on observed lags.
pub fn rolling_forecast(
    model: VolModel,
    inputs: VolInputs<'_>,
    split: &Split,
    config: &ForecastConfig,
    pretrained: Option<&FittedModel>,
) -> Result<ForecastSeries> {
    if config.refit_cadence == 0 {
        return Err(Error::Config("refit_cadence must be positive".into()));
    }
    let idx = split.indices(&inputs.target.dates)?;
    let mut fitted: Option<FittedModel> = match pretrained {
        Some(f) if f.model() == model => Some(f.clone()),
        Some(f) => {
            return Err(Error::InvalidParameter(format!(
                "pretrained {} supplied for {model}",
                f.model()
            )))
        }
        None => None,
    };

    let mut out = ForecastSeries {
        model,
        dates: Vec::with_capacity(idx.test_end - idx.val_end),
        forecast: Vec::with_capacity(idx.test_end - idx.val_end),
        actual: Vec::with_capacity(idx.test_end - idx.val_end),
    };
    for (j, target) in (idx.val_end..idx.test_end).enumerate() {
        let refit = match model {
            VolModel::Lstm | VolModel::LstmRv => fitted.is_none(),
            _ => j % config.refit_cadence == 0 && !(j == 0 && fitted.is_some()),
        };
        if refit {
            // the LSTM only ever sees train+validation
            let upto = if model.is_lstm() { idx.val_end } else { target };
            fitted = Some(fit_model(model, inputs, upto, config)?);
        }
        let f = fitted.as_ref().expect("fitted before first forecast");
        out.dates.push(inputs.target.dates[target]);
        out.forecast.push(f.forecast(inputs, target)?);
        out.actual.push(inputs.target.rv[target]);
    }
    Ok(out)
}
