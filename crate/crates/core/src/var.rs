//! One-day-ahead Value-at-Risk: a static tail quantile of standardized
//! returns scaled by the dynamic volatility forecast.

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{standardize, ReturnSeries, RvSeries};
use crate::models::{
    rolling_forecast, FittedModel, ForecastConfig, ForecastSeries, Split, VolInputs, VolModel,
};
use crate::numeric::format_sig;
use crate::tails::{fit_tail, tail_quantile, QuantileMethod, TailFit, TailSide};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Long,
    Short,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Long, Side::Short];

    /// Long positions lose in the left tail, short positions in the right.
    pub fn tail(self) -> TailSide {
        match self {
            Side::Long => TailSide::Left,
            Side::Short => TailSide::Right,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Long => "long",
            Side::Short => "short",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which realized variance series drives the volatility leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Price,
    Volume,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub volatility_model: VolModel,
    pub quantile_method: QuantileMethod,
    pub p0: f64,
    pub source: Source,
}

impl ModelSpec {
    pub fn new(
        volatility_model: VolModel,
        quantile_method: QuantileMethod,
        p0: f64,
        source: Source,
    ) -> Result<Self> {
        validate_p0(p0)?;
        Ok(Self {
            volatility_model,
            quantile_method,
            p0,
            source,
        })
    }

    /// Every volatility model crossed with every quantile method.
    pub fn grid(p0: f64, source: Source) -> Result<Vec<ModelSpec>> {
        validate_p0(p0)?;
        Ok(VolModel::ALL
            .iter()
            .flat_map(|&m| {
                QuantileMethod::ALL.iter().map(move |&q| ModelSpec {
                    volatility_model: m,
                    quantile_method: q,
                    p0,
                    source,
                })
            })
            .collect())
    }

    /// Volatility model name as reported; volume-driven models carry a `(V)`
    /// suffix.
    pub fn model_label(&self) -> String {
        match self.source {
            Source::Price => self.volatility_model.name().to_string(),
            Source::Volume => format!("{}(V)", self.volatility_model.name()),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.model_label(), self.quantile_method)
    }
}

pub fn validate_p0(p0: f64) -> Result<()> {
    if !(p0 > 0.0 && p0 <= 0.1) {
        return Err(Error::Config(format!("p0 must lie in (0, 0.1], got {p0}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarForecast {
    pub date: NaiveDate,
    pub var_long: f64,
    pub var_short: f64,
    pub rv_forecast: f64,
    pub quantile_long: f64,
    pub quantile_short: f64,
}

impl VarForecast {
    pub fn var(&self, side: Side) -> f64 {
        match side {
            Side::Long => self.var_long,
            Side::Short => self.var_short,
        }
    }
}

/// `|q| * sqrt(rv_forecast)`, a positive loss magnitude in return units.
pub fn var_from_forecast(rv_forecast: f64, q: f64) -> Result<f64> {
    if !(rv_forecast > 0.0) {
        return Err(Error::NonPositiveVariance(rv_forecast));
    }
    if !q.is_finite() {
        return Err(Error::NonFinite("tail quantile".into()));
    }
    Ok(q.abs() * rv_forecast.sqrt())
}

/// Left- and right-tail quantiles of the standardized in-sample returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailQuantiles {
    pub method: QuantileMethod,
    pub p0: f64,
    pub long: f64,
    pub short: f64,
    pub long_fit: TailFit,
    pub short_fit: TailFit,
}

pub fn tail_quantiles(
    method: QuantileMethod,
    standardized: &[f64],
    p0: f64,
) -> Result<TailQuantiles> {
    let long_fit = fit_tail(method, standardized, TailSide::Left)?;
    let short_fit = fit_tail(method, standardized, TailSide::Right)?;
    Ok(TailQuantiles {
        method,
        p0,
        long: tail_quantile(&long_fit, p0, standardized)?,
        short: tail_quantile(&short_fit, p0, standardized)?,
        long_fit,
        short_fit,
    })
}

/// Standardized returns dated on or before `end`, using the moments of that
/// same window.
pub fn in_sample_standardized(returns: &ReturnSeries, end: NaiveDate) -> Result<Vec<f64>> {
    Ok(standardize(&returns.through(end).values)?.values)
}

/// Combine a volatility forecast series with fixed tail quantiles.
pub fn var_series(
    forecast: &ForecastSeries,
    quantiles: &TailQuantiles,
) -> Result<Vec<VarForecast>> {
    forecast
        .dates
        .iter()
        .zip(&forecast.forecast)
        .map(|(&date, &rv)| {
            Ok(VarForecast {
                date,
                var_long: var_from_forecast(rv, quantiles.long)?,
                var_short: var_from_forecast(rv, quantiles.short)?,
                rv_forecast: rv,
                quantile_long: quantiles.long,
                quantile_short: quantiles.short,
            })
        })
        .collect()
}

/// Everything the grid needs, already aligned on the same dates.
#[derive(Debug, Clone, Copy)]
pub struct GridData<'a> {
    pub returns: &'a ReturnSeries,
    pub price_rv: &'a RvSeries,
    pub volume_rv: &'a RvSeries,
}

impl GridData<'_> {
    /// Target and companion series for a volatility model on a source.
    pub fn inputs(&self, source: Source) -> VolInputs<'_> {
        match source {
            Source::Price => VolInputs {
                target: self.price_rv,
                companion: Some(self.volume_rv),
            },
            Source::Volume => VolInputs {
                target: self.volume_rv,
                companion: Some(self.price_rv),
            },
        }
    }

    fn check_alignment(&self) -> Result<()> {
        if self.returns.dates != self.price_rv.dates || self.returns.dates != self.volume_rv.dates {
            return Err(Error::DateMisalignment(
                "returns and realized variance series cover different dates".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarSeries {
    pub spec: ModelSpec,
    pub forecasts: Vec<VarForecast>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutput {
    /// One rolling forecast per distinct (volatility model, source).
    pub volatility: Vec<(Source, ForecastSeries)>,
    pub quantiles: Vec<TailQuantiles>,
    /// In the order the specs were given.
    pub var: Vec<VarSeries>,
}

/// Evaluate every spec over the test segment. Distinct volatility forecasts
/// and tail fits are each computed once and shared; tails use only returns
/// up to the end of validation. `pretrained` models are reused when they
/// match a spec's volatility model and source.
pub fn run_grid(
    data: GridData<'_>,
    specs: &[ModelSpec],
    split: &Split,
    config: &ForecastConfig,
    pretrained: &[(Source, FittedModel)],
) -> Result<GridOutput> {
    data.check_alignment()?;
    split.indices(&data.returns.dates)?;
    for s in specs {
        validate_p0(s.p0)?;
    }

    let mut vol_keys: Vec<(VolModel, Source)> = specs
        .iter()
        .map(|s| (s.volatility_model, s.source))
        .collect();
    vol_keys.sort();
    vol_keys.dedup();
    let volatility: Vec<(Source, ForecastSeries)> = vol_keys
        .par_iter()
        .map(|&(model, source)| {
            let pre = pretrained
                .iter()
                .find(|(s, f)| *s == source && f.model() == model)
                .map(|(_, f)| f);
            let spec_name = format!("{model} ({source:?})");
            rolling_forecast(model, data.inputs(source), split, config, pre)
                .map(|f| (source, f))
                .map_err(|e| e.for_spec(spec_name))
        })
        .collect::<Result<_>>()?;

    let standardized = in_sample_standardized(data.returns, split.val_end)?;
    let mut q_keys: Vec<(QuantileMethod, u64)> = specs
        .iter()
        .map(|s| (s.quantile_method, s.p0.to_bits()))
        .collect();
    q_keys.sort();
    q_keys.dedup();
    let quantiles: Vec<TailQuantiles> = q_keys
        .par_iter()
        .map(|&(method, p0)| {
            tail_quantiles(method, &standardized, f64::from_bits(p0))
                .map_err(|e| e.for_spec(method.to_string()))
        })
        .collect::<Result<_>>()?;

    let var = specs
        .iter()
        .map(|spec| {
            let vol = volatility
                .iter()
                .find(|(s, f)| *s == spec.source && f.model == spec.volatility_model)
                .map(|(_, f)| f)
                .expect("volatility forecast computed for every spec");
            let q = quantiles
                .iter()
                .find(|q| q.method == spec.quantile_method && q.p0 == spec.p0)
                .expect("quantiles computed for every spec");
            Ok(VarSeries {
                spec: *spec,
                forecasts: var_series(vol, q).map_err(|e| e.for_spec(spec.to_string()))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(GridOutput {
        volatility,
        quantiles,
        var,
    })
}

pub const VAR_CSV_HEADER: &str = "date,model,quantile_method,side,var,rv_forecast";

/// One row per (day, spec, side), six significant digits.
pub fn write_var_csv<W: Write>(mut out: W, series: &[VarSeries]) -> std::io::Result<()> {
    writeln!(out, "{VAR_CSV_HEADER}")?;
    for s in series {
        for f in &s.forecasts {
            for side in Side::BOTH {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    f.date,
                    s.spec.model_label(),
                    s.spec.quantile_method,
                    side,
                    format_sig(f.var(side), 6),
                    format_sig(f.rv_forecast, 6)
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn var_examples() {
        assert_eq!(var_from_forecast(1.0, 2.33).unwrap(), 2.33);
        assert!((var_from_forecast(4.0, 2.33).unwrap() - 4.66).abs() < 1e-15);
        assert_eq!(
            var_from_forecast(4.0, -2.33).unwrap(),
            var_from_forecast(4.0, 2.33).unwrap()
        );
        assert!(matches!(
            var_from_forecast(0.0, 2.33),
            Err(Error::NonPositiveVariance(_))
        ));
    }

    #[test]
    fn doubling_volatility_doubles_var() {
        for &(rv, q) in &[(1e-4, 2.1), (3.7e-5, -2.9), (0.02, 1.0)] {
            let a = var_from_forecast(rv, q).unwrap();
            let b = var_from_forecast(4.0 * rv, q).unwrap();
            assert_eq!(b, 2.0 * a);
        }
    }

    #[test]
    fn grid_has_eighteen_specs() {
        let g = ModelSpec::grid(0.01, Source::Price).unwrap();
        assert_eq!(g.len(), 18);
        assert_eq!(g[0].to_string(), "LSTM-RV-EVT");
        assert_eq!(g[17].to_string(), "ARFIMA-H");
        assert!(ModelSpec::grid(0.2, Source::Price).is_err());
        assert!(ModelSpec::grid(0.0, Source::Price).is_err());
        let v = ModelSpec::grid(0.05, Source::Volume).unwrap();
        assert_eq!(v[3].to_string(), "LSTM(V)-EVT");
    }

    #[test]
    fn csv_rows_use_six_digits() {
        let spec =
            ModelSpec::new(VolModel::Har, QuantileMethod::Hist, 0.01, Source::Price).unwrap();
        let series = VarSeries {
            spec,
            forecasts: vec![VarForecast {
                date: NaiveDate::from_ymd_opt(2020, 3, 2).unwrap(),
                var_long: 0.0234567891,
                var_short: 0.0212,
                rv_forecast: 1.23456789e-4,
                quantile_long: -2.3,
                quantile_short: 2.1,
            }],
        };
        let mut buf = Vec::new();
        write_var_csv(&mut buf, &[series]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], VAR_CSV_HEADER);
        assert_eq!(lines[1], "2020-03-02,HAR,H,long,0.0234568,0.000123457");
        assert_eq!(lines[2], "2020-03-02,HAR,H,short,0.0212,0.000123457");
    }
}
