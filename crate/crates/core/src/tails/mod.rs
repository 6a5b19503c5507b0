//! Tail quantiles of standardized returns: generalized Pareto peaks over
//! threshold, a skewed Student-t, and historical simulation.

pub mod gpd;
pub mod hist;
pub mod skst;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gpd::{
    evt_quantile, exceedances, fit_gpd, gpd_cdf, gpd_log_likelihood, gpd_mle, select_threshold,
    GpdFit,
};
pub use hist::{hist_quantile, type7_quantile, EmpiricalTail};
pub use skst::{skst_fit, skst_quantile, SkstFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailSide {
    /// Losses of a long position.
    Left,
    /// Losses of a short position.
    Right,
}

impl TailSide {
    /// Map a return into the direction where tail values are positive.
    pub fn orient(self, x: f64) -> f64 {
        match self {
            TailSide::Left => -x,
            TailSide::Right => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QuantileMethod {
    #[serde(rename = "EVT")]
    Evt,
    #[serde(rename = "SKST")]
    Skst,
    #[serde(rename = "H")]
    Hist,
}

impl QuantileMethod {
    pub const ALL: [QuantileMethod; 3] = [
        QuantileMethod::Evt,
        QuantileMethod::Skst,
        QuantileMethod::Hist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantileMethod::Evt => "EVT",
            QuantileMethod::Skst => "SKST",
            QuantileMethod::Hist => "H",
        }
    }
}

impl fmt::Display for QuantileMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QuantileMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QuantileMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown quantile method `{s}`")))
    }
}

/// A fitted tail in its persisted form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailFit {
    Gpd(GpdFit),
    Skst { fit: SkstFit, tail: TailSide },
    Empirical(EmpiricalTail),
}

impl TailFit {
    pub fn tail(&self) -> TailSide {
        match self {
            TailFit::Gpd(g) => g.tail,
            TailFit::Skst { tail, .. } => *tail,
            TailFit::Empirical(e) => e.tail,
        }
    }

    /// Signed standardized-return quantile exceeded (in the tail direction)
    /// with probability `p0`.
    pub fn quantile(&self, p0: f64) -> Result<f64> {
        match self {
            TailFit::Gpd(g) => Ok(g.tail.orient(evt_quantile(g, p0)?)),
            TailFit::Skst { fit, tail } => match tail {
                TailSide::Left => skst_quantile(fit, p0),
                TailSide::Right => skst_quantile(fit, 1.0 - p0),
            },
            TailFit::Empirical(e) => hist_quantile(e, p0),
        }
    }
}

/// Fit one side of a standardized sample. Peaks over threshold with too few
/// exceedances falls back to historical simulation.
pub fn fit_tail(method: QuantileMethod, values: &[f64], tail: TailSide) -> Result<TailFit> {
    match method {
        QuantileMethod::Evt => match fit_gpd(values, tail) {
            Ok(g) => Ok(TailFit::Gpd(g)),
            Err(Error::InsufficientExceedances { needed, got }) => {
                log::warn!(
                    "{tail:?} tail has {got} exceedances (< {needed}); using historical simulation"
                );
                Ok(TailFit::Empirical(EmpiricalTail::new(values, tail)?))
            }
            Err(e) => Err(e),
        },
        QuantileMethod::Skst => Ok(TailFit::Skst {
            fit: skst_fit(values)?,
            tail,
        }),
        QuantileMethod::Hist => Ok(TailFit::Empirical(EmpiricalTail::new(values, tail)?)),
    }
}

/// Quantile of `fit`, answering from `sample` by historical simulation when
/// `p0` is not beyond the peaks-over-threshold threshold.
pub fn tail_quantile(fit: &TailFit, p0: f64, sample: &[f64]) -> Result<f64> {
    match fit.quantile(p0) {
        Err(Error::QuantileNotInTail { p0, rate }) => {
            log::warn!(
                "p0 = {p0} is above the exceedance rate {rate:.4}; using historical simulation"
            );
            hist_quantile(&EmpiricalTail::new(sample, fit.tail())?, p0)
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in QuantileMethod::ALL {
            assert_eq!(m.name().parse::<QuantileMethod>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert!("GARCH".parse::<QuantileMethod>().is_err());
    }

    #[test]
    fn fits_round_trip_through_json() {
        let fits = vec![
            TailFit::Gpd(GpdFit {
                xi: 0.123_456_789_012_345_6,
                beta: 0.712_345_678_901_234_5,
                u: 1.65,
                n: 2000,
                n_u: 101,
                tail: TailSide::Left,
            }),
            TailFit::Skst {
                fit: SkstFit {
                    nu: 5.3,
                    gamma: 0.93,
                    loc: 0.01,
                    scale: 0.8,
                },
                tail: TailSide::Right,
            },
            TailFit::Empirical(EmpiricalTail::new(&[0.3, -1.0, 2.0], TailSide::Right).unwrap()),
        ];
        for f in fits {
            let text = serde_json::to_string(&f).unwrap();
            let back: TailFit = serde_json::from_str(&text).unwrap();
            assert_eq!(back, f);
        }
    }

    #[test]
    fn left_gpd_quantile_is_negative() {
        let g = GpdFit {
            xi: 0.2,
            beta: 1.0,
            u: 2.0,
            n: 1000,
            n_u: 50,
            tail: TailSide::Left,
        };
        let q = TailFit::Gpd(g).quantile(0.01).unwrap();
        assert!((q + 3.898_65).abs() < 1e-5);
    }

    #[test]
    fn evt_falls_back_to_history_when_too_few_exceedances() {
        let xs: Vec<f64> = (0..200)
            .map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0)
            .collect();
        // a uniform sample has no mass beyond 1.65 standard deviations
        let fit = fit_tail(QuantileMethod::Evt, &xs, TailSide::Left).unwrap();
        assert!(matches!(fit, TailFit::Empirical(_)));
    }

    #[test]
    fn quantile_above_exceedance_rate_uses_history() {
        let sample: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0 - 0.5).collect();
        let g = GpdFit {
            xi: 0.1,
            beta: 1.0,
            u: 2.0,
            n: 1000,
            n_u: 20,
            tail: TailSide::Right,
        };
        let q = tail_quantile(&TailFit::Gpd(g), 0.05, &sample).unwrap();
        let e = EmpiricalTail::new(&sample, TailSide::Right).unwrap();
        assert_eq!(q, hist_quantile(&e, 0.05).unwrap());
    }
}
