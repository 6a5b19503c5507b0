//! Realized-volatility forecasting and Value-at-Risk backtesting.
//!
//! The pipeline turns intraday price/volume bars into daily realized
//! variance, forecasts next-day variance with an LSTM and econometric
//! baselines (HAR, HARQ, HARQF, ARFIMA), converts forecasts into VaR with
//! EVT, skewed-t or historical tail quantiles, and backtests the VaR series
//! with unconditional, independence and conditional coverage tests.

pub mod backtest;
pub mod config;
pub mod error;
pub mod marketdata;
pub mod models;
pub mod numeric;
pub mod pipeline;
pub mod synth;
pub mod tails;
pub mod var;

pub use error::{Error, Result};
