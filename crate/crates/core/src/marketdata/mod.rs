//! Intraday bar ingest, daily returns, realized measures and descriptive
//! statistics.

mod bars;
mod realized;
mod returns;
mod stats;

pub use bars::{parse_bars, usable_days, write_bars, IntradayBar, TradingDay, TIMESTAMP_FORMAT};
pub use realized::{
    intraday_log_returns, realized_quarticity, realized_volatility, volume_realized_quarticity,
    volume_realized_volatility, RvSeries,
};
pub use returns::{
    daily_returns, standardize, standardize_with, DailyPanel, ReturnSeries, StandardizedReturns,
};
pub use stats::{autocorrelations, descriptive_stats, jarque_bera, ljung_box, median, StatsReport};
