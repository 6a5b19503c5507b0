//! Synthetic intraday price/volume data with long-memory volatility and
//! heavy-tailed daily innovations.
//!
//! Daily log-variance follows a HAR-type recursion on its own daily, weekly
//! and monthly averages. The daily return is `sigma_t * eps_t` with `eps_t` a
//! unit-variance Student-t with `1/xi` degrees of freedom (Gaussian when
//! `xi = 0`), and the intraday path is a Gaussian bridge whose increments
//! sum to that return.

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{IntradayBar, TradingDay};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Number of trading days generated.
    pub days: usize,
    pub bars_per_day: usize,
    /// Tail index of the daily innovations.
    pub xi: f64,
    #[serde(deserialize_with = "crate::config::date")]
    pub start: NaiveDate,
    pub initial_price: f64,
    /// Long-run mean of the daily log-variance.
    pub mean_log_variance: f64,
    /// Standard deviation of log-variance shocks.
    pub vol_of_vol: f64,
    /// Weights on the daily, weekly and monthly log-variance averages.
    pub persistence: [f64; 3],
    /// Typical traded volume per bar.
    pub base_volume: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 2000,
            bars_per_day: 48,
            xi: 0.2,
            start: NaiveDate::from_ymd_opt(2010, 1, 4).expect("valid date"),
            initial_price: 3000.0,
            mean_log_variance: -9.2,
            vol_of_vol: 0.25,
            persistence: [0.35, 0.35, 0.25],
            base_volume: 20_000.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days < 2 {
            return Err(Error::Config("synth.days must be at least 2".into()));
        }
        if self.bars_per_day < 2 {
            return Err(Error::Config(
                "synth.bars_per_day must be at least 2".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.xi) {
            return Err(Error::Config(format!(
                "synth.xi must lie in [0, 0.5) for finite variance, got {}",
                self.xi
            )));
        }
        if !(self.initial_price > 0.0 && self.base_volume > 0.0 && self.vol_of_vol >= 0.0) {
            return Err(Error::Config(
                "synth prices, volume and vol_of_vol must be positive".into(),
            ));
        }
        let total: f64 = self.persistence.iter().sum();
        if self.persistence.iter().any(|w| *w < 0.0) || total >= 1.0 {
            return Err(Error::Config(
                "synth.persistence must be non-negative and sum below 1".into(),
            ));
        }
        Ok(())
    }
}

fn business_days(start: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let mut d = start;
    std::iter::from_fn(move || {
        while matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            d += Duration::days(1);
        }
        let out = d;
        d += Duration::days(1);
        Some(out)
    })
}

/// Daily log-variance path of length `n`.
fn log_variance_path<R: Rng>(config: &SynthConfig, n: usize, rng: &mut R) -> Vec<f64> {
    let [wd, ww, wm] = config.persistence;
    let mu = config.mean_log_variance;
    let burn = 500;
    let mut h: Vec<f64> = vec![mu; 22];
    for _ in 0..n + burn {
        let t = h.len();
        let day = h[t - 1] - mu;
        let week = h[t - 5..].iter().sum::<f64>() / 5.0 - mu;
        let month = h[t - 22..].iter().sum::<f64>() / 22.0 - mu;
        let z: f64 = StandardNormal.sample(rng);
        h.push(mu + wd * day + ww * week + wm * month + config.vol_of_vol * z);
    }
    h.split_off(h.len() - n)
}

/// Generate `config.days` trading days of bars, deterministic in `seed`.
pub fn generate(config: &SynthConfig, seed: u64) -> Result<Vec<TradingDay>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = config.bars_per_day;
    let h = log_variance_path(config, config.days, &mut rng);
    let student = if config.xi > 0.0 {
        let nu = 1.0 / config.xi;
        Some((
            StudentT::new(nu).map_err(|e| Error::Config(e.to_string()))?,
            ((nu - 2.0) / nu).sqrt(),
        ))
    } else {
        None
    };
    let open = NaiveTime::from_hms_opt(9, 30, 0).expect("valid time");
    let sigma_bar = (config.mean_log_variance / 2.0).exp();

    let mut price = config.initial_price;
    let mut days = Vec::with_capacity(config.days);
    for (date, &log_var) in business_days(config.start).zip(&h) {
        let sigma = (log_var / 2.0).exp();
        let eps = match &student {
            Some((t, scale)) => t.sample(&mut rng) * scale,
            None => StandardNormal.sample(&mut rng),
        };
        let daily = sigma * eps;

        // Gaussian bridge: i.i.d. increments shifted to sum to `daily`
        let step = sigma / (m as f64).sqrt();
        let mut inc: Vec<f64> = (0..m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                step * z
            })
            .collect();
        let shift = (inc.iter().sum::<f64>() - daily) / m as f64;
        for x in &mut inc {
            *x -= shift;
        }

        let dispersion = 0.5 * sigma / sigma_bar;
        let mut bars = Vec::with_capacity(m);
        let start = date.and_time(open);
        let mut log_p = price.ln();
        for (i, x) in inc.iter().enumerate() {
            log_p += x;
            let z: f64 = StandardNormal.sample(&mut rng);
            let volume =
                (config.base_volume * (sigma / sigma_bar).sqrt() * (dispersion.min(3.0) * z).exp())
                    .round();
            bars.push(IntradayBar {
                timestamp: start + Duration::minutes(5 * i as i64),
                price: log_p.exp(),
                volume,
            });
        }
        price = log_p.exp();
        days.push(TradingDay { date, bars });
    }
    Ok(days)
}
