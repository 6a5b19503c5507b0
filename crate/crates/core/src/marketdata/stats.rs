use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean, sample_std};

pub const MIN_STATS_OBSERVATIONS: usize = 21;

/// Summary statistics of one series: moments, normality and serial
/// correlation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    /// Moment skewness `m3 / m2^1.5`.
    pub skewness: f64,
    /// Raw (non-excess) kurtosis `m4 / m2^2`; 3 for a normal law.
    pub kurtosis: f64,
    pub jarque_bera: f64,
    pub q5: f64,
    pub q10: f64,
    pub q20: f64,
}

pub fn descriptive_stats(values: &[f64]) -> Result<StatsReport> {
    let n = values.len();
    if n < MIN_STATS_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            needed: MIN_STATS_OBSERVATIONS,
            got: n,
        });
    }
    let m = mean(values);
    let central = |k: i32| values.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n as f64;
    let m2 = central(2);
    if !(m2 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let skewness = central(3) / m2.powf(1.5);
    let kurtosis = central(4) / (m2 * m2);
    let q = ljung_box(values, &[5, 10, 20]);

    Ok(StatsReport {
        mean: m,
        median: median(values),
        std: sample_std(values),
        skewness,
        kurtosis,
        jarque_bera: jarque_bera(n, skewness, kurtosis),
        q5: q[0],
        q10: q[1],
        q20: q[2],
    })
}

pub fn jarque_bera(n: usize, skewness: f64, kurtosis: f64) -> f64 {
    n as f64 / 6.0 * (skewness * skewness + (kurtosis - 3.0).powi(2) / 4.0)
}

/// Sample autocorrelations at lags `1..=max_lag`, biased estimator (divide
/// by n, overall mean).
pub fn autocorrelations(values: &[f64], max_lag: usize) -> Vec<f64> {
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|x| x - m).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    (1..=max_lag)
        .map(|k| {
            let num: f64 = dev[k..].iter().zip(&dev).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect()
}

/// Ljung–Box `Q(s) = n(n+2) sum_{k<=s} rho_k^2 / (n-k)` for each requested lag.
pub fn ljung_box(values: &[f64], lags: &[usize]) -> Vec<f64> {
    let n = values.len() as f64;
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let rho = autocorrelations(values, max_lag);
    let mut cumulative = Vec::with_capacity(max_lag);
    let mut acc = 0.0;
    for (i, r) in rho.iter().enumerate() {
        acc += r * r / (n - (i + 1) as f64);
        cumulative.push(n * (n + 2.0) * acc);
    }
    lags.iter()
        .map(|&s| if s == 0 { 0.0 } else { cumulative[s - 1] })
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
