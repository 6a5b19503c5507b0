//! Heterogeneous autoregressive models of realized variance.
//!
//! `RV_{t+1} = b0 + bd RV_t + bw RV^w_t + bm RV^m_t [+ quarticity terms] + e`
//! with `RV^w` and `RV^m` the 5- and 22-day trailing means. HARQ adds
//! `bdq sqrt(RQ_t) RV_t`; HARQF adds the analogous weekly and monthly
//! interactions built from trailing means of RQ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::VARIANCE_FLOOR;
use crate::error::{Error, Result};

pub const WEEK: usize = 5;
pub const MONTH: usize = 22;
/// Observations beyond the monthly warm-up required to fit.
pub const MIN_FIT_ROWS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HarVariant {
    #[serde(rename = "HAR")]
    Har,
    #[serde(rename = "HARQ")]
    Harq,
    #[serde(rename = "HARQF")]
    Harqf,
}

impl HarVariant {
    fn uses_quarticity(self) -> bool {
        !matches!(self, HarVariant::Har)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarCoefficients {
    pub variant: HarVariant,
    pub beta0: f64,
    pub beta_d: f64,
    pub beta_w: f64,
    pub beta_m: f64,
    pub beta_dq: Option<f64>,
    pub beta_wq: Option<f64>,
    pub beta_mq: Option<f64>,
}

fn trailing_mean(xs: &[f64], end: usize, len: usize) -> f64 {
    xs[end + 1 - len..=end].iter().sum::<f64>() / len as f64
}

/// Regressors observed at day `t` (all values through `t` inclusive).
#[derive(Debug, Clone, Copy)]
struct Regressors {
    daily: f64,
    weekly: f64,
    monthly: f64,
    // quarticity interactions
    daily_q: f64,
    weekly_q: f64,
    monthly_q: f64,
    rq_daily: f64,
}

fn regressors(rv: &[f64], rq: Option<&[f64]>, t: usize) -> Regressors {
    let daily = rv[t];
    let weekly = trailing_mean(rv, t, WEEK);
    let monthly = trailing_mean(rv, t, MONTH);
    let (daily_q, weekly_q, monthly_q, rq_daily) = match rq {
        Some(rq) => (
            rq[t].sqrt() * daily,
            trailing_mean(rq, t, WEEK).sqrt() * weekly,
            trailing_mean(rq, t, MONTH).sqrt() * monthly,
            rq[t],
        ),
        None => (0.0, 0.0, 0.0, 0.0),
    };
    Regressors {
        daily,
        weekly,
        monthly,
        daily_q,
        weekly_q,
        monthly_q,
        rq_daily,
    }
}

impl Regressors {
    fn row(&self, variant: HarVariant) -> Vec<f64> {
        let mut row = vec![1.0, self.daily, self.weekly, self.monthly];
        match variant {
            HarVariant::Har => {}
            HarVariant::Harq => row.push(self.daily_q),
            HarVariant::Harqf => row.extend([self.daily_q, self.weekly_q, self.monthly_q]),
        }
        row
    }
}

/// Least squares via Householder QR on unit-norm columns. All-zero columns
/// get a zero coefficient; any other rank deficiency is an error.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = rows[0].len();
    let active: Vec<usize> = (0..k)
        .filter(|&j| rows.iter().any(|r| r[j] != 0.0))
        .collect();
    if active.is_empty() || rows.len() < active.len() {
        return Err(Error::SingularDesign);
    }
    let norms: Vec<f64> = active
        .iter()
        .map(|&j| rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    let x = DMatrix::from_fn(rows.len(), active.len(), |i, c| {
        rows[i][active[c]] / norms[c]
    });
    let qr = x.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..active.len()).map(|i| r[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if diag.iter().any(|d| *d <= 1e-10 * max) {
        return Err(Error::SingularDesign);
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign)?;
    let mut out = vec![0.0; k];
    for (c, &j) in active.iter().enumerate() {
        out[j] = beta[c] / norms[c];
    }
    Ok(out)
}

/// Design matrix and targets for one-day-ahead regression on `rv`.
fn design(rv: &[f64], rq: Option<&[f64]>, variant: HarVariant) -> (Vec<Vec<f64>>, Vec<f64>) {
    (MONTH - 1..rv.len() - 1)
        .map(|t| (regressors(rv, rq, t).row(variant), rv[t + 1]))
        .unzip()
}

/// Ordinary least squares fit of the chosen variant.
pub fn har_fit(rv: &[f64], rq: Option<&[f64]>, variant: HarVariant) -> Result<HarCoefficients> {
    let needed = MONTH + MIN_FIT_ROWS;
    if rv.len() < needed {
        return Err(Error::TooFewObservations {
            needed,
            got: rv.len(),
        });
    }
    let rq = if variant.uses_quarticity() {
        let rq = rq.ok_or_else(|| {
            Error::InvalidParameter("realized quarticity is required for HARQ/HARQF".into())
        })?;
        if rq.len() != rv.len() {
            return Err(Error::DimensionMismatch("rq and rv lengths differ".into()));
        }
        Some(rq)
    } else {
        None
    };

    let (rows, y) = design(rv, rq, variant);
    let beta = least_squares(&rows, &y)?;
    Ok(HarCoefficients {
        variant,
        beta0: beta[0],
        beta_d: beta[1],
        beta_w: beta[2],
        beta_m: beta[3],
        beta_dq: beta.get(4).copied(),
        beta_wq: beta.get(5).copied(),
        beta_mq: beta.get(6).copied(),
    })
}

/// Plug-in forecast of the day after the last element of `rv`. When
/// `RQ_t < RV_t` the quarticity terms are dropped and the base HAR part is
/// used. Forecasts are floored at [`VARIANCE_FLOOR`].
pub fn har_forecast(coefs: &HarCoefficients, rv: &[f64], rq: Option<&[f64]>) -> Result<f64> {
    if rv.len() < MONTH {
        return Err(Error::TooFewObservations {
            needed: MONTH,
            got: rv.len(),
        });
    }
    let t = rv.len() - 1;
    let rq = if coefs.variant.uses_quarticity() {
        let rq = rq.ok_or_else(|| {
            Error::InvalidParameter("realized quarticity is required for HARQ/HARQF".into())
        })?;
        if rq.len() != rv.len() {
            return Err(Error::DimensionMismatch("rq and rv lengths differ".into()));
        }
        Some(rq)
    } else {
        None
    };
    let x = regressors(rv, rq, t);
    let mut forecast =
        coefs.beta0 + coefs.beta_d * x.daily + coefs.beta_w * x.weekly + coefs.beta_m * x.monthly;
    if rq.is_some() && x.rq_daily >= x.daily {
        forecast += coefs.beta_dq.unwrap_or(0.0) * x.daily_q
            + coefs.beta_wq.unwrap_or(0.0) * x.weekly_q
            + coefs.beta_mq.unwrap_or(0.0) * x.monthly_q;
    }
    Ok(forecast.max(VARIANCE_FLOOR))
}

/// In-sample residuals of a fitted model, paired with its design rows.
pub fn har_residuals(
    coefs: &HarCoefficients,
    rv: &[f64],
    rq: Option<&[f64]>,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (rows, y) = design(rv, rq, coefs.variant);
    let beta: Vec<f64> = [
        Some(coefs.beta0),
        Some(coefs.beta_d),
        Some(coefs.beta_w),
        Some(coefs.beta_m),
        coefs.beta_dq,
        coefs.beta_wq,
        coefs.beta_mq,
    ]
    .into_iter()
    .flatten()
    .collect();
    let resid = rows
        .iter()
        .zip(&y)
        .map(|(r, yi)| yi - r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    (rows, resid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noiseless(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rv: Vec<f64> = (0..MONTH).map(|_| rng.random_range(0.5..2.0)).collect();
        while rv.len() < n {
            let t = rv.len() - 1;
            let next = 0.1
                + 0.5 * rv[t]
                + 0.3 * trailing_mean(&rv, t, WEEK)
                + 0.1 * trailing_mean(&rv, t, MONTH);
            rv.push(next);
        }
        rv
    }

    #[test]
    fn recovers_noiseless_coefficients() {
        let rv = noiseless(80, 1);
        let c = har_fit(&rv, None, HarVariant::Har).unwrap();
        for (got, want) in [
            (c.beta0, 0.1),
            (c.beta_d, 0.5),
            (c.beta_w, 0.3),
            (c.beta_m, 0.1),
        ] {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert_eq!(c.beta_dq, None);
    }

    #[test]
    fn constant_series_is_singular() {
        assert!(matches!(
            har_fit(&[0.3; 100], None, HarVariant::Har),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn too_short_series() {
        assert!(matches!(
            har_fit(&[1.0; 51], None, HarVariant::Har),
            Err(Error::TooFewObservations {
                needed: 52,
                got: 51
            })
        ));
    }

    #[test]
    fn zero_quarticity_reduces_to_har() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rv: Vec<f64> = (0..300).map(|_| rng.random_range(0.1..1.0)).collect();
        let rq = vec![0.0; rv.len()];
        let har = har_fit(&rv, None, HarVariant::Har).unwrap();
        let harq = har_fit(&rv, Some(&rq), HarVariant::Harq).unwrap();
        assert_eq!(harq.beta_dq, Some(0.0));
        for end in [40, 120, 300] {
            let a = har_forecast(&har, &rv[..end], None).unwrap();
            let b = har_forecast(&harq, &rv[..end], Some(&rq[..end])).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forecast_floor_and_intercept_only() {
        let zero = HarCoefficients {
            variant: HarVariant::Har,
            beta0: 0.0,
            beta_d: 0.0,
            beta_w: 0.0,
            beta_m: 0.0,
            beta_dq: None,
            beta_wq: None,
            beta_mq: None,
        };
        assert_eq!(
            har_forecast(&zero, &[1.0; 22], None).unwrap(),
            VARIANCE_FLOOR
        );
        let intercept = HarCoefficients {
            beta0: 0.7,
            ..zero.clone()
        };
        assert_eq!(har_forecast(&intercept, &[3.0; 40], None).unwrap(), 0.7);
        assert!(har_forecast(&zero, &[1.0; 21], None).is_err());
    }

    #[test]
    fn forecast_matches_hand_arithmetic() {
        let rv: Vec<f64> = (1..=22).map(|i| i as f64).collect();
        let c = HarCoefficients {
            variant: HarVariant::Harq,
            beta0: 0.5,
            beta_d: 0.4,
            beta_w: 0.2,
            beta_m: 0.1,
            beta_dq: Some(-0.01),
            beta_wq: None,
            beta_mq: None,
        };
        // weekly mean of 18..22 = 20, monthly mean of 1..22 = 11.5
        let base = 0.5 + 0.4 * 22.0 + 0.2 * 20.0 + 0.1 * 11.5;
        // RQ below RV: HAR part only
        let low = vec![1.0; 22];
        assert!((har_forecast(&c, &rv, Some(&low)).unwrap() - base).abs() < 1e-12);
        // RQ = 64 >= RV = 22: add -0.01 * 8 * 22
        let high = vec![64.0; 22];
        let want = base - 0.01 * 8.0 * 22.0;
        assert!((har_forecast(&c, &rv, Some(&high)).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rv = vec![1.0; MONTH];
        for _ in 0..500 {
            let t = rv.len() - 1;
            let next = 0.2
                + 0.4 * rv[t]
                + 0.2 * trailing_mean(&rv, t, WEEK)
                + 0.2 * trailing_mean(&rv, t, MONTH)
                + rng.random_range(-0.3..0.3);
            rv.push(next);
        }
        let rq: Vec<f64> = rv
            .iter()
            .map(|v| v * v * rng.random_range(0.5..1.5))
            .collect();
        for variant in [HarVariant::Har, HarVariant::Harq, HarVariant::Harqf] {
            let c = har_fit(&rv, Some(&rq), variant).unwrap();
            let (rows, resid) = har_residuals(&c, &rv, Some(&rq));
            let n = resid.len() as f64;
            for j in 0..rows[0].len() {
                let dot: f64 = rows.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
                assert!(dot.abs() < 1e-8 * n, "{variant:?} column {j}: {dot}");
            }
        }
    }
}
