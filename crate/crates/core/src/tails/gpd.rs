//! Peaks over threshold with a generalized Pareto tail.

use serde::{Deserialize, Serialize};

use super::TailSide;
use crate::error::{Error, Result};
use crate::numeric::{golden_section_max, sample_std};

/// Threshold in units of the sample standard deviation.
pub const THRESHOLD_STD_MULTIPLE: f64 = 1.65;
pub const MIN_EXCEEDANCES: usize = 30;
/// Below this |xi| the exponential limit is used.
pub const XI_ZERO_TOLERANCE: f64 = 1e-10;
pub const XI_SEARCH_MIN: f64 = -0.45;
pub const XI_SEARCH_MAX: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdFit {
    pub xi: f64,
    pub beta: f64,
    /// Threshold, in the tail-oriented (positive) direction.
    pub u: f64,
    pub n: usize,
    pub n_u: usize,
    pub tail: TailSide,
}

/// `u = 1.65 * sample std` of the tail-oriented series.
pub fn select_threshold(values: &[f64], _tail: TailSide) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: values.len(),
        });
    }
    // negation leaves the standard deviation unchanged
    let sd = sample_std(values);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(THRESHOLD_STD_MULTIPLE * sd)
}

/// Excesses over `u` in the tail direction; all strictly positive.
pub fn exceedances(values: &[f64], u: f64, tail: TailSide) -> Vec<f64> {
    values
        .iter()
        .map(|&x| tail.orient(x))
        .filter(|&x| x > u)
        .map(|x| x - u)
        .collect()
}

pub fn gpd_cdf(xi: f64, beta: f64, x: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("GPD scale {beta}")));
    }
    if x < 0.0 || (xi < 0.0 && x >= -beta / xi) {
        return Err(Error::OutsideSupport { x });
    }
    if xi.abs() < XI_ZERO_TOLERANCE {
        Ok(1.0 - (-x / beta).exp())
    } else {
        Ok(1.0 - (1.0 + xi * x / beta).powf(-1.0 / xi))
    }
}

pub fn gpd_log_likelihood(xi: f64, beta: f64, excesses: &[f64]) -> f64 {
    if !(beta > 0.0) {
        return f64::NEG_INFINITY;
    }
    let n = excesses.len() as f64;
    if xi.abs() < XI_ZERO_TOLERANCE {
        return -n * beta.ln() - excesses.iter().sum::<f64>() / beta;
    }
    let mut acc = 0.0;
    for &x in excesses {
        let z = 1.0 + xi * x / beta;
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        acc += z.ln();
    }
    -n * beta.ln() - (1.0 + 1.0 / xi) * acc
}

/// Maximum-likelihood scale for a fixed shape: the root in beta of
/// `mean(xi x / (beta + xi x)) = xi / (1 + xi)`.
fn profile_beta(xi: f64, excesses: &[f64], mean: f64, max: f64) -> Result<f64> {
    if xi.abs() < XI_ZERO_TOLERANCE {
        return Ok(mean);
    }
    let n = excesses.len() as f64;
    let target = xi / (1.0 + xi);
    // h is monotone in beta with a single root
    let h = |beta: f64| {
        let mut s = 0.0;
        let mut ds = 0.0;
        for &x in excesses {
            let denom = beta + xi * x;
            let r = xi * x / denom;
            s += r;
            ds -= r / denom;
        }
        (s / n - target, ds / n)
    };

    let (mut lo, mut hi) = if xi > 0.0 {
        (mean * 1e-8, mean * 1e3)
    } else {
        (-xi * max * (1.0 + 1e-12), mean * 1e3)
    };
    let increasing = xi < 0.0;
    let mut beta = (mean * (1.0 - xi)).clamp(lo, hi);
    if beta <= lo {
        beta = 0.5 * (lo + hi);
    }
    for _ in 0..200 {
        let (value, slope) = h(beta);
        if value == 0.0 {
            return Ok(beta);
        }
        // keep the bracket on the correct side of the root
        if (value > 0.0) == increasing {
            hi = beta;
        } else {
            lo = beta;
        }
        let mut next = beta - value / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - beta).abs() <= 1e-13 * beta {
            return Ok(next);
        }
        beta = next;
    }
    Err(Error::NonConvergence(format!("GPD scale for xi = {xi}")))
}

/// Profile log-likelihood over xi with beta concentrated out.
fn profile(xi: f64, excesses: &[f64], mean: f64, max: f64) -> (f64, f64) {
    match profile_beta(xi, excesses, mean, max) {
        Ok(beta) => (gpd_log_likelihood(xi, beta, excesses), beta),
        Err(_) => (f64::NEG_INFINITY, f64::NAN),
    }
}

/// Shape and scale by profile likelihood: coarse grid over
/// `[-0.45, 0.95]`, then golden-section refinement around the best point.
pub fn gpd_mle(excesses: &[f64]) -> Result<(f64, f64)> {
    if excesses.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientExceedances {
            needed: MIN_EXCEEDANCES,
            got: excesses.len(),
        });
    }
    if excesses.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::InvalidParameter(
            "excesses must be positive and finite".into(),
        ));
    }
    let mean = excesses.iter().sum::<f64>() / excesses.len() as f64;
    let max = excesses.iter().cloned().fold(0.0, f64::max);

    const STEP: f64 = 0.05;
    let grid_points = ((XI_SEARCH_MAX - XI_SEARCH_MIN) / STEP).round() as usize + 1;
    let grid: Vec<(f64, f64)> = (0..grid_points)
        .map(|i| {
            let xi = XI_SEARCH_MIN + i as f64 * STEP;
            // snap the exponential point exactly
            let xi = if xi.abs() < 1e-12 { 0.0 } else { xi };
            (xi, profile(xi, excesses, mean, max).0)
        })
        .collect();
    let (best_i, _) = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty grid");
    if !grid[best_i].1.is_finite() {
        return Err(Error::NonConvergence("GPD likelihood is not finite".into()));
    }

    let lo = grid[best_i.saturating_sub(1)].0;
    let hi = grid[(best_i + 1).min(grid.len() - 1)].0;
    let (xi_hat, ll_hat) =
        golden_section_max(|xi| profile(xi, excesses, mean, max).0, lo, hi, 1e-7);

    // the exponential fit is nested; never return something worse
    let ll_exp = gpd_log_likelihood(0.0, mean, excesses);
    let (xi, ll) = if ll_hat >= ll_exp && ll_hat >= grid[best_i].1 {
        (xi_hat, ll_hat)
    } else if grid[best_i].1 >= ll_exp {
        grid[best_i]
    } else {
        (0.0, ll_exp)
    };
    debug_assert!(ll.is_finite());
    let xi = if xi.abs() < XI_ZERO_TOLERANCE {
        0.0
    } else {
        xi
    };
    let beta = profile_beta(xi, excesses, mean, max)?;
    Ok((xi, beta))
}

/// Threshold, exceedances and GPD fit for one side of a standardized sample.
pub fn fit_gpd(values: &[f64], tail: TailSide) -> Result<GpdFit> {
    let u = select_threshold(values, tail)?;
    let excess = exceedances(values, u, tail);
    let (xi, beta) = gpd_mle(&excess)?;
    Ok(GpdFit {
        xi,
        beta,
        u,
        n: values.len(),
        n_u: excess.len(),
        tail,
    })
}

/// Tail quantile exceeded with probability `p0`, in the oriented direction:
/// `u + beta/xi * ((p0 / (n_u/n))^(-xi) - 1)`, or `u + beta ln(n_u/(n p0))`
/// in the exponential limit.
pub fn evt_quantile(fit: &GpdFit, p0: f64) -> Result<f64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!("tail probability {p0}")));
    }
    if !(fit.beta > 0.0) || fit.n_u == 0 || fit.n_u > fit.n {
        return Err(Error::InvalidParameter("invalid GPD fit".into()));
    }
    let rate = fit.n_u as f64 / fit.n as f64;
    if p0 > rate {
        return Err(Error::QuantileNotInTail { p0, rate });
    }
    if fit.xi.abs() < XI_ZERO_TOLERANCE {
        Ok(fit.u + fit.beta * (rate / p0).ln())
    } else {
        Ok(fit.u + fit.beta / fit.xi * ((p0 / rate).powf(-fit.xi) - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(xi: f64) -> GpdFit {
        GpdFit {
            xi,
            beta: 1.0,
            u: 2.0,
            n: 1000,
            n_u: 50,
            tail: TailSide::Right,
        }
    }

    #[test]
    fn threshold_examples() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let sd = sample_std(&xs);
        let u = select_threshold(&xs, TailSide::Right).unwrap();
        assert!((u - 1.65 * sd).abs() < 1e-12);
        let doubled: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert!((select_threshold(&doubled, TailSide::Right).unwrap() - 2.0 * u).abs() < 1e-12);
        assert_eq!(select_threshold(&xs, TailSide::Left).unwrap(), u);
        assert!(matches!(
            select_threshold(&[1.0; 5], TailSide::Left),
            Err(Error::ZeroVariance)
        ));
    }

    #[test]
    fn exceedance_examples() {
        let r = exceedances(&[3.0], 1.65, TailSide::Right);
        assert!((r[0] - 1.35).abs() < 1e-15);
        let l = exceedances(&[-3.0], 1.65, TailSide::Left);
        assert!((l[0] - 1.35).abs() < 1e-15);
        assert!(exceedances(&[0.5, -0.2], 1.65, TailSide::Right).is_empty());
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(gpd_cdf(0.3, 2.0, 0.0).unwrap(), 0.0);
        assert!((gpd_cdf(0.0, 1.0, 1.0).unwrap() - 0.632_120_558_828_557_7).abs() < 1e-15);
        assert!((gpd_cdf(0.2, 1.0, 1.0).unwrap() - (1.0 - 1.2f64.powi(-5))).abs() < 1e-15);
        assert!((gpd_cdf(0.2, 1.0, 1.0).unwrap() - 0.598_122).abs() < 1e-6);
        assert!(gpd_cdf(-0.5, 1.0, 2.0).is_err());
        assert!(gpd_cdf(0.1, 1.0, -0.1).is_err());
    }

    #[test]
    fn cdf_is_continuous_at_zero_shape() {
        for i in 0..=100 {
            let x = i as f64 * 0.1 * 2.5;
            let a = gpd_cdf(1e-11, 2.5, x).unwrap();
            let b = gpd_cdf(0.0, 2.5, x).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn quantile_examples() {
        assert!((evt_quantile(&fit(0.0), 0.01).unwrap() - (2.0 + 5f64.ln())).abs() < 1e-12);
        assert!((evt_quantile(&fit(0.0), 0.01).unwrap() - 3.60944).abs() < 1e-5);
        let q = evt_quantile(&fit(0.2), 0.01).unwrap();
        assert!((q - (2.0 + 5.0 * (5f64.powf(0.2) - 1.0))).abs() < 1e-12);
        assert!((q - 3.89865).abs() < 1e-5);
        assert_eq!(evt_quantile(&fit(0.2), 0.05).unwrap(), 2.0);
        assert!(matches!(
            evt_quantile(&fit(0.2), 0.06),
            Err(Error::QuantileNotInTail { .. })
        ));
    }

    #[test]
    fn quantile_inverts_cdf() {
        for xi in [-0.3, -0.05, 0.0, 0.1, 0.4, 0.9] {
            let f = fit(xi);
            for p0 in [0.001, 0.01, 0.03, 0.049] {
                let q = evt_quantile(&f, p0).unwrap();
                let c = gpd_cdf(xi, f.beta, q - f.u).unwrap();
                let want = 1.0 - p0 * f.n as f64 / f.n_u as f64;
                assert!((c - want).abs() < 1e-9, "xi={xi} p0={p0}");
                if xi < 0.0 {
                    assert!(q < f.u - f.beta / xi);
                }
            }
        }
    }

    #[test]
    fn deeper_tail_gives_larger_quantile() {
        let f = fit(0.15);
        let qs: Vec<f64> = [0.04, 0.02, 0.01, 0.001]
            .iter()
            .map(|p| evt_quantile(&f, *p).unwrap())
            .collect();
        assert!(qs.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn too_few_excesses() {
        assert!(matches!(
            gpd_mle(&[1.0; 10]),
            Err(Error::InsufficientExceedances {
                needed: 30,
                got: 10
            })
        ));
    }

    #[test]
    fn profile_scale_solves_score_equation() {
        let xs: Vec<f64> = (1..=200)
            .map(|i| (i as f64 / 201.0).powf(-0.3) - 1.0 + 0.01)
            .collect();
        let mean = xs.iter().sum::<f64>() / 200.0;
        let max = xs.iter().cloned().fold(0.0, f64::max);
        for xi in [-0.4, -0.1, 0.1, 0.5] {
            let beta = profile_beta(xi, &xs, mean, max).unwrap();
            let h = |b: f64| gpd_log_likelihood(xi, b, &xs);
            assert!(
                h(beta) >= h(beta * 1.001) && h(beta) >= h(beta * 0.999),
                "xi={xi}"
            );
        }
    }
}
