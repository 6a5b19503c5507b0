//! Fernández–Steel skewed Student-t: a Student-t with scale `gamma` on the
//! right half-line and `1/gamma` on the left.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::marketdata::median;
use crate::numeric::{nelder_mead, sample_std};

pub const MIN_OBSERVATIONS: usize = 100;
const NU_MIN: f64 = 2.0;
const NU_MAX: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkstFit {
    /// Degrees of freedom, above 2.
    pub nu: f64,
    /// Skewness; 1 is symmetric, above 1 skews right.
    pub gamma: f64,
    pub loc: f64,
    pub scale: f64,
}

fn student(nu: f64) -> Result<StudentsT> {
    StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::InvalidParameter(format!("student t: {e}")))
}

fn check(fit: &SkstFit) -> Result<()> {
    if !(fit.nu > NU_MIN && fit.nu.is_finite())
        || !(fit.gamma > 0.0 && fit.gamma.is_finite())
        || !(fit.scale > 0.0 && fit.scale.is_finite())
        || !fit.loc.is_finite()
    {
        return Err(Error::InvalidParameter(format!(
            "skewed-t parameters {fit:?}"
        )));
    }
    Ok(())
}

fn t_log_constant(nu: f64) -> f64 {
    ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln()
}

fn t_log_density(nu: f64, z: f64) -> f64 {
    t_log_constant(nu) - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p()
}

/// Standard t quantile, polished by Newton steps on the CDF.
fn t_quantile(dist: &StudentsT, nu: f64, p: f64) -> f64 {
    let mut q = dist.inverse_cdf(p);
    for _ in 0..3 {
        let err = dist.cdf(q) - p;
        let dens = t_log_density(nu, q).exp();
        if !(dens > 0.0) || err == 0.0 {
            break;
        }
        let step = err / dens;
        if !step.is_finite() {
            break;
        }
        q -= step;
    }
    q
}

impl SkstFit {
    pub fn log_pdf(&self, x: f64) -> f64 {
        let g = self.gamma;
        let z = (x - self.loc) / self.scale;
        let arg = if z >= 0.0 { z / g } else { z * g };
        std::f64::consts::LN_2 - (g + 1.0 / g).ln() - self.scale.ln() + t_log_density(self.nu, arg)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check(self)?;
        let dist = student(self.nu)?;
        let g2 = self.gamma * self.gamma;
        let z = (x - self.loc) / self.scale;
        Ok(if z < 0.0 {
            2.0 / (1.0 + g2) * dist.cdf(z * self.gamma)
        } else {
            1.0 / (1.0 + g2) + 2.0 * g2 / (1.0 + g2) * (dist.cdf(z / self.gamma) - 0.5)
        })
    }

    pub fn log_likelihood(&self, xs: &[f64]) -> f64 {
        if check(self).is_err() {
            return f64::NEG_INFINITY;
        }
        let (g, nu) = (self.gamma, self.nu);
        let constant =
            std::f64::consts::LN_2 - (g + 1.0 / g).ln() - self.scale.ln() + t_log_constant(nu);
        let kernel: f64 = xs
            .iter()
            .map(|&x| {
                let z = (x - self.loc) / self.scale;
                let arg = if z >= 0.0 { z / g } else { z * g };
                (arg * arg / nu).ln_1p()
            })
            .sum();
        xs.len() as f64 * constant - (nu + 1.0) / 2.0 * kernel
    }
}

/// Quantile at probability `p`, inverting the two half-line pieces.
pub fn skst_quantile(fit: &SkstFit, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("probability {p}")));
    }
    check(fit)?;
    let dist = student(fit.nu)?;
    let g = fit.gamma;
    let g2 = g * g;
    let left_mass = 1.0 / (1.0 + g2);
    let z = if p < left_mass {
        t_quantile(&dist, fit.nu, p * (1.0 + g2) / 2.0) / g
    } else {
        let inner = (p - left_mass) * (1.0 + g2) / (2.0 * g2) + 0.5;
        g * t_quantile(&dist, fit.nu, inner.min(1.0 - f64::EPSILON))
    };
    Ok(fit.loc + fit.scale * z)
}

fn unpack(theta: &[f64], symmetric: bool) -> SkstFit {
    SkstFit {
        nu: NU_MIN + theta[0].exp(),
        gamma: if symmetric { 1.0 } else { theta[3].exp() },
        loc: theta[1],
        scale: theta[2].exp(),
    }
}

fn negative_log_likelihood(theta: &[f64], xs: &[f64], symmetric: bool) -> f64 {
    let fit = unpack(theta, symmetric);
    if fit.nu > NU_MAX {
        return f64::INFINITY;
    }
    -fit.log_likelihood(xs)
}

fn minimize(xs: &[f64], start: Vec<f64>, symmetric: bool) -> Result<(Vec<f64>, bool)> {
    let step = vec![0.3; start.len()];
    let f = |t: &[f64]| negative_log_likelihood(t, xs, symmetric);
    let first = nelder_mead(f, &start, &step, 4000, 1e-12);
    // a restart guards against a collapsed simplex
    let second = nelder_mead(f, &first.x, &vec![0.05; start.len()], 4000, 1e-12);
    if !second.value.is_finite() {
        return Err(Error::NonConvergence(
            "skewed-t likelihood is not finite".into(),
        ));
    }
    Ok((second.x, first.converged || second.converged))
}

/// Maximum likelihood fit: the symmetric t first, then the full model
/// started from it.
pub fn skst_fit(xs: &[f64]) -> Result<SkstFit> {
    if xs.len() < MIN_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            needed: MIN_OBSERVATIONS,
            got: xs.len(),
        });
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("skewed-t sample".into()));
    }
    let sd = sample_std(xs);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let nu0: f64 = 6.0;
    let start = vec![
        (nu0 - NU_MIN).ln(),
        median(xs),
        (sd * ((nu0 - 2.0) / nu0).sqrt()).ln(),
    ];
    let (sym, _) = minimize(xs, start, true)?;
    let mut full_start = sym.clone();
    full_start.push(0.0);
    let (theta, converged) = minimize(xs, full_start, false)?;
    if !converged {
        log::warn!("skewed-t fit reached the iteration limit");
    }
    let fit = unpack(&theta, false);
    // the symmetric fit is nested; keep whichever is better
    let sym_fit = unpack(&sym, true);
    if sym_fit.log_likelihood(xs) > fit.log_likelihood(xs) {
        return Ok(sym_fit);
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(nu: f64, gamma: f64) -> SkstFit {
        SkstFit {
            nu,
            gamma,
            loc: 0.0,
            scale: 1.0,
        }
    }

    #[test]
    fn left_mass() {
        for g in [0.5, 1.0, 1.5, 3.0] {
            let c = fit(5.0, g).cdf(0.0).unwrap();
            assert!((c - 1.0 / (1.0 + g * g)).abs() < 1e-14);
        }
        assert!((fit(5.0, 1.5).cdf(0.0).unwrap() - 0.307_692).abs() < 1e-6);
    }

    #[test]
    fn symmetric_reduces_to_student_t() {
        let f = fit(5.0, 1.0);
        assert!((skst_quantile(&f, 0.5).unwrap()).abs() < 1e-12);
        assert!((skst_quantile(&f, 0.05).unwrap() + 2.015_048).abs() < 1e-5);
        let t = student(5.0).unwrap();
        for x in [-3.0, -0.7, 0.0, 0.4, 2.5] {
            assert!((f.cdf(x).unwrap() - t.cdf(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for g in [0.6, 1.0, 1.3, 2.2] {
            for nu in [2.5, 4.0, 10.0, 60.0] {
                let f = SkstFit {
                    nu,
                    gamma: g,
                    loc: 0.3,
                    scale: 1.7,
                };
                for p in [1e-4, 0.01, 0.05, 0.3, 0.5, 0.8, 0.95, 0.999] {
                    let q = skst_quantile(&f, p).unwrap();
                    assert!((f.cdf(q).unwrap() - p).abs() < 1e-10, "g={g} nu={nu} p={p}");
                }
            }
        }
    }

    #[test]
    fn quantile_rejects_bad_probability() {
        assert!(skst_quantile(&fit(5.0, 1.0), 0.0).is_err());
        assert!(skst_quantile(&fit(5.0, 1.0), 1.0).is_err());
        assert!(skst_quantile(&fit(2.0, 1.0), 0.5).is_err());
    }

    #[test]
    fn density_integrates_to_one_and_matches_cdf() {
        let f = SkstFit {
            nu: 4.0,
            gamma: 1.4,
            loc: -0.2,
            scale: 0.8,
        };
        // Simpson on [-a, b]; the remaining tails come from the CDF
        let (a, b, n) = (-40.0, 40.0, 80_000);
        let h = (b - a) / n as f64;
        let mut s = f.pdf(a) + f.pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f.pdf(a + i as f64 * h);
        }
        let integral = s * h / 3.0;
        let mass = f.cdf(b).unwrap() - f.cdf(a).unwrap();
        assert!((integral - mass).abs() < 1e-8, "{integral} vs {mass}");
    }

    #[test]
    fn fit_needs_enough_data() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(matches!(
            skst_fit(&xs),
            Err(Error::TooFewObservations { .. })
        ));
    }
}
