//! Forecast accuracy scores and VaR backtests: violation ratios, Kupiec
//! unconditional coverage, Christoffersen independence and their sum.

use std::cmp::Ordering;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};
use crate::marketdata::ReturnSeries;
use crate::numeric::format_sig;
use crate::var::{Side, VarForecast, VarSeries};

/// Minimum sample for the unconditional coverage test.
pub const MIN_UC_OBSERVATIONS: usize = 250;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationSeries {
    pub dates: Vec<NaiveDate>,
    pub indicators: Vec<u8>,
    pub side: Side,
    pub p0: f64,
}

impl ViolationSeries {
    pub fn count(&self) -> usize {
        self.indicators.iter().filter(|&&i| i == 1).count()
    }

    pub fn ratio(&self) -> f64 {
        self.count() as f64 / self.indicators.len() as f64
    }
}

/// Long: a violation when `R < -VaR`; short: when `R > VaR`. A return
/// exactly at the boundary is not a violation.
pub fn violations(
    returns: &ReturnSeries,
    var: &[VarForecast],
    side: Side,
    p0: f64,
) -> Result<ViolationSeries> {
    let mut out = ViolationSeries {
        dates: Vec::with_capacity(var.len()),
        indicators: Vec::with_capacity(var.len()),
        side,
        p0,
    };
    for f in var {
        let r = returns
            .get(f.date)
            .ok_or_else(|| Error::DateMisalignment(format!("no return on {}", f.date)))?;
        let hit = match side {
            Side::Long => r < -f.var_long,
            Side::Short => r > f.var_short,
        };
        out.dates.push(f.date);
        out.indicators.push(u8::from(hit));
    }
    Ok(out)
}

/// Survival function of the chi-squared distribution.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof / 2.0, x / 2.0)
}

/// `a ln b` with `0 ln 0 = 0`.
fn xlny(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

/// Kupiec likelihood ratio for `x` violations in `n` days.
pub fn kupiec_lr(n: usize, x: usize, p0: f64) -> Result<f64> {
    if n < MIN_UC_OBSERVATIONS {
        return Err(Error::TooFewObservations {
            needed: MIN_UC_OBSERVATIONS,
            got: n,
        });
    }
    if x > n || !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "x = {x}, n = {n}, p0 = {p0}"
        )));
    }
    let (nf, xf) = (n as f64, x as f64);
    let pi = xf / nf;
    if pi == p0 {
        return Ok(0.0);
    }
    let lr =
        -2.0 * (xlny(xf, p0) + xlny(nf - xf, 1.0 - p0) - xlny(xf, pi) - xlny(nf - xf, 1.0 - pi));
    Ok(lr.max(0.0))
}

/// Unconditional coverage: `(LR, p-value)` against chi-squared(1).
pub fn kupiec_uc(v: &ViolationSeries) -> Result<(f64, f64)> {
    let lr = kupiec_lr(v.indicators.len(), v.count(), v.p0)?;
    Ok((lr, chi2_sf(lr, 1.0)))
}

/// First-order transition counts `[n00, n01, n10, n11]`.
pub fn transition_counts(indicators: &[u8]) -> [usize; 4] {
    let mut n = [0usize; 4];
    for w in indicators.windows(2) {
        n[usize::from(w[0]) * 2 + usize::from(w[1])] += 1;
    }
    n
}

/// Christoffersen independence test: `(LR, p-value)` against chi-squared(1).
pub fn christoffersen_ind(v: &ViolationSeries) -> Result<(f64, f64)> {
    let ones = v.count();
    if ones == 0 || ones == v.indicators.len() {
        return Err(Error::DegenerateSeries);
    }
    let [n00, n01, n10, n11] = transition_counts(&v.indicators).map(|c| c as f64);
    let pi01 = n01 / (n00 + n01);
    let pi11 = if n10 + n11 > 0.0 {
        n11 / (n10 + n11)
    } else {
        0.0
    };
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let restricted = xlny(n00 + n10, 1.0 - pi) + xlny(n01 + n11, pi);
    let unrestricted =
        xlny(n00, 1.0 - pi01) + xlny(n01, pi01) + xlny(n10, 1.0 - pi11) + xlny(n11, pi11);
    let lr = (-2.0 * (restricted - unrestricted)).max(0.0);
    Ok((lr, chi2_sf(lr, 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageTests {
    pub violation_ratio: f64,
    pub lr_uc: f64,
    pub p_uc: f64,
    pub lr_ind: f64,
    pub p_ind: f64,
    pub lr_cc: f64,
    pub p_cc: f64,
}

/// Joint statistic from the two components, with its chi-squared(2) p-value.
pub fn combine_cc(lr_uc: f64, lr_ind: f64) -> (f64, f64) {
    let lr = lr_uc + lr_ind;
    (lr, chi2_sf(lr, 2.0))
}

pub fn conditional_coverage(v: &ViolationSeries) -> Result<CoverageTests> {
    let (lr_uc, p_uc) = kupiec_uc(v)?;
    let (lr_ind, p_ind) = christoffersen_ind(v)?;
    let (lr_cc, p_cc) = combine_cc(lr_uc, lr_ind);
    Ok(CoverageTests {
        violation_ratio: v.ratio(),
        lr_uc,
        p_uc,
        lr_ind,
        p_ind,
        lr_cc,
        p_cc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyScores {
    pub mse: f64,
    pub mae: f64,
    pub qlike: f64,
    pub mape: f64,
}

impl AccuracyScores {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Mse => self.mse,
            Metric::Mae => self.mae,
            Metric::Qlike => self.qlike,
            Metric::Mape => self.mape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Mse,
    Mae,
    Qlike,
    Mape,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Mse, Metric::Mae, Metric::Qlike, Metric::Mape];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Mse => "MSE",
            Metric::Mae => "MAE",
            Metric::Qlike => "QLIKE",
            Metric::Mape => "MAPE",
        }
    }
}

/// MSE, MAE, QLIKE `y/f - ln(y/f) - 1` and MAPE `|y - f| / y`, each averaged.
pub fn accuracy_scores(actual: &[f64], forecast: &[f64]) -> Result<AccuracyScores> {
    if actual.len() != forecast.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} actual values, {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, got: 0 });
    }
    if actual
        .iter()
        .chain(forecast)
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(Error::InvalidParameter(
            "accuracy scores need positive values".into(),
        ));
    }
    let n = actual.len() as f64;
    let mut s = AccuracyScores {
        mse: 0.0,
        mae: 0.0,
        qlike: 0.0,
        mape: 0.0,
    };
    for (&y, &f) in actual.iter().zip(forecast) {
        let e = y - f;
        let ratio = y / f;
        s.mse += e * e;
        s.mae += e.abs();
        s.qlike += ratio - ratio.ln() - 1.0;
        s.mape += (e / y).abs();
    }
    s.mse /= n;
    s.mae /= n;
    s.qlike = (s.qlike / n).max(0.0);
    s.mape /= n;
    Ok(s)
}

/// One backtested spec and side, with the independence and joint tests
/// absent when the violation series is degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRow {
    pub model: String,
    pub quantile_method: String,
    pub side: Side,
    pub p0: f64,
    pub violations: usize,
    pub n: usize,
    pub violation_ratio: f64,
    pub lr_uc: f64,
    pub p_uc: f64,
    pub lr_ind: Option<f64>,
    pub p_ind: Option<f64>,
    pub lr_cc: Option<f64>,
    pub p_cc: Option<f64>,
    pub rank: usize,
}

/// Backtest one VaR series on one side. Ranks are assigned later.
pub fn backtest_series(
    returns: &ReturnSeries,
    series: &VarSeries,
    side: Side,
) -> Result<BacktestRow> {
    let spec = &series.spec;
    let v = violations(returns, &series.forecasts, side, spec.p0)?;
    let (lr_uc, p_uc) = kupiec_uc(&v)?;
    let ind = match christoffersen_ind(&v) {
        Ok(t) => Some(t),
        Err(Error::DegenerateSeries) => None,
        Err(e) => return Err(e),
    };
    let cc = ind.map(|(lr_ind, _)| combine_cc(lr_uc, lr_ind));
    Ok(BacktestRow {
        model: spec.model_label(),
        quantile_method: spec.quantile_method.to_string(),
        side,
        p0: spec.p0,
        violations: v.count(),
        n: v.indicators.len(),
        violation_ratio: v.ratio(),
        lr_uc,
        p_uc,
        lr_ind: ind.map(|t| t.0),
        p_ind: ind.map(|t| t.1),
        lr_cc: cc.map(|t| t.0),
        p_cc: cc.map(|t| t.1),
        rank: 0,
    })
}

/// Order for ranking: smaller statistic first, then violation ratio closer
/// to `p0`, then name.
fn rank_order(a: &BacktestRow, b: &BacktestRow) -> Ordering {
    a.lr_uc
        .total_cmp(&b.lr_uc)
        .then_with(|| {
            (a.violation_ratio - a.p0)
                .abs()
                .total_cmp(&(b.violation_ratio - b.p0).abs())
        })
        .then_with(|| (&a.model, &a.quantile_method).cmp(&(&b.model, &b.quantile_method)))
}

/// Assign ranks 1..K within each side; rows come back sorted by side then rank.
pub fn rank_models(mut rows: Vec<BacktestRow>) -> Vec<BacktestRow> {
    rows.sort_by(|a, b| a.side.cmp(&b.side).then_with(|| rank_order(a, b)));
    let mut current = None;
    let mut rank = 0;
    for row in &mut rows {
        if current != Some(row.side) {
            current = Some(row.side);
            rank = 0;
        }
        rank += 1;
        row.rank = rank;
    }
    rows
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format_sig(x, 6))
}

pub const BACKTEST_CSV_HEADER: &str =
    "model,quantile_method,side,violation_ratio,lr_uc,p_uc,lr_ind,p_ind,lr_cc,p_cc,rank";

pub fn write_backtest_csv<W: Write>(mut out: W, rows: &[BacktestRow]) -> std::io::Result<()> {
    writeln!(out, "{BACKTEST_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.quantile_method,
            r.side,
            format_sig(r.violation_ratio, 6),
            format_sig(r.lr_uc, 6),
            format_sig(r.p_uc, 6),
            opt(r.lr_ind),
            opt(r.p_ind),
            opt(r.lr_cc),
            opt(r.p_cc),
            r.rank
        )?;
    }
    Ok(())
}

pub const ACCURACY_CSV_HEADER: &str = "model,mse,mae,qlike,mape";

pub fn write_accuracy_csv<W: Write>(
    mut out: W,
    rows: &[(String, AccuracyScores)],
) -> std::io::Result<()> {
    writeln!(out, "{ACCURACY_CSV_HEADER}")?;
    for (model, s) in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            model,
            format_sig(s.mse, 6),
            format_sig(s.mae, 6),
            format_sig(s.qlike, 6),
            format_sig(s.mape, 6)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub baseline: String,
    pub metric: Metric,
    pub improvement_pct: f64,
}

/// Percentage reduction of each metric achieved by `reference` relative to
/// every other model: `(baseline - reference) / baseline * 100`.
pub fn improvements(
    rows: &[(String, AccuracyScores)],
    reference: &str,
) -> Result<Vec<Improvement>> {
    let (_, best) = rows
        .iter()
        .find(|(m, _)| m == reference)
        .ok_or_else(|| Error::InvalidParameter(format!("no accuracy row for {reference}")))?;
    let mut out = Vec::new();
    for (model, scores) in rows.iter().filter(|(m, _)| m != reference) {
        for metric in Metric::ALL {
            let base = scores.get(metric);
            out.push(Improvement {
                baseline: model.clone(),
                metric,
                improvement_pct: (base - best.get(metric)) / base * 100.0,
            });
        }
    }
    Ok(out)
}

pub const IMPROVEMENT_CSV_HEADER: &str = "baseline,metric,improvement_pct";

pub fn write_improvement_csv<W: Write>(mut out: W, rows: &[Improvement]) -> std::io::Result<()> {
    writeln!(out, "{IMPROVEMENT_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.baseline,
            r.metric.name(),
            format_sig(r.improvement_pct, 6)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(indicators: &[u8], p0: f64) -> ViolationSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        ViolationSeries {
            dates: (0..indicators.len())
                .map(|i| start + chrono::Duration::days(i as i64))
                .collect(),
            indicators: indicators.to_vec(),
            side: Side::Long,
            p0,
        }
    }

    #[test]
    fn violation_boundaries() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 2).unwrap();
        let f = |var: f64| VarForecast {
            date: d,
            var_long: var,
            var_short: var,
            rv_forecast: 1.0,
            quantile_long: -1.0,
            quantile_short: 1.0,
        };
        let returns = |r: f64| ReturnSeries::new(vec![d], vec![r]).unwrap();
        let ind = |r: f64, side| {
            violations(&returns(r), &[f(0.03)], side, 0.01)
                .unwrap()
                .indicators[0]
        };
        assert_eq!(ind(-0.05, Side::Long), 1);
        assert_eq!(ind(-0.02, Side::Long), 0);
        assert_eq!(ind(-0.03, Side::Long), 0);
        assert_eq!(ind(0.05, Side::Short), 1);
        assert_eq!(ind(0.03, Side::Short), 0);
        assert_eq!(ind(-0.05, Side::Short), 0);
        let other = NaiveDate::from_ymd_opt(2020, 1, 3).unwrap();
        let r = ReturnSeries::new(vec![other], vec![0.0]).unwrap();
        assert!(matches!(
            violations(&r, &[f(0.03)], Side::Long, 0.01),
            Err(Error::DateMisalignment(_))
        ));
    }

    #[test]
    fn kupiec_examples() {
        assert_eq!(kupiec_lr(1000, 10, 0.01).unwrap(), 0.0);
        let lr = kupiec_lr(1000, 20, 0.01).unwrap();
        let hand = -2.0 * (20.0 * (0.01f64 / 0.02).ln() + 980.0 * (0.99f64 / 0.98).ln());
        assert!((lr - hand).abs() < 1e-10);
        assert!((lr - 7.83).abs() < 0.01);
        let zero = kupiec_lr(1000, 0, 0.01).unwrap();
        assert!((zero + 2000.0 * 0.99f64.ln()).abs() < 1e-10);
        assert!((zero - 20.10).abs() < 0.01);
        assert!(matches!(
            kupiec_lr(100, 1, 0.01),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn kupiec_grows_away_from_expected_count() {
        let lrs: Vec<f64> = (0..=40)
            .map(|x| kupiec_lr(1000, x, 0.01).unwrap())
            .collect();
        for x in 0..10 {
            assert!(lrs[x] > lrs[x + 1]);
        }
        for x in 10..40 {
            assert!(lrs[x] < lrs[x + 1]);
        }
    }

    #[test]
    fn independence_examples() {
        let alternating = series(&[0, 1, 0, 1, 0, 1, 0, 1], 0.01);
        assert_eq!(transition_counts(&alternating.indicators), [0, 4, 3, 0]);
        let (lr, _) = christoffersen_ind(&alternating).unwrap();
        let hand = -2.0 * (3.0 * (3.0f64 / 7.0).ln() + 4.0 * (4.0f64 / 7.0).ln());
        assert!((lr - hand).abs() < 1e-12);
        assert!((lr - 9.5608).abs() < 1e-4);

        let balanced = series(&[0, 0, 1, 1, 0], 0.01);
        assert!(christoffersen_ind(&balanced).unwrap().0.abs() < 1e-12);

        assert!(matches!(
            christoffersen_ind(&series(&[0; 10], 0.01)),
            Err(Error::DegenerateSeries)
        ));
        assert!(matches!(
            christoffersen_ind(&series(&[1; 10], 0.01)),
            Err(Error::DegenerateSeries)
        ));
    }

    #[test]
    fn chi_squared_survival() {
        for x in [0.1, 1.0, 5.0, 12.0] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0).exp()).abs() < 1e-14);
        }
        assert!((chi2_sf(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-12);
        assert_eq!(chi2_sf(0.0, 1.0), 1.0);
        let (lr, p) = combine_cc(3.0, 2.0);
        assert_eq!(lr, 5.0);
        assert!((p - 0.0821).abs() < 1e-4);
        assert_eq!(combine_cc(0.0, 0.0).1, 1.0);
    }

    #[test]
    fn coverage_is_additive() {
        let mut ind = vec![0u8; 500];
        for i in [3, 50, 51, 120, 300, 301, 302, 450] {
            ind[i] = 1;
        }
        let v = series(&ind, 0.01);
        let c = conditional_coverage(&v).unwrap();
        assert!((c.lr_cc - (c.lr_uc + c.lr_ind)).abs() < 1e-10);
        assert_eq!(c.violation_ratio, 8.0 / 500.0);
    }

    #[test]
    fn accuracy_examples() {
        let s = accuracy_scores(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert_eq!(s.mse, 2.5);
        assert_eq!(s.mae, 1.5);
        assert_eq!(s.mape, 1.0);
        assert!((s.qlike - (0.5 - 0.5f64.ln() - 1.0)).abs() < 1e-15);
        assert!((s.qlike - 0.19315).abs() < 1e-5);

        let z = accuracy_scores(&[0.3, 1.2, 5.0], &[0.3, 1.2, 5.0]).unwrap();
        assert_eq!((z.mse, z.mae, z.qlike, z.mape), (0.0, 0.0, 0.0, 0.0));

        assert!(accuracy_scores(&[1.0], &[1.0, 2.0]).is_err());
        assert!(accuracy_scores(&[1.0, 0.0], &[1.0, 2.0]).is_err());
    }

    fn row(model: &str, lr: f64, ratio: f64) -> BacktestRow {
        BacktestRow {
            model: model.into(),
            quantile_method: "EVT".into(),
            side: Side::Long,
            p0: 0.01,
            violations: 0,
            n: 1000,
            violation_ratio: ratio,
            lr_uc: lr,
            p_uc: 1.0,
            lr_ind: None,
            p_ind: None,
            lr_cc: None,
            p_cc: None,
            rank: 0,
        }
    }

    #[test]
    fn ranking_examples() {
        let ranked = rank_models(vec![
            row("C", 0.8267, 0.01),
            row("A", 0.4601, 0.01),
            row("B", 0.5335, 0.01),
        ]);
        let order: Vec<(&str, usize)> = ranked.iter().map(|r| (r.model.as_str(), r.rank)).collect();
        assert_eq!(order, vec![("A", 1), ("B", 2), ("C", 3)]);

        assert_eq!(rank_models(vec![row("X", 3.0, 0.02)])[0].rank, 1);

        let tied = rank_models(vec![row("far", 1.0, 0.0182), row("near", 1.0, 0.0144)]);
        assert_eq!(tied[0].model, "near");

        let mut short = row("S", 0.1, 0.01);
        short.side = Side::Short;
        let mixed = rank_models(vec![short, row("L1", 2.0, 0.01), row("L2", 1.0, 0.01)]);
        let ranks: Vec<(Side, usize)> = mixed.iter().map(|r| (r.side, r.rank)).collect();
        assert_eq!(
            ranks,
            vec![(Side::Long, 1), (Side::Long, 2), (Side::Short, 1)]
        );
    }

    #[test]
    fn improvement_percentages() {
        let scores = |v: f64| AccuracyScores {
            mse: v,
            mae: v * 2.0,
            qlike: v / 2.0,
            mape: v,
        };
        let rows: Vec<(String, AccuracyScores)> =
            ["LSTM-RV", "LSTM", "HAR", "HARQ", "HARQF", "ARFIMA"]
                .iter()
                .enumerate()
                .map(|(i, m)| (m.to_string(), scores(1.0 + i as f64)))
                .collect();
        let imp = improvements(&rows, "LSTM-RV").unwrap();
        assert_eq!(imp.len(), 20);
        // HAR baseline 3 vs 1: (3 - 1) / 3
        let har_mse = imp
            .iter()
            .find(|r| r.baseline == "HAR" && r.metric == Metric::Mse)
            .unwrap();
        assert!((har_mse.improvement_pct - 200.0 / 3.0).abs() < 1e-12);
        assert!(improvements(&rows, "GARCH").is_err());
    }
}
