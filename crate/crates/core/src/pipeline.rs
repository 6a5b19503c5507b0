//! Batch stages. Each stage reads its inputs from files, writes its outputs
//! atomically into the output directory, and the manifest is rewritten last.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backtest::{
    accuracy_scores, backtest_series, improvements, rank_models, write_accuracy_csv,
    write_backtest_csv, write_improvement_csv, AccuracyScores, BacktestRow,
};
use crate::config::{hex, RunConfig};
use crate::error::{Error, Result};
use crate::marketdata::{
    descriptive_stats, parse_bars, standardize, usable_days, write_bars, DailyPanel, StatsReport,
};
use crate::models::{
    fit_model, load_model, log_rv, rolling_forecast, save_model, FittedModel, ForecastSeries,
    VolModel,
};
use crate::numeric::format_sig;
use crate::synth;
use crate::tails::QuantileMethod;
use crate::var::{
    in_sample_standardized, tail_quantiles, var_series, write_var_csv, GridData, Side, Source,
    TailQuantiles, VarSeries,
};

pub const SERIES_FILE: &str = "series.csv";
pub const STATS_FILE: &str = "stats.csv";
pub const MODELS_DIR: &str = "models";
pub const TAILS_DIR: &str = "tails";
pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const VAR_JSON: &str = "var.json";
pub const VAR_CSV: &str = "var.csv";
pub const BACKTEST_JSON: &str = "backtest.json";
pub const ACCURACY_JSON: &str = "accuracy.json";
pub const ACCURACY_CSV: &str = "accuracy.csv";
pub const BACKTEST_CSV: &str = "backtest.csv";
pub const IMPROVEMENT_CSV: &str = "improvement.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Reference model of the improvement table.
const IMPROVEMENT_REFERENCE: &str = "LSTM-RV";
const VOLUME_SUFFIX: &str = "(V)";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Stats,
    Fit,
    Forecast,
    Var,
    Backtest,
    Report,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Stats => "stats",
            Stage::Fit => "fit",
            Stage::Forecast => "forecast",
            Stage::Var => "var",
            Stage::Backtest => "backtest",
            Stage::Report => "report",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Stage::Synth,
            Stage::Ingest,
            Stage::Stats,
            Stage::Fit,
            Stage::Forecast,
            Stage::Var,
            Stage::Backtest,
            Stage::Report,
            Stage::All,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Write via a temporary file in the same directory and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Error::io(path, e))?;
    write_atomic(path, &buf)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Serde(format!("{}: {e}", path.display()))
}

fn source_dir(source: Source) -> &'static str {
    match source {
        Source::Price => "price",
        Source::Volume => "volume",
    }
}

/// Runs stages for one configuration.
pub struct Pipeline {
    config: RunConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesRow {
    date: NaiveDate,
    #[serde(rename = "return")]
    ret: f64,
    rv_price: f64,
    rq_price: f64,
    rv_volume: f64,
    rq_volume: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ForecastRow {
    date: NaiveDate,
    model: VolModel,
    source: Source,
    forecast: f64,
    actual: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_hash: String,
    seed: u64,
    stage: &'a str,
    inputs: Vec<(String, String)>,
    outputs: Vec<(String, String)>,
}

impl Pipeline {
    /// Validates the configuration; nothing is written if it is invalid.
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    pub fn run(&self, stage: Stage) -> Result<()> {
        match stage {
            Stage::All => {
                if self.config.synth.is_some() {
                    self.synth()?;
                }
                self.ingest()?;
                self.stats()?;
                self.fit()?;
                self.forecast()?;
                self.var()?;
                self.backtest()?;
                self.report()?;
            }
            Stage::Synth => self.synth()?,
            Stage::Ingest => self.ingest()?,
            Stage::Stats => self.stats()?,
            Stage::Fit => self.fit()?,
            Stage::Forecast => self.forecast()?,
            Stage::Var => self.var()?,
            Stage::Backtest => self.backtest()?,
            Stage::Report => self.report()?,
        }
        self.write_manifest(stage)
    }

    pub fn synth(&self) -> Result<()> {
        let synth_config = self
            .config
            .synth
            .as_ref()
            .ok_or_else(|| Error::Config("the configuration has no [synth] section".into()))?;
        let days = synth::generate(synth_config, self.config.seed)?;
        log::info!(
            "synth: {} days of {} bars -> {}",
            days.len(),
            synth_config.bars_per_day,
            self.config.data_path.display()
        );
        write_with(&self.config.data_path, |buf| {
            write_bars(&mut *buf, &days).map_err(|e| std::io::Error::other(e.to_string()))
        })
    }

    /// Parse bars, drop anything dated after the test end, and write the
    /// daily panel.
    pub fn ingest(&self) -> Result<()> {
        let path = &self.config.data_path;
        let file = fs::File::open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.clone())
            } else {
                Error::io(path, e)
            }
        })?;
        let days = parse_bars(std::io::BufReader::new(file))?;
        let total = days.len();
        let days: Vec<_> = days
            .into_iter()
            .filter(|d| d.date <= self.config.test_end)
            .collect();
        if days.len() < total {
            log::info!(
                "ingest: ignoring {} days after {}",
                total - days.len(),
                self.config.test_end
            );
        }
        let panel = DailyPanel::from_days(&usable_days(days))?;
        log::info!("ingest: {} daily observations", panel.len());
        let out = self.out(SERIES_FILE);
        let mut w = csv::Writer::from_writer(Vec::new());
        for i in 0..panel.len() {
            w.serialize(SeriesRow {
                date: panel.dates[i],
                ret: panel.returns[i],
                rv_price: panel.rv_price[i],
                rq_price: panel.rq_price[i],
                rv_volume: panel.rv_volume[i],
                rq_volume: panel.rq_volume[i],
            })
            .map_err(|e| csv_error(&out, e))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        write_atomic(&out, &bytes)
    }

    fn load_panel(&self) -> Result<DailyPanel> {
        let path = self.out(SERIES_FILE);
        let text = read_input(&path)?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut panel = DailyPanel {
            dates: Vec::new(),
            returns: Vec::new(),
            rv_price: Vec::new(),
            rq_price: Vec::new(),
            rv_volume: Vec::new(),
            rq_volume: Vec::new(),
        };
        for row in rdr.deserialize::<SeriesRow>() {
            let r = row.map_err(|e| csv_error(&path, e))?;
            if r.date > self.config.test_end {
                continue;
            }
            panel.dates.push(r.date);
            panel.returns.push(r.ret);
            panel.rv_price.push(r.rv_price);
            panel.rq_price.push(r.rq_price);
            panel.rv_volume.push(r.rv_volume);
            panel.rq_volume.push(r.rq_volume);
        }
        Ok(panel)
    }

    /// Descriptive statistics of the five constructed series.
    pub fn stats(&self) -> Result<()> {
        let panel = self.load_panel()?;
        let standardized = standardize(&panel.returns)?.values;
        let series: [(&str, Vec<f64>); 5] = [
            ("RV(P)", panel.rv_price.clone()),
            ("RV(V)", panel.rv_volume.clone()),
            ("lnRV(P)", log_rv(&panel.rv_price)),
            ("lnRV(V)", log_rv(&panel.rv_volume)),
            ("r", standardized),
        ];
        let reports: Vec<(&str, StatsReport)> = series
            .iter()
            .map(|(name, v)| Ok((*name, descriptive_stats(v)?)))
            .collect::<Result<_>>()?;
        write_with(&self.out(STATS_FILE), |buf| {
            writeln!(
                buf,
                "series,mean,median,std,skewness,kurtosis,jarque_bera,q5,q10,q20"
            )?;
            for (name, s) in &reports {
                let cols = [
                    s.mean,
                    s.median,
                    s.std,
                    s.skewness,
                    s.kurtosis,
                    s.jarque_bera,
                    s.q5,
                    s.q10,
                    s.q20,
                ];
                let cols: Vec<String> = cols.iter().map(|c| format_sig(*c, 4)).collect();
                writeln!(buf, "{name},{}", cols.join(","))?;
            }
            Ok(())
        })
    }

    fn model_path(&self, source: Source, model: VolModel) -> PathBuf {
        self.out(MODELS_DIR)
            .join(source_dir(source))
            .join(format!("{}.json", model.name()))
    }

    fn tail_path(&self, method: QuantileMethod) -> PathBuf {
        self.out(TAILS_DIR).join(format!("{}.json", method.name()))
    }

    fn vol_jobs(&self) -> Vec<(Source, VolModel)> {
        self.config
            .sources
            .iter()
            .flat_map(|&s| self.config.models.iter().map(move |&m| (s, m)))
            .collect()
    }

    /// Fit every volatility model on training+validation data and every
    /// tail on the standardized returns of the same window.
    pub fn fit(&self) -> Result<()> {
        let panel = self.load_panel()?;
        let (returns, price_rv, volume_rv) =
            (panel.return_series(), panel.price_rv(), panel.volume_rv());
        let data = GridData {
            returns: &returns,
            price_rv: &price_rv,
            volume_rv: &volume_rv,
        };
        let split = self.config.split();
        let idx = split.indices(&panel.dates)?;
        let config = self.config.forecast_config();

        let fitted: Vec<(Source, FittedModel)> = self
            .vol_jobs()
            .par_iter()
            .map(|&(source, model)| {
                log::info!("fit: {model} on {} RV", source_dir(source));
                fit_model(model, data.inputs(source), idx.val_end, &config)
                    .map(|f| (source, f))
                    .map_err(|e| e.for_spec(format!("{model} ({})", source_dir(source))))
            })
            .collect::<Result<_>>()?;

        let standardized = in_sample_standardized(&returns, split.val_end)?;
        let tails: Vec<TailQuantiles> = self
            .config
            .quantile_methods
            .par_iter()
            .map(|&m| {
                tail_quantiles(m, &standardized, self.config.p0)
                    .map_err(|e| e.for_spec(m.to_string()))
            })
            .collect::<Result<_>>()?;

        for (source, f) in &fitted {
            let mut text = save_model(f)?;
            text.push('\n');
            write_atomic(&self.model_path(*source, f.model()), text.as_bytes())?;
        }
        for t in &tails {
            write_json(&self.tail_path(t.method), t)?;
        }
        Ok(())
    }

    /// Rolling one-step-ahead forecasts over the test segment.
    pub fn forecast(&self) -> Result<()> {
        let panel = self.load_panel()?;
        let (returns, price_rv, volume_rv) =
            (panel.return_series(), panel.price_rv(), panel.volume_rv());
        let data = GridData {
            returns: &returns,
            price_rv: &price_rv,
            volume_rv: &volume_rv,
        };
        let split = self.config.split();
        let config = self.config.forecast_config();
        let jobs = self.vol_jobs();
        let pretrained: Vec<FittedModel> = jobs
            .iter()
            .map(|&(s, m)| load_model(&read_input(&self.model_path(s, m))?))
            .collect::<Result<_>>()?;
        let series: Vec<(Source, ForecastSeries)> = jobs
            .par_iter()
            .zip(&pretrained)
            .map(|(&(source, model), pre)| {
                log::info!("forecast: {model} on {} RV", source_dir(source));
                rolling_forecast(model, data.inputs(source), &split, &config, Some(pre))
                    .map(|f| (source, f))
                    .map_err(|e| e.for_spec(format!("{model} ({})", source_dir(source))))
            })
            .collect::<Result<_>>()?;

        let out = self.out(FORECASTS_FILE);
        let mut w = csv::Writer::from_writer(Vec::new());
        for (source, f) in &series {
            for i in 0..f.dates.len() {
                w.serialize(ForecastRow {
                    date: f.dates[i],
                    model: f.model,
                    source: *source,
                    forecast: f.forecast[i],
                    actual: f.actual[i],
                })
                .map_err(|e| csv_error(&out, e))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Serde(e.to_string()))?;
        write_atomic(&out, &bytes)
    }

    fn load_forecasts(&self) -> Result<Vec<(Source, ForecastSeries)>> {
        let path = self.out(FORECASTS_FILE);
        let text = read_input(&path)?;
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut out: Vec<(Source, ForecastSeries)> = Vec::new();
        for row in rdr.deserialize::<ForecastRow>() {
            let r = row.map_err(|e| csv_error(&path, e))?;
            let pos = match out
                .iter()
                .position(|(s, f)| *s == r.source && f.model == r.model)
            {
                Some(p) => p,
                None => {
                    out.push((
                        r.source,
                        ForecastSeries {
                            model: r.model,
                            dates: Vec::new(),
                            forecast: Vec::new(),
                            actual: Vec::new(),
                        },
                    ));
                    out.len() - 1
                }
            };
            let f = &mut out[pos].1;
            f.dates.push(r.date);
            f.forecast.push(r.forecast);
            f.actual.push(r.actual);
        }
        Ok(out)
    }

    /// Combine forecasts with the fitted tail quantiles.
    pub fn var(&self) -> Result<()> {
        let forecasts = self.load_forecasts()?;
        let tails: Vec<TailQuantiles> = self
            .config
            .quantile_methods
            .iter()
            .map(|&m| read_json(&self.tail_path(m)))
            .collect::<Result<_>>()?;
        let series: Vec<VarSeries> = self
            .config
            .specs()
            .into_iter()
            .map(|spec| {
                let f = forecasts
                    .iter()
                    .find(|(s, f)| *s == spec.source && f.model == spec.volatility_model)
                    .map(|(_, f)| f)
                    .ok_or_else(|| {
                        Error::MissingInput(self.out(FORECASTS_FILE)).for_spec(spec.to_string())
                    })?;
                let q = tails
                    .iter()
                    .find(|t| t.method == spec.quantile_method && t.p0 == spec.p0)
                    .ok_or_else(|| {
                        Error::MissingInput(self.tail_path(spec.quantile_method))
                            .for_spec(spec.to_string())
                    })?;
                Ok(VarSeries {
                    spec,
                    forecasts: var_series(f, q).map_err(|e| e.for_spec(spec.to_string()))?,
                })
            })
            .collect::<Result<_>>()?;
        write_json(&self.out(VAR_JSON), &series)?;
        write_with(&self.out(VAR_CSV), |buf| write_var_csv(buf, &series))
    }

    /// Coverage tests of every VaR series and accuracy of every forecast.
    pub fn backtest(&self) -> Result<()> {
        let panel = self.load_panel()?;
        let returns = panel.return_series();
        let series: Vec<VarSeries> = read_json(&self.out(VAR_JSON))?;
        // Volume-driven VaR is on the ln-volume scale and is not compared
        // with price returns.
        let mut rows: Vec<BacktestRow> = Vec::with_capacity(series.len() * 2);
        for s in series.iter().filter(|s| s.spec.source == Source::Price) {
            for side in Side::BOTH {
                rows.push(
                    backtest_series(&returns, s, side)
                        .map_err(|e| e.for_spec(s.spec.to_string()))?,
                );
            }
        }
        let rows = rank_models(rows);

        let accuracy: Vec<(String, AccuracyScores)> = self
            .load_forecasts()?
            .iter()
            .map(|(source, f)| {
                let label = match source {
                    Source::Price => f.model.name().to_string(),
                    Source::Volume => format!("{}{VOLUME_SUFFIX}", f.model.name()),
                };
                let scores = accuracy_scores(&f.actual, &f.forecast)
                    .map_err(|e| e.for_spec(label.clone()))?;
                Ok((label, scores))
            })
            .collect::<Result<_>>()?;
        write_json(&self.out(BACKTEST_JSON), &rows)?;
        write_json(&self.out(ACCURACY_JSON), &accuracy)
    }

    /// Report CSVs and a plain-text summary.
    pub fn report(&self) -> Result<()> {
        let rows: Vec<BacktestRow> = read_json(&self.out(BACKTEST_JSON))?;
        let accuracy: Vec<(String, AccuracyScores)> = read_json(&self.out(ACCURACY_JSON))?;
        // Models are compared with the reference driven by the same series.
        let mut improvement = Vec::new();
        for volume in [false, true] {
            let group: Vec<(String, AccuracyScores)> = accuracy
                .iter()
                .filter(|(m, _)| m.ends_with(VOLUME_SUFFIX) == volume)
                .cloned()
                .collect();
            let reference = if volume {
                format!("{IMPROVEMENT_REFERENCE}{VOLUME_SUFFIX}")
            } else {
                IMPROVEMENT_REFERENCE.to_string()
            };
            if group.iter().any(|(m, _)| *m == reference) {
                improvement.extend(improvements(&group, &reference)?);
            }
        }
        write_with(&self.out(ACCURACY_CSV), |buf| {
            write_accuracy_csv(buf, &accuracy)
        })?;
        write_with(&self.out(BACKTEST_CSV), |buf| {
            write_backtest_csv(buf, &rows)
        })?;
        write_with(&self.out(IMPROVEMENT_CSV), |buf| {
            write_improvement_csv(buf, &improvement)
        })?;
        write_atomic(
            &self.out(SUMMARY_FILE),
            summary(&accuracy, &rows, self.config.p0).as_bytes(),
        )
    }

    fn write_manifest(&self, stage: Stage) -> Result<()> {
        let mut outputs = Vec::new();
        collect_files(
            &self.config.output_dir,
            &self.config.output_dir,
            &mut outputs,
        )?;
        outputs.retain(|(name, _)| name != MANIFEST_FILE);
        let mut inputs = Vec::new();
        if let Ok(bytes) = fs::read(&self.config.data_path) {
            let name = self
                .config
                .data_path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            inputs.push((name, hex(&Sha256::digest(&bytes))));
        }
        let manifest = Manifest {
            config_hash: self.config.hash(),
            seed: self.config.seed,
            stage: stage.name(),
            inputs,
            outputs,
        };
        write_json(&self.out(MANIFEST_FILE), &manifest)
    }
}

/// Relative path and SHA-256 of every regular file under `dir`, sorted.
fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for path in paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        if name.starts_with('.') {
            continue;
        }
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let rel = path
                .strip_prefix(root)
                .unwrap_or(&path)
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            out.push((rel, hex(&Sha256::digest(&bytes))));
        }
    }
    out.sort();
    Ok(())
}

/// Render rows as a left-aligned plain-text table.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

fn summary(accuracy: &[(String, AccuracyScores)], rows: &[BacktestRow], p0: f64) -> String {
    let acc_rows: Vec<Vec<String>> = accuracy
        .iter()
        .map(|(m, s)| {
            vec![
                m.clone(),
                format_sig(s.mse, 6),
                format_sig(s.mae, 6),
                format_sig(s.qlike, 6),
                format_sig(s.mape, 6),
            ]
        })
        .collect();
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format_sig(x, 4));
    let bt_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format!("{}-{}", r.model, r.quantile_method),
                r.side.to_string(),
                format_sig(r.violation_ratio, 4),
                format_sig(r.lr_uc, 4),
                format_sig(r.p_uc, 4),
                na(r.lr_ind),
                na(r.p_ind),
                na(r.lr_cc),
                na(r.p_cc),
                r.rank.to_string(),
            ]
        })
        .collect();
    let mut s = String::new();
    s.push_str("Forecast accuracy (test segment)\n\n");
    s.push_str(&table(&["model", "MSE", "MAE", "QLIKE", "MAPE"], &acc_rows));
    s.push_str(&format!(
        "\nVaR backtests at p0 = {}\n\n",
        format_sig(p0, 6)
    ));
    s.push_str(&table(
        &[
            "spec", "side", "ratio", "LR_uc", "p_uc", "LR_ind", "p_ind", "LR_cc", "p_cc", "rank",
        ],
        &bt_rows,
    ));
    s.push_str(
        "\nLR_uc: Kupiec unconditional coverage, chi2(1). LR_ind: Christoffersen \
         first-order independence, chi2(1).\nLR_cc = LR_uc + LR_ind, chi2(2). Ranks \
         order LR_uc within each side; NA marks series with no violations.\n",
    );
    s
}
