//! Run configuration, read from TOML. Every key has a default except the
//! data path and the split dates; unknown keys are rejected.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{ForecastConfig, Split, TrainConfig, VolModel};
use crate::synth::SynthConfig;
use crate::tails::QuantileMethod;
use crate::var::{validate_p0, ModelSpec, Source};

/// LSTM hyperparameters; the seed comes from the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmSettings {
    pub lag_p: usize,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub val_fraction: f64,
    pub grad_clip: f64,
}

impl Default for LstmSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            lag_p: t.lag_p,
            hidden_size: t.hidden_size,
            learning_rate: t.learning_rate,
            max_epochs: t.max_epochs,
            patience: t.patience,
            val_fraction: t.val_fraction,
            grad_clip: t.grad_clip,
        }
    }
}

impl LstmSettings {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            lag_p: self.lag_p,
            hidden_size: self.hidden_size,
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            patience: self.patience,
            val_fraction: self.val_fraction,
            seed,
            grad_clip: self.grad_clip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArfimaSettings {
    pub max_p: usize,
    pub max_q: usize,
}

impl Default for ArfimaSettings {
    fn default() -> Self {
        Self { max_p: 1, max_q: 1 }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("output")
}

fn default_p0() -> f64 {
    0.01
}

fn default_models() -> Vec<VolModel> {
    VolModel::ALL.to_vec()
}

fn default_methods() -> Vec<QuantileMethod> {
    QuantileMethod::ALL.to_vec()
}

fn default_sources() -> Vec<Source> {
    vec![Source::Price]
}

fn default_refit_cadence() -> usize {
    22
}

/// Accepts a bare TOML date (`2015-12-31`) as well as a quoted one.
pub(crate) fn date<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Toml(toml::value::Datetime),
        Text(String),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Toml(dt) => match (dt.date, dt.time) {
            (Some(date), None) => date.to_string(),
            _ => {
                return Err(serde::de::Error::custom(format!(
                    "expected a date without time, got {dt}"
                )))
            }
        },
        Raw::Text(s) => s,
    };
    text.parse().map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Intraday bars CSV; written by `synth`, read by `ingest`.
    pub data_path: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_p0")]
    pub p0: f64,
    #[serde(deserialize_with = "date")]
    pub train_end: NaiveDate,
    #[serde(deserialize_with = "date")]
    pub val_end: NaiveDate,
    #[serde(deserialize_with = "date")]
    pub test_end: NaiveDate,
    #[serde(default = "default_models")]
    pub models: Vec<VolModel>,
    #[serde(default = "default_methods")]
    pub quantile_methods: Vec<QuantileMethod>,
    #[serde(default = "default_sources")]
    pub sources: Vec<Source>,
    #[serde(default = "default_refit_cadence")]
    pub refit_cadence: usize,
    #[serde(default)]
    pub arfima: ArfimaSettings,
    #[serde(default)]
    pub lstm: LstmSettings,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Read a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingInput(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data_path = base.join(&config.data_path);
        config.output_dir = base.join(&config.output_dir);
        Ok(config)
    }

    pub fn split(&self) -> Split {
        Split {
            train_end: self.train_end,
            val_end: self.val_end,
            test_end: self.test_end,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split().validate()?;
        validate_p0(self.p0)?;
        if self.models.is_empty() || self.quantile_methods.is_empty() || self.sources.is_empty() {
            return Err(Error::Config(
                "models, quantile_methods and sources must be non-empty".into(),
            ));
        }
        if self.refit_cadence == 0 {
            return Err(Error::Config("refit_cadence must be positive".into()));
        }
        self.lstm.train_config(self.seed).validate()?;
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        Ok(())
    }

    pub fn forecast_config(&self) -> ForecastConfig {
        ForecastConfig {
            refit_cadence: self.refit_cadence,
            lstm: self.lstm.train_config(self.seed),
            arfima_max_p: self.arfima.max_p,
            arfima_max_q: self.arfima.max_q,
        }
    }

    /// Every configured (model, method, source) combination, models outermost.
    pub fn specs(&self) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for &source in &self.sources {
            for &m in &self.models {
                for &q in &self.quantile_methods {
                    out.push(ModelSpec {
                        volatility_model: m,
                        quantile_method: q,
                        p0: self.p0,
                        source,
                    });
                }
            }
        }
        out
    }

    /// Hash of every setting that affects results. Paths are excluded: the
    /// output location does not change results and the input is tracked by
    /// its checksum.
    pub fn hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.data_path = PathBuf::new();
        semantic.output_dir = PathBuf::new();
        let json = serde_json::to_string(&semantic).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
data_path = "bars.csv"
train_end = 2014-12-31
val_end = 2015-12-31
test_end = 2017-12-31
"#;

    #[test]
    fn defaults_fill_everything_else() {
        let c = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.p0, 0.01);
        assert_eq!(c.models.len(), 6);
        assert_eq!(c.quantile_methods.len(), 3);
        assert_eq!(c.sources, vec![Source::Price]);
        assert_eq!(c.refit_cadence, 22);
        assert_eq!(c.lstm, LstmSettings::default());
        assert_eq!(c.specs().len(), 18);
        c.validate().unwrap();
    }

    #[test]
    fn dates_may_be_quoted() {
        let quoted = MINIMAL.replace("2014-12-31", "\"2014-12-31\"");
        assert_eq!(
            RunConfig::from_toml(&quoted).unwrap(),
            RunConfig::from_toml(MINIMAL).unwrap()
        );
        let stamped = MINIMAL.replace("2014-12-31", "2014-12-31T10:00:00");
        assert!(RunConfig::from_toml(&stamped).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let typo = format!("{MINIMAL}\nrefit_cadance = 5\n");
        assert!(matches!(RunConfig::from_toml(&typo), Err(Error::Config(_))));
        let nested = format!("{MINIMAL}\n[lstm]\nhiden_size = 4\n");
        assert!(RunConfig::from_toml(&nested).is_err());
    }

    #[test]
    fn split_order_is_validated() {
        let bad = MINIMAL.replace("val_end = 2015-12-31", "val_end = 2014-01-31");
        let c = RunConfig::from_toml(&bad).unwrap();
        assert!(c.validate().unwrap_err().is_validation());
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let a = RunConfig::from_toml(MINIMAL).unwrap();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        b.data_path = PathBuf::from("/tmp/other.csv");
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.lstm.hidden_size = 4;
        assert_ne!(a.hash(), c.hash());
        let mut d = a.clone();
        d.seed = 1;
        assert_ne!(a.hash(), d.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
