use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{lstm_forward, lstm_gradients, LstmParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of lagged observations fed to the network.
    pub lag_p: usize,
    pub hidden_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    /// Trailing share of the samples held out for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lag_p: 22,
            hidden_size: 8,
            learning_rate: 1e-2,
            max_epochs: 200,
            patience: 10,
            val_fraction: 0.10,
            seed: 0,
            grad_clip: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lstm: {m}")));
        if self.lag_p == 0 {
            return bad("lag_p must be positive");
        }
        if self.hidden_size == 0 {
            return bad("hidden_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad("val_fraction must lie in (0, 1)");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be positive");
        }
        Ok(())
    }
}

/// One supervised example: `lag_p` input vectors (oldest first) and the
/// value that follows them.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub window: Vec<Vec<f64>>,
    pub target: f64,
}

/// Per-channel affine scaling applied before the network sees the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Scaler {
    fn fit(samples: &[Sample]) -> Self {
        let channels = samples[0].window[0].len();
        let mut input_mean = Vec::with_capacity(channels);
        let mut input_std = Vec::with_capacity(channels);
        for ch in 0..channels {
            // The last element of every window covers each observation once
            // apart from the warm-up, which is close enough for scaling.
            let xs: Vec<f64> = samples
                .iter()
                .map(|s| s.window[s.window.len() - 1][ch])
                .collect();
            let (m, sd) = moments(&xs);
            input_mean.push(m);
            input_std.push(sd);
        }
        let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
        let (target_mean, target_std) = moments(&targets);
        Self {
            input_mean,
            input_std,
            target_mean,
            target_std,
        }
    }

    fn scale_window(&self, window: &[Vec<f64>]) -> Vec<Vec<f64>> {
        window
            .iter()
            .map(|x| {
                x.iter()
                    .enumerate()
                    .map(|(c, v)| (v - self.input_mean[c]) / self.input_std[c])
                    .collect()
            })
            .collect()
    }
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    let sd = var.sqrt();
    // constant channels pass through centered but unscaled
    (m, if sd > 1e-12 { sd } else { 1.0 })
}

/// Trained network together with its input/target scaling and the
/// configuration it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub params: LstmParams,
    pub scaler: Scaler,
    pub config: TrainConfig,
}

impl LstmModel {
    /// Forecast the value following `window` (unscaled, oldest first).
    pub fn predict(&self, window: &[Vec<f64>]) -> Result<f64> {
        let (y, _) = lstm_forward(&self.params, &self.scaler.scale_window(window))?;
        Ok(self.scaler.target_mean + self.scaler.target_std * y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

fn mean_loss(params: &LstmParams, samples: &[(Vec<Vec<f64>>, f64)]) -> Result<f64> {
    let mut total = 0.0;
    for (w, y) in samples {
        let (p, _) = lstm_forward(params, w)?;
        total += (p - y) * (p - y);
    }
    Ok(total / samples.len() as f64)
}

/// Plain SGD over shuffled samples with global-norm clipping; the trailing
/// `val_fraction` of the samples (chronological order) drives early stopping
/// and the parameters with the lowest validation loss are returned.
pub fn train_lstm(samples: &[Sample], config: &TrainConfig) -> Result<(LstmModel, TrainingLog)> {
    config.validate()?;
    let needed = config.lag_p + 10;
    if samples.len() < needed {
        return Err(Error::TooFewObservations {
            needed,
            got: samples.len(),
        });
    }
    let input_size = samples[0].window.first().map_or(0, Vec::len);
    if input_size == 0
        || samples
            .iter()
            .any(|s| s.window.is_empty() || s.window.iter().any(|x| x.len() != input_size))
    {
        return Err(Error::DimensionMismatch(
            "samples disagree on window shape".into(),
        ));
    }

    let n_val =
        ((samples.len() as f64 * config.val_fraction).round() as usize).clamp(1, samples.len() - 1);
    let n_train = samples.len() - n_val;
    let scaler = Scaler::fit(&samples[..n_train]);
    let scaled: Vec<(Vec<Vec<f64>>, f64)> = samples
        .iter()
        .map(|s| {
            (
                scaler.scale_window(&s.window),
                (s.target - scaler.target_mean) / scaler.target_std,
            )
        })
        .collect();
    let (train, val) = scaled.split_at(n_train);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::init(input_size, config.hidden_size, &mut rng);
    let mut best = params.clone();
    let mut log = TrainingLog {
        best_val_loss: mean_loss(&params, val)?,
        ..TrainingLog::default()
    };
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut train_loss = 0.0;
        for &k in &order {
            let (window, target) = &train[k];
            let (mut grad, loss) =
                lstm_gradients(&params, window, *target).map_err(|_| Error::Diverged { epoch })?;
            let norm = grad.norm();
            if norm > config.grad_clip {
                grad.scale(config.grad_clip / norm);
            }
            params.add_scaled(&grad, -config.learning_rate);
            train_loss += loss;
        }
        train_loss /= n_train as f64;
        let val_loss = mean_loss(&params, val)?;
        if !train_loss.is_finite() || !val_loss.is_finite() || !params.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        log.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < log.best_val_loss {
            log.best_val_loss = val_loss;
            log.best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log.stopped_early = true;
                break;
            }
        }
    }

    Ok((
        LstmModel {
            params: best,
            scaler,
            config: config.clone(),
        },
        log,
    ))
}

/// Sliding windows over aligned channels: the window ending at index `t - 1`
/// predicts `target[t]`.
pub fn make_samples(channels: &[&[f64]], target: &[f64], lag: usize) -> Vec<Sample> {
    (lag..target.len())
        .map(|t| Sample {
            window: (t - lag..t)
                .map(|s| channels.iter().map(|c| c[s]).collect())
                .collect(),
            target: target[t],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(seed: u64) -> TrainConfig {
        TrainConfig {
            lag_p: 3,
            hidden_size: 3,
            max_epochs: 30,
            patience: 5,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn constant_series_is_learned() {
        let c = -8.5;
        let series = vec![c; 200];
        let samples = make_samples(&[&series], &series, 3);
        let (model, _) = train_lstm(&samples, &quick_config(1)).unwrap();
        let forecast = model.predict(&samples[0].window).unwrap();
        assert!((forecast - c).abs() < 1e-2, "{forecast}");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let series: Vec<f64> = (0..150).map(|i| (i as f64 * 0.3).sin()).collect();
        let samples = make_samples(&[&series], &series, 3);
        let (a, la) = train_lstm(&samples, &quick_config(7)).unwrap();
        let (b, lb) = train_lstm(&samples, &quick_config(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = train_lstm(&samples, &quick_config(8)).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn too_few_samples() {
        let series = vec![1.0; 12];
        let samples = make_samples(&[&series], &series, 3);
        assert!(matches!(
            train_lstm(&samples, &quick_config(0)),
            Err(Error::TooFewObservations { needed: 13, got: 9 })
        ));
    }

    #[test]
    fn exploding_learning_rate_diverges() {
        let series: Vec<f64> = (0..150).map(|i| ((i * 7919) % 113) as f64).collect();
        let samples = make_samples(&[&series], &series, 3);
        let config = TrainConfig {
            learning_rate: 1e308,
            grad_clip: 1e308,
            ..quick_config(0)
        };
        assert!(matches!(
            train_lstm(&samples, &config),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn windows_are_aligned_with_targets() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [10.0, 20.0, 30.0, 40.0];
        let s = make_samples(&[&a, &b], &a, 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].window, vec![vec![1.0, 10.0], vec![2.0, 20.0]]);
        assert_eq!(s[0].target, 3.0);
        assert_eq!(s[1].target, 4.0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig {
            patience: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            val_fraction: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
