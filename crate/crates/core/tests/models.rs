use chrono::{Duration, NaiveDate};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use volrisk::marketdata::RvSeries;
use volrisk::models::arfima::arfima_candidate_aic;
use volrisk::models::{
    arfima_fit, frac_diff_weights, har_fit, har_forecast, load_model, lstm_cell, lstm_forward,
    lstm_gradients, make_samples, rolling_forecast, save_model, train_lstm, FittedModel,
    ForecastConfig, HarVariant, LstmParams, LstmState, Split, TrainConfig, VolInputs, VolModel,
};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Straightforward re-derivation of the forward pass, kept independent of
/// the library's matrix helpers.
fn reference_forward(p: &LstmParams, seq: &[Vec<f64>]) -> f64 {
    let n = p.hidden_size;
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for x in seq {
        let pre = |g: &volrisk::models::Gate, j: usize| {
            let mut s = g.b[j];
            for (k, xk) in x.iter().enumerate() {
                s += g.w_x.data[j * p.input_size + k] * xk;
            }
            for (k, hk) in h.iter().enumerate() {
                s += g.w_h.data[j * n + k] * hk;
            }
            s
        };
        let mut h_new = vec![0.0; n];
        let mut c_new = vec![0.0; n];
        for j in 0..n {
            let i = sigmoid(pre(&p.input_gate, j));
            let f = sigmoid(pre(&p.forget_gate, j));
            let g = pre(&p.cell_gate, j).tanh();
            let o = sigmoid(pre(&p.output_gate, j));
            c_new[j] = f * c[j] + i * g;
            h_new[j] = o * c_new[j].tanh();
        }
        h = h_new;
        c = c_new;
    }
    p.b_y + p.w_y.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>()
}

fn random_net(
    seed: u64,
    input: usize,
    hidden: usize,
    lag: usize,
) -> (LstmParams, Vec<Vec<f64>>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = LstmParams::init(input, hidden, &mut rng);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let seq: Vec<Vec<f64>> = (0..lag)
        .map(|_| (0..input).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let target = rng.random_range(-1.0..1.0);
    (params, seq, target)
}

fn max_gradient_error(params: &LstmParams, seq: &[Vec<f64>], target: f64) -> f64 {
    let (grad, _) = lstm_gradients(params, seq, target).unwrap();
    let analytic: Vec<f64> = grad.tensors().concat();
    let loss = |p: &LstmParams| {
        let (pred, _) = lstm_forward(p, seq).unwrap();
        (pred - target).powi(2)
    };
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    let sizes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    for (ti, size) in sizes.into_iter().enumerate() {
        for j in 0..size {
            let mut plus = params.clone();
            plus.tensors_mut()[ti][j] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti][j] -= h;
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
            k += 1;
        }
    }
    worst
}

#[test]
fn bptt_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for config in 0..24 {
        let hidden = rng.random_range(1..=4);
        let lag = rng.random_range(1..=6);
        let input = rng.random_range(1..=2);
        let (params, seq, target) = random_net(config, input, hidden, lag);
        let err = max_gradient_error(&params, &seq, target);
        assert!(err < 1e-4, "config {config} (h={hidden}, lag={lag}): {err}");
    }
    let (params, seq, target) = random_net(77, 1, 3, 4);
    assert!(max_gradient_error(&params, &seq, target) < 1e-4);
}

#[test]
fn forward_matches_reference_implementation() {
    let (params, seq, _) = random_net(5, 1, 2, 3);
    let (pred, states) = lstm_forward(&params, &seq).unwrap();
    assert_eq!(states.len(), 3);
    assert!((pred - reference_forward(&params, &seq)).abs() < 1e-10);
    for seed in 0..10 {
        let (params, seq, _) = random_net(100 + seed, 2, 4, 6);
        let (pred, _) = lstm_forward(&params, &seq).unwrap();
        assert!((pred - reference_forward(&params, &seq)).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn hidden_state_is_bounded(
        seed in 0u64..10_000,
        x in proptest::collection::vec(-5.0f64..5.0, 2),
        c0 in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = LstmParams::init(2, 3, &mut rng);
        for t in params.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.random_range(-3.0..3.0);
            }
        }
        let state = LstmState { h: vec![0.1, -0.4, 0.9], c: c0 };
        let next = lstm_cell(&params, &x, &state).unwrap();
        for v in &next.h {
            prop_assert!(v.abs() < 1.0);
        }
        prop_assert!(next.c.iter().all(|v| v.is_finite()));
    }
}

fn ar1(n: usize, mu: f64, phi: f64, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = mu;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n + 200 {
        let e: f64 = StandardNormal.sample(&mut rng);
        x = mu + phi * (x - mu) + sigma * e;
        out.push(x);
    }
    out.split_off(200)
}

#[test]
fn lstm_learns_ar1_dynamics() {
    let sigma = 0.4;
    let x = ar1(2000, -9.0, 0.7, sigma, 17);
    let config = TrainConfig::default();
    let samples = make_samples(&[&x], &x, config.lag_p);
    let cut = 1600 - config.lag_p;
    let (model, log) = train_lstm(&samples[..cut], &config).unwrap();
    assert!(log.best_val_loss.is_finite());
    let mse: f64 = samples[cut..]
        .iter()
        .map(|s| (model.predict(&s.window).unwrap() - s.target).powi(2))
        .sum::<f64>()
        / (samples.len() - cut) as f64;
    assert!(
        mse <= 1.1 * sigma * sigma,
        "test MSE {mse} vs {}",
        sigma * sigma
    );
}

/// ARFIMA(0, d, 0) by truncated MA(infinity) expansion with burn-in.
fn fractional_noise(n: usize, d: f64, seed: u64) -> Vec<f64> {
    let burn = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<f64> = (0..n + burn)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let psi = frac_diff_weights(-d, n + burn);
    (burn..n + burn)
        .map(|t| (0..=t).map(|k| psi[k] * e[t - k]).sum::<f64>())
        .collect()
}

/// AIC admits one spurious extra parameter with probability P(chi2(1) > 2),
/// about 16%, so white noise is recovered in roughly 80% of samples.
#[test]
fn arfima_selects_white_noise() {
    let seeds: Vec<u64> = (0..40).collect();
    let hits = seeds
        .par_iter()
        .filter(|&&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
            let x: Vec<f64> = (0..2000)
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    -8.0 + 0.5 * e
                })
                .collect();
            let fit = arfima_fit(&x, 1, 1).unwrap();
            fit.ar.is_empty() && fit.ma.is_empty() && fit.d <= 0.05 + 1e-12
        })
        .count();
    assert!(hits >= 30, "{hits}/40");
}

#[test]
fn arfima_recovers_long_memory() {
    let seeds: Vec<u64> = (0..10).collect();
    let hits = seeds
        .par_iter()
        .filter(|&&seed| {
            let x = fractional_noise(5000, 0.3, 900 + seed);
            let fit = arfima_fit(&x, 1, 1).unwrap();
            (fit.d - 0.3).abs() <= 0.1 + 1e-12
        })
        .count();
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn arfima_choice_minimizes_aic() {
    let x = fractional_noise(400, 0.2, 3);
    let fit = arfima_fit(&x, 1, 1).unwrap();
    for step in 0..10 {
        let d = step as f64 * 0.05;
        for p in 0..=1 {
            for q in 0..=1 {
                if let Some(aic) = arfima_candidate_aic(&x, d, p, q, 1, 1).unwrap() {
                    assert!(fit.aic <= aic + 1e-9, "d={d} p={p} q={q}");
                }
            }
        }
    }
}

fn synthetic_rv(n: usize, seed: u64) -> RvSeries {
    let logs = ar1(n, -9.0, 0.9, 0.3, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let rv: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    let rq: Vec<f64> = rv
        .iter()
        .map(|v| v * v * rng.random_range(0.5..3.0))
        .collect();
    RvSeries {
        dates: (0..n).map(|i| start + Duration::days(i as i64)).collect(),
        rv,
        rq: Some(rq),
    }
}

fn split_for(series: &RvSeries, train: usize, val: usize, test: usize) -> Split {
    Split {
        train_end: series.dates[train - 1],
        val_end: series.dates[val - 1],
        test_end: series.dates[test - 1],
    }
}

fn quick_config() -> ForecastConfig {
    ForecastConfig {
        lstm: TrainConfig {
            lag_p: 5,
            hidden_size: 3,
            max_epochs: 15,
            ..TrainConfig::default()
        },
        ..ForecastConfig::default()
    }
}

#[test]
fn one_day_test_range_gives_one_forecast() {
    let s = synthetic_rv(400, 1);
    let split = split_for(&s, 300, 350, 351);
    let inputs = VolInputs {
        target: &s,
        companion: None,
    };
    for model in [
        VolModel::Har,
        VolModel::Harqf,
        VolModel::Arfima,
        VolModel::Lstm,
    ] {
        let f = rolling_forecast(model, inputs, &split, &quick_config(), None).unwrap();
        assert_eq!(f.forecast.len(), 1);
        assert_eq!(f.dates, vec![s.dates[350]]);
        assert_eq!(f.actual, vec![s.rv[350]]);
    }
}

#[test]
fn forecasts_do_not_see_the_future() {
    let s = synthetic_rv(420, 2);
    let companion = synthetic_rv(420, 3);
    let split = split_for(&s, 300, 350, 420);
    let config = quick_config();
    let probe = 380;
    let mut poisoned = s.clone();
    let mut poisoned_companion = companion.clone();
    for i in probe..s.len() {
        poisoned.rv[i] *= 50.0;
        poisoned.rq.as_mut().unwrap()[i] *= 7.0;
        poisoned_companion.rv[i] *= 3.0;
    }
    for model in VolModel::ALL {
        let clean = rolling_forecast(
            model,
            VolInputs {
                target: &s,
                companion: Some(&companion),
            },
            &split,
            &config,
            None,
        )
        .unwrap();
        let dirty = rolling_forecast(
            model,
            VolInputs {
                target: &poisoned,
                companion: Some(&poisoned_companion),
            },
            &split,
            &config,
            None,
        )
        .unwrap();
        // forecasts for days up to and including the first poisoned day
        let k = probe - 350 + 1;
        assert_eq!(clean.forecast[..k], dirty.forecast[..k], "{model}");
    }
}

#[test]
fn har_rolling_matches_hand_loop() {
    let s = synthetic_rv(500, 4);
    let split = split_for(&s, 350, 400, 500);
    let config = ForecastConfig::default();
    let inputs = VolInputs {
        target: &s,
        companion: None,
    };
    let rq = s.rq.as_deref().unwrap();
    for (model, variant) in [
        (VolModel::Har, HarVariant::Har),
        (VolModel::Harq, HarVariant::Harq),
    ] {
        let rolled = rolling_forecast(model, inputs, &split, &config, None).unwrap();
        let mut coefs = None;
        for (j, t) in (400..500).enumerate() {
            if j % 22 == 0 {
                coefs = Some(har_fit(&s.rv[..t], Some(&rq[..t]), variant).unwrap());
            }
            let f = har_forecast(coefs.as_ref().unwrap(), &s.rv[..t], Some(&rq[..t])).unwrap();
            assert_eq!(f, rolled.forecast[j]);
        }
    }
}

#[test]
fn split_errors() {
    let s = synthetic_rv(300, 5);
    let inputs = VolInputs {
        target: &s,
        companion: None,
    };
    let bad = Split {
        train_end: s.dates[200],
        val_end: s.dates[100],
        test_end: s.dates[250],
    };
    assert!(rolling_forecast(VolModel::Har, inputs, &bad, &quick_config(), None).is_err());
    // test window beyond the data is empty
    let empty = Split {
        train_end: s.dates[200],
        val_end: s.dates[299],
        test_end: s.dates[299] + Duration::days(10),
    };
    assert!(rolling_forecast(VolModel::Har, inputs, &empty, &quick_config(), None).is_err());
}

#[test]
fn saved_models_forecast_identically() {
    let s = synthetic_rv(420, 6);
    let companion = synthetic_rv(420, 7);
    let inputs = VolInputs {
        target: &s,
        companion: Some(&companion),
    };
    let config = quick_config();
    for model in VolModel::ALL {
        let fitted = volrisk::models::fit_model(model, inputs, 380, &config).unwrap();
        let text = save_model(&fitted).unwrap();
        let back: FittedModel = load_model(&text).unwrap();
        assert_eq!(back.model(), model);
        for upto in [380, 400, 419] {
            let a = fitted.forecast(inputs, upto).unwrap();
            let b = back.forecast(inputs, upto).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{model}");
        }
    }
}

#[test]
fn training_is_reproducible() {
    let s = synthetic_rv(300, 8);
    let split = split_for(&s, 220, 260, 300);
    let inputs = VolInputs {
        target: &s,
        companion: None,
    };
    let a = rolling_forecast(VolModel::Lstm, inputs, &split, &quick_config(), None).unwrap();
    let b = rolling_forecast(VolModel::Lstm, inputs, &split, &quick_config(), None).unwrap();
    assert_eq!(a, b);
}
