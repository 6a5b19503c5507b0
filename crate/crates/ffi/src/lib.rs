//! C ABI over the volrisk engine.
//!
//! Every fallible function returns a [`VrStatus`]; on failure the message is
//! available from [`vr_last_error_message`] on the same thread until the next
//! failing call. Results are written through out-pointers, which are left
//! untouched on failure. Handles are opaque and must be released with the
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chrono::{Duration, NaiveDate};
use volrisk::backtest::{accuracy_scores, chi2_sf, christoffersen_ind, kupiec_lr, ViolationSeries};
use volrisk::marketdata::{
    realized_quarticity, realized_volatility, IntradayBar, RvSeries, TradingDay,
};
use volrisk::models::{
    fit_model, load_model, save_model, FittedModel, ForecastConfig, VolInputs, VolModel,
};
use volrisk::tails::gpd::{evt_quantile, fit_gpd, GpdFit};
use volrisk::tails::TailSide;
use volrisk::var::Side;
use volrisk::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument is out of range or inconsistent.
    InvalidArgument = 2,
    /// Not enough observations, exceedances or violations.
    InsufficientData = 3,
    /// A numerical routine failed.
    Computation = 4,
    /// Model text could not be parsed or produced.
    Serialization = 5,
    /// The engine panicked; this is a bug.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrTail {
    /// Losses of a long position (negative returns).
    Left = 0,
    /// Losses of a short position (positive returns).
    Right = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VrModelKind {
    LstmRv = 0,
    Lstm = 1,
    Har = 2,
    Harq = 3,
    Harqf = 4,
    Arfima = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VrAccuracy {
    pub mse: f64,
    pub mae: f64,
    pub qlike: f64,
    pub mape: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VrGpdParams {
    pub xi: f64,
    pub beta: f64,
    /// Threshold in the tail-oriented (positive) direction.
    pub u: f64,
    pub n: usize,
    pub n_u: usize,
}

/// Fitted generalized Pareto tail.
pub struct VrGpdFit(GpdFit);

/// Fitted volatility model.
pub struct VrModel(FittedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(VrStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn status_of(e: &Error) -> VrStatus {
    match e {
        Error::Spec { source, .. } => status_of(source),
        Error::TooFewObservations { .. }
        | Error::InsufficientExceedances { .. }
        | Error::ZeroVariance
        | Error::DegenerateSeries => VrStatus::InsufficientData,
        Error::MalformedRow { .. }
        | Error::NonPositivePrice { .. }
        | Error::OutOfOrderTimestamp { .. }
        | Error::DimensionMismatch(_)
        | Error::InvalidParameter(_)
        | Error::OutsideSupport { .. }
        | Error::QuantileNotInTail { .. }
        | Error::DateMisalignment(_)
        | Error::InvalidSplit(_)
        | Error::Config(_) => VrStatus::InvalidArgument,
        Error::Serde(_) | Error::Io { .. } | Error::MissingInput(_) => VrStatus::Serialization,
        _ => VrStatus::Computation,
    }
}

fn null(what: &str) -> Failure {
    Failure(VrStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(VrStatus::InvalidArgument, message.into())
}

/// Run `f`, converting errors and panics into a status code.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> VrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VrStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {message}"));
            VrStatus::Panic
        }
    }
}

/// # Safety
/// `data` must be null or point to `len` readable values.
unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// # Safety
/// `out` must be null or valid for a write of `T`.
unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn tail_side(tail: VrTail) -> TailSide {
    match tail {
        VrTail::Left => TailSide::Left,
        VrTail::Right => TailSide::Right,
    }
}

fn vol_model(kind: VrModelKind) -> VolModel {
    match kind {
        VrModelKind::LstmRv => VolModel::LstmRv,
        VrModelKind::Lstm => VolModel::Lstm,
        VrModelKind::Har => VolModel::Har,
        VrModelKind::Harq => VolModel::Harq,
        VrModelKind::Harqf => VolModel::Harqf,
        VrModelKind::Arfima => VolModel::Arfima,
    }
}

fn model_kind(model: VolModel) -> VrModelKind {
    match model {
        VolModel::LstmRv => VrModelKind::LstmRv,
        VolModel::Lstm => VrModelKind::Lstm,
        VolModel::Har => VrModelKind::Har,
        VolModel::Harq => VrModelKind::Harq,
        VolModel::Harqf => VrModelKind::Harqf,
        VolModel::Arfima => VrModelKind::Arfima,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

fn day_from_prices(prices: &[f64]) -> TradingDay {
    let date = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    let open = date.and_hms_opt(9, 30, 0).expect("valid time");
    TradingDay {
        date,
        bars: prices
            .iter()
            .enumerate()
            .map(|(i, &price)| IntradayBar {
                timestamp: open + Duration::minutes(5 * i as i64),
                price,
                volume: 0.0,
            })
            .collect(),
    }
}

fn check_prices(prices: &[f64]) -> Result<(), Failure> {
    match prices.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
        Some(i) => Err(invalid(format!(
            "price {} at index {i} is not positive and finite",
            prices[i]
        ))),
        None => Ok(()),
    }
}

/// Realized variance of one day: the sum of squared log returns between
/// consecutive intraday prices.
///
/// # Safety
/// `prices` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_realized_variance(
    prices: *const f64,
    n: usize,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let prices = slice(prices, n, "prices")?;
        check_prices(prices)?;
        let rv = realized_volatility(&day_from_prices(prices))?;
        write(out, rv, "out")
    })
}

/// Realized quarticity of one day, `(m/3) * sum r^4` over the `m` returns.
///
/// # Safety
/// `prices` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_realized_quarticity(
    prices: *const f64,
    n: usize,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let prices = slice(prices, n, "prices")?;
        check_prices(prices)?;
        let rq = realized_quarticity(&day_from_prices(prices))?;
        write(out, rq, "out")
    })
}

/// Kupiec unconditional coverage for `x` violations in `n` days.
///
/// # Safety
/// `lr` and `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_kupiec_uc(
    n: usize,
    x: usize,
    p0: f64,
    lr: *mut f64,
    p_value: *mut f64,
) -> VrStatus {
    guard(|| {
        if lr.is_null() || p_value.is_null() {
            return Err(null("output pointer"));
        }
        let stat = kupiec_lr(n, x, p0)?;
        write(lr, stat, "lr")?;
        write(p_value, chi2_sf(stat, 1.0), "p_value")
    })
}

/// Christoffersen independence test on a 0/1 violation sequence.
///
/// # Safety
/// `indicators` must point to `n` bytes; `lr` and `p_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_christoffersen_ind(
    indicators: *const u8,
    n: usize,
    lr: *mut f64,
    p_value: *mut f64,
) -> VrStatus {
    guard(|| {
        let indicators = slice(indicators, n, "indicators")?;
        if lr.is_null() || p_value.is_null() {
            return Err(null("output pointer"));
        }
        if let Some(i) = indicators.iter().position(|&b| b > 1) {
            return Err(invalid(format!(
                "indicator {} at index {i} is not 0 or 1",
                indicators[i]
            )));
        }
        let series = ViolationSeries {
            dates: Vec::new(),
            indicators: indicators.to_vec(),
            side: Side::Long,
            p0: 0.01,
        };
        let (stat, p) = christoffersen_ind(&series)?;
        write(lr, stat, "lr")?;
        write(p_value, p, "p_value")
    })
}

/// MSE, MAE, QLIKE and MAPE of `forecast` against `actual`.
///
/// # Safety
/// `actual` and `forecast` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_accuracy(
    actual: *const f64,
    forecast: *const f64,
    n: usize,
    out: *mut VrAccuracy,
) -> VrStatus {
    guard(|| {
        let actual = slice(actual, n, "actual")?;
        let forecast = slice(forecast, n, "forecast")?;
        let s = accuracy_scores(actual, forecast)?;
        write(
            out,
            VrAccuracy {
                mse: s.mse,
                mae: s.mae,
                qlike: s.qlike,
                mape: s.mape,
            },
            "out",
        )
    })
}

/// Tail quantile of a GPD tail given directly by its parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_evt_quantile(
    u: f64,
    beta: f64,
    xi: f64,
    n: usize,
    n_u: usize,
    p0: f64,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let fit = GpdFit {
            xi,
            beta,
            u,
            n,
            n_u,
            tail: TailSide::Right,
        };
        write(out, evt_quantile(&fit, p0)?, "out")
    })
}

/// Fit a GPD to one tail of a standardized sample. On success `*out` owns a
/// new handle.
///
/// # Safety
/// `values` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_gpd_fit(
    values: *const f64,
    n: usize,
    tail: VrTail,
    out: *mut *mut VrGpdFit,
) -> VrStatus {
    guard(|| {
        let values = slice(values, n, "values")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let fit = fit_gpd(values, tail_side(tail))?;
        write(out, Box::into_raw(Box::new(VrGpdFit(fit))), "out")
    })
}

/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_gpd_params(fit: *const VrGpdFit, out: *mut VrGpdParams) -> VrStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null("fit"))?.0;
        write(
            out,
            VrGpdParams {
                xi: fit.xi,
                beta: fit.beta,
                u: fit.u,
                n: fit.n,
                n_u: fit.n_u,
            },
            "out",
        )
    })
}

/// Tail quantile exceeded with probability `p0`, as a positive magnitude in
/// the fitted tail's direction.
///
/// # Safety
/// `fit` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_gpd_quantile(fit: *const VrGpdFit, p0: f64, out: *mut f64) -> VrStatus {
    guard(|| {
        let fit = &fit.as_ref().ok_or_else(|| null("fit"))?.0;
        write(out, evt_quantile(fit, p0)?, "out")
    })
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vr_gpd_free(fit: *mut VrGpdFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Consecutive calendar dates; models only need a consistent axis.
fn rv_series(rv: &[f64], rq: Option<&[f64]>) -> RvSeries {
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    RvSeries {
        dates: (0..rv.len())
            .map(|i| start + Duration::days(i as i64))
            .collect(),
        rv: rv.to_vec(),
        rq: rq.map(<[f64]>::to_vec),
    }
}

struct SeriesArgs {
    target: RvSeries,
    companion: Option<RvSeries>,
}

impl SeriesArgs {
    /// # Safety
    /// Non-null pointers must point to `n` values.
    unsafe fn new(
        rv: *const f64,
        rq: *const f64,
        companion: *const f64,
        n: usize,
    ) -> Result<Self, Failure> {
        let rv = slice(rv, n, "rv")?;
        let rq = if rq.is_null() {
            None
        } else {
            Some(slice(rq, n, "rq")?)
        };
        let companion = if companion.is_null() {
            None
        } else {
            Some(rv_series(slice(companion, n, "companion")?, None))
        };
        Ok(Self {
            target: rv_series(rv, rq),
            companion,
        })
    }

    fn inputs(&self) -> VolInputs<'_> {
        VolInputs {
            target: &self.target,
            companion: self.companion.as_ref(),
        }
    }
}

/// Fit a volatility model on `n` daily realized variances. `rq` (realized
/// quarticity) is required by HARQ and HARQF and may be null otherwise;
/// `companion` (the volume RV series) is required by LSTM-RV. `seed` drives
/// LSTM initialization. On success `*out` owns a new handle.
///
/// # Safety
/// Non-null input pointers must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_model_fit(
    kind: VrModelKind,
    rv: *const f64,
    rq: *const f64,
    companion: *const f64,
    n: usize,
    seed: u64,
    out: *mut *mut VrModel,
) -> VrStatus {
    guard(|| {
        let args = SeriesArgs::new(rv, rq, companion, n)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut config = ForecastConfig::default();
        config.lstm.seed = seed;
        let model = vol_model(kind);
        let fitted =
            fit_model(model, args.inputs(), n, &config).map_err(|e| e.for_spec(model.name()))?;
        write(out, Box::into_raw(Box::new(VrModel(fitted))), "out")
    })
}

/// Next-day variance forecast after the `n` observations given.
///
/// # Safety
/// `model` must be a live handle; non-null input pointers must point to `n`
/// values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_model_forecast(
    model: *const VrModel,
    rv: *const f64,
    rq: *const f64,
    companion: *const f64,
    n: usize,
    out: *mut f64,
) -> VrStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let args = SeriesArgs::new(rv, rq, companion, n)?;
        write(out, model.forecast(args.inputs(), n)?, "out")
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_model_kind(model: *const VrModel, out: *mut VrModelKind) -> VrStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        write(out, model_kind(model.model()), "out")
    })
}

/// Serialize a fitted model to JSON text. On success `*out` owns a string
/// that must be released with [`vr_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_model_save(model: *const VrModel, out: *mut *mut c_char) -> VrStatus {
    guard(|| {
        let model = &model.as_ref().ok_or_else(|| null("model"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CString::new(save_model(model)?)
            .map_err(|e| Failure(VrStatus::Serialization, e.to_string()))?;
        write(out, text.into_raw(), "out")
    })
}

/// Restore a model saved by [`vr_model_save`].
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vr_model_load(json: *const c_char, out: *mut *mut VrModel) -> VrStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(VrStatus::Serialization, e.to_string()))?;
        let model = load_model(text)?;
        write(out, Box::into_raw(Box::new(VrModel(model))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vr_model_free(model: *mut VrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
