//! Autoregressive forecasting with differencing.
//!
//! AR coefficients are fit by conditional least squares on the differenced
//! series (ordinary least squares over a lagged design matrix, solved via
//! normal equations with partial pivoting). Moving-average terms are not
//! supported: the order is always `(p, d, 0)`. The rolling variant refits a
//! fresh model for every test sample over a constant-size history window.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Largest pivot ratio the least-squares solver accepts before declaring
/// the lag structure collinear.
const CONDITION_LIMIT: f64 = 1e12;

/// Order of the autoregression: `p` lags on the `d`-times differenced series.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArimaConfig {
    pub p: usize,
    pub d: usize,
    /// Moving-average order. Only 0 is supported.
    pub q: usize,
    pub include_intercept: bool,
}

impl Default for ArimaConfig {
    /// The tuned order used throughout the toolkit: 10 lags, one difference.
    fn default() -> Self {
        ArimaConfig {
            p: 10,
            d: 1,
            q: 0,
            include_intercept: true,
        }
    }
}

impl ArimaConfig {
    pub fn new(p: usize, d: usize) -> Self {
        ArimaConfig {
            p,
            d,
            q: 0,
            include_intercept: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q != 0 {
            return Err(Error::invalid("moving-average terms are unsupported (q must be 0)"));
        }
        if self.p + self.d == 0 {
            return Err(Error::invalid("p + d must be at least 1"));
        }
        Ok(())
    }

    /// Minimum series length `fit_ar` accepts: `p + d` warmup values plus a
    /// ten-sample identifiability margin.
    pub fn min_fit_len(&self) -> usize {
        self.p + self.d + 10
    }
}

/// A fitted autoregression.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub config: ArimaConfig,
    /// `coefficients[j]` multiplies the value `j + 1` steps back.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Last `p + d` raw observations of the training series; enough to seed
    /// one forecast without external history.
    pub training_tail: Vec<f64>,
}

/// Applies `d` rounds of first differencing.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>> {
    if series.len() <= d {
        return Err(Error::invalid(format!(
            "series of length {} cannot be differenced {} times",
            series.len(),
            d
        )));
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Differences and keeps the leading value of every intermediate level, so
/// [`undifference`] can reconstruct the input exactly.
pub fn difference_with_initials(series: &[f64], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if series.len() <= d {
        return Err(Error::invalid(format!(
            "series of length {} cannot be differenced {} times",
            series.len(),
            d
        )));
    }
    let mut level = series.to_vec();
    let mut initials = Vec::with_capacity(d);
    for _ in 0..d {
        initials.push(level[0]);
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok((level, initials))
}

/// Inverts [`difference_with_initials`] by cumulative summation.
///
/// The sums are carried in double-double precision across all levels and
/// rounded once at the end, so the round trip is exact to well under 1e-12
/// even for repeated differencing over long series.
pub fn undifference(diffed: &[f64], initials: &[f64]) -> Vec<f64> {
    // (hi, lo) value pairs with |lo| far below ulp(hi).
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bv = s - a;
        let err = (a - (s - bv)) + (b - bv);
        (s, err)
    }
    fn dd_add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
        let (s, e) = two_sum(a.0, b.0);
        let e = e + a.1 + b.1;
        two_sum(s, e)
    }

    let mut level: Vec<(f64, f64)> = diffed.iter().map(|&v| (v, 0.0)).collect();
    for &init in initials.iter().rev() {
        let mut rebuilt = Vec::with_capacity(level.len() + 1);
        let mut acc = (init, 0.0);
        rebuilt.push(acc);
        for &delta in &level {
            acc = dd_add(acc, delta);
            rebuilt.push(acc);
        }
        level = rebuilt;
    }
    level.into_iter().map(|(hi, lo)| hi + lo).collect()
}

/// Autocorrelation at lags `0..=max_lag`.
///
/// Uses the standard estimator with the full-series mean and variance in the
/// denominator, so lag 0 is exactly 1 and every value lies in `[-1, 1]`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag + 1 {
        return Err(Error::invalid(format!(
            "series of length {} is too short for max_lag {}",
            series.len(),
            max_lag
        )));
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let denom: f64 = series.iter().map(|&x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateVariance(
            "constant series has no autocorrelation".into(),
        ));
    }
    let mut acf = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let mut num = 0.0;
        for t in lag..n {
            num += (series[t] - mean) * (series[t - lag] - mean);
        }
        acf.push(num / denom);
    }
    acf[0] = 1.0;
    Ok(acf)
}

/// Smallest lag whose autocorrelation falls below `threshold`, or `fallback`
/// when none does within `max_lag`. With `threshold = 0.9` this reproduces
/// the tuning that settles on 10 lags for slowly varying sensor series.
pub fn recommend_lag(series: &[f64], max_lag: usize, threshold: f64, fallback: usize) -> Result<usize> {
    let acf = autocorrelation(series, max_lag)?;
    for (lag, &r) in acf.iter().enumerate().skip(1) {
        if r < threshold {
            return Ok(lag);
        }
    }
    Ok(fallback)
}

/// Fits an AR(p) regression on the `d`-times differenced series by
/// conditional least squares.
pub fn fit_ar(series: &[f64], config: &ArimaConfig) -> Result<ArModel> {
    config.validate()?;
    if series.len() < config.min_fit_len() {
        return Err(Error::invalid(format!(
            "series of length {} is shorter than the identifiability minimum {}",
            series.len(),
            config.min_fit_len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }

    let z = difference(series, config.d)?;
    let p = config.p;
    let n_rows = z.len() - p;
    let n_cols = p + usize::from(config.include_intercept);

    // A constant differenced series (constant or perfectly linear raw
    // series) makes every design column collinear. The exact minimizer is
    // still well defined; pick the deterministic one instead of failing.
    if let Some(&first) = z.first() {
        if z.iter().all(|&v| v == first) {
            let mut coefficients = alloc::vec![0.0; p];
            let mut intercept = 0.0;
            if config.include_intercept {
                intercept = first;
            } else if first != 0.0 && p > 0 {
                coefficients[0] = 1.0;
            }
            let tail_len = p + config.d;
            return Ok(ArModel {
                config: config.clone(),
                coefficients,
                intercept,
                training_tail: series[series.len() - tail_len..].to_vec(),
            });
        }
    }

    let (coefficients, intercept) = if n_cols == 0 {
        (Vec::new(), 0.0)
    } else {
        // Normal equations: gram = X^T X, rhs = X^T y, with the lagged design
        // X[t][j] = z[t + p - 1 - j] and an optional trailing ones column.
        let mut gram = alloc::vec![0.0; n_cols * n_cols];
        let mut rhs = alloc::vec![0.0; n_cols];
        let mut row = alloc::vec![0.0; n_cols];
        for t in 0..n_rows {
            for (j, slot) in row.iter_mut().enumerate().take(p) {
                *slot = z[t + p - 1 - j];
            }
            if config.include_intercept {
                row[p] = 1.0;
            }
            let y = z[t + p];
            for i in 0..n_cols {
                rhs[i] += row[i] * y;
                for j in 0..n_cols {
                    gram[i * n_cols + j] += row[i] * row[j];
                }
            }
        }
        let beta = solve_linear(&mut gram, &mut rhs, n_cols)?;
        let intercept = if config.include_intercept { beta[p] } else { 0.0 };
        (beta[..p].to_vec(), intercept)
    };

    let tail_len = p + config.d;
    Ok(ArModel {
        config: config.clone(),
        coefficients,
        intercept,
        training_tail: series[series.len() - tail_len..].to_vec(),
    })
}

/// Gaussian elimination with partial pivoting on `A x = b` (row-major `A`),
/// guarded by a pivot-ratio condition estimate.
fn solve_linear(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    let mut max_pivot = 0.0f64;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let mut pivot_row = col;
        let mut pivot_val = math::abs(a[col * n + col]);
        for r in col + 1..n {
            let v = math::abs(a[r * n + col]);
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val == 0.0 {
            return Err(Error::DegenerateFit(format!(
                "rank-deficient design: lag column {col} is a linear combination of earlier lags"
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            b.swap(col, pivot_row);
        }
        max_pivot = max_pivot.max(pivot_val);
        min_pivot = min_pivot.min(pivot_val);
        if max_pivot / min_pivot > CONDITION_LIMIT {
            return Err(Error::DegenerateFit(format!(
                "design matrix too ill-conditioned at lag column {col} (pivot ratio > {CONDITION_LIMIT:.0e})"
            )));
        }
        let pivot = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            a[r * n + col] = 0.0;
            for k in col + 1..n {
                a[r * n + k] -= factor * a[col * n + k];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col * n + k] * x[k];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(x)
}

/// One-step forecast in raw units.
///
/// The AR regression predicts the next value of the differenced series; the
/// prediction is then inverse-differenced against the trailing raw
/// observations of `history`.
pub fn forecast_next(model: &ArModel, history: &[f64]) -> Result<f64> {
    let need = model.config.p + model.config.d;
    if history.len() < need {
        return Err(Error::invalid(format!(
            "history of length {} cannot seed a forecast needing {need} observations",
            history.len()
        )));
    }
    let tail = &history[history.len() - need..];

    // Build every differencing level of the tail, keeping each level's last
    // value for the inversion below.
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(model.config.d + 1);
    levels.push(tail.to_vec());
    for _ in 0..model.config.d {
        let prev = levels.last().unwrap();
        levels.push(prev.windows(2).map(|w| w[1] - w[0]).collect());
    }

    let deepest = levels.last().unwrap();
    let mut pred = model.intercept;
    for (j, &c) in model.coefficients.iter().enumerate() {
        pred += c * deepest[deepest.len() - 1 - j];
    }
    // Undo the differencing one level at a time.
    for level in levels.iter().rev().skip(1) {
        pred += level.last().unwrap();
    }
    Ok(pred)
}

/// Refits a fresh model for every test sample over a sliding window.
///
/// The window size stays equal to the initial training length: each new
/// observation is appended and the oldest evicted. Returns the one-step
/// predictions over the test region and the number of models fitted.
pub fn rolling_refit_predict(
    series: &[f64],
    config: &ArimaConfig,
    train_fraction: f64,
) -> Result<(Vec<f64>, usize)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train_fraction must lie in (0, 1)"));
    }
    let train_len = math::floor(series.len() as f64 * train_fraction) as usize;
    rolling_refit_from(series, config, train_len)
}

/// Rolling refit with an explicit training length (see
/// [`rolling_refit_predict`]).
pub fn rolling_refit_from(
    series: &[f64],
    config: &ArimaConfig,
    train_len: usize,
) -> Result<(Vec<f64>, usize)> {
    if train_len >= series.len() {
        return Ok((Vec::new(), 0));
    }
    if train_len < config.min_fit_len() {
        return Err(Error::invalid(format!(
            "training region of {} samples is shorter than the fit minimum {}",
            train_len,
            config.min_fit_len()
        )));
    }
    let mut predictions = Vec::with_capacity(series.len() - train_len);
    let mut fitted = 0usize;
    for t in train_len..series.len() {
        let window = &series[t - train_len..t];
        let model = fit_ar(window, config).map_err(|e| Error::at(t, e))?;
        predictions.push(forecast_next(&model, window).map_err(|e| Error::at(t, e))?);
        fitted += 1;
    }
    Ok((predictions, fitted))
}
