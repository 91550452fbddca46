//! Relative-error anomaly rule over any one-step forecaster.
//!
//! A sample is anomalous when the forecast misses the observation by more
//! than a fraction of the forecast itself (20% by default). The rule is
//! two-sided; the literal one-sided form, which only flags observations
//! below the forecast, stays available behind [`AnomalyRule::two_sided`].

use alloc::string::String;
use alloc::vec::Vec;

use crate::arima::{self, ArimaConfig};
use crate::error::{Error, Result};
use crate::lstm::{self, WindowSpec};
use crate::math;
use crate::nn::TrainConfig;

/// Threshold rule on the relative forecast error.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRule {
    /// Relative-error threshold; 0.2 flags misses above 20%.
    pub threshold: f64,
    /// Floor for the denominator so zero-valued forecasts stay finite.
    pub denominator_floor: f64,
    /// When false, only observations below the forecast are flagged.
    pub two_sided: bool,
}

impl Default for AnomalyRule {
    fn default() -> Self {
        AnomalyRule {
            threshold: 0.2,
            denominator_floor: 1e-6,
            two_sided: true,
        }
    }
}

impl AnomalyRule {
    pub fn with_threshold(threshold: f64) -> Self {
        AnomalyRule {
            threshold,
            ..AnomalyRule::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::invalid("threshold must be positive"));
        }
        if !(self.denominator_floor > 0.0) {
            return Err(Error::invalid("denominator_floor must be positive"));
        }
        Ok(())
    }

    /// Relative error statistic the rule thresholds.
    pub fn relative_error(&self, predicted: f64, actual: f64) -> f64 {
        let denom = math::abs(predicted).max(self.denominator_floor);
        if self.two_sided {
            math::abs(predicted - actual) / denom
        } else {
            (predicted - actual) / denom
        }
    }

    /// True iff the relative error exceeds the threshold.
    pub fn flag(&self, predicted: f64, actual: f64) -> bool {
        self.relative_error(predicted, actual) > self.threshold
    }
}

/// Root mean squared error between two equal-length vectors.
pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("rmse of empty vectors"));
    }
    if predictions.len() != actuals.len() {
        return Err(Error::DimensionMismatch {
            expected: actuals.len(),
            got: predictions.len(),
        });
    }
    let acc: f64 = predictions
        .iter()
        .zip(actuals)
        .map(|(&p, &a)| (p - a) * (p - a))
        .sum();
    Ok(math::sqrt(acc / predictions.len() as f64))
}

/// One-step forecasting strategy over the test region of a series.
pub trait Forecaster {
    fn name(&self) -> &'static str;

    /// One prediction per index `train_len..series.len()`, each computed
    /// only from observations strictly before it.
    fn forecast_test(&self, series: &[f64], train_len: usize) -> Result<Vec<f64>>;
}

/// Per-sample refit autoregression over a sliding history window.
#[derive(Debug, Clone, Default)]
pub struct RollingArima {
    pub config: ArimaConfig,
}

impl Forecaster for RollingArima {
    fn name(&self) -> &'static str {
        "arima"
    }

    fn forecast_test(&self, series: &[f64], train_len: usize) -> Result<Vec<f64>> {
        arima::rolling_refit_from(series, &self.config, train_len).map(|(preds, _)| preds)
    }
}

/// LSTM trained once on the training region, then rolled forward.
#[derive(Debug, Clone)]
pub struct LstmForecast {
    pub window: WindowSpec,
    pub hidden_dim: usize,
    pub train: TrainConfig,
}

impl Default for LstmForecast {
    fn default() -> Self {
        LstmForecast {
            window: WindowSpec::default_forecast(),
            hidden_dim: 64,
            train: TrainConfig {
                epochs: 5,
                batch_size: 10,
                learning_rate: 0.1,
                seed: 0,
                loss: crate::nn::Loss::Mse,
            },
        }
    }
}

impl Forecaster for LstmForecast {
    fn name(&self) -> &'static str {
        "lstm"
    }

    fn forecast_test(&self, series: &[f64], train_len: usize) -> Result<Vec<f64>> {
        let model = lstm::train_lstm_sized(&series[..train_len], self.window, self.hidden_dim, &self.train)?;
        model.forecast_from(series, train_len)
    }
}

/// A sample the rule flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct FlaggedSample {
    /// Index into the full series.
    pub index: usize,
    pub predicted: f64,
    pub actual: f64,
    pub relative_error: f64,
}

/// Detection outcome over one series' test region.
#[derive(Debug, Clone)]
pub struct AnomalyReport {
    pub forecaster: String,
    pub train_len: usize,
    pub test_len: usize,
    pub rmse: f64,
    pub flagged: Vec<FlaggedSample>,
    /// One prediction per test index, aligned to `train_len..`.
    pub predictions: Vec<f64>,
}

impl AnomalyReport {
    pub fn anomaly_count(&self) -> usize {
        self.flagged.len()
    }
}

/// Splits at `floor(len * split_fraction)`, forecasts the test region, and
/// applies the rule per sample.
pub fn detect(
    series: &[f64],
    forecaster: &dyn Forecaster,
    split_fraction: f64,
    rule: &AnomalyRule,
) -> Result<AnomalyReport> {
    rule.validate()?;
    if !(split_fraction > 0.0 && split_fraction < 1.0) {
        return Err(Error::invalid("split_fraction must lie in (0, 1)"));
    }
    let train_len = math::floor(series.len() as f64 * split_fraction) as usize;
    detect_from(series, forecaster, train_len, rule)
}

/// [`detect`] with an explicit training length.
pub fn detect_from(
    series: &[f64],
    forecaster: &dyn Forecaster,
    train_len: usize,
    rule: &AnomalyRule,
) -> Result<AnomalyReport> {
    rule.validate()?;
    if train_len == 0 || train_len >= series.len() {
        return Err(Error::invalid("split leaves an empty train or test region"));
    }
    let predictions = forecaster.forecast_test(series, train_len)?;
    let actuals = &series[train_len..];
    debug_assert_eq!(predictions.len(), actuals.len());

    let mut flagged = Vec::new();
    for (k, (&p, &a)) in predictions.iter().zip(actuals).enumerate() {
        if rule.flag(p, a) {
            flagged.push(FlaggedSample {
                index: train_len + k,
                predicted: p,
                actual: a,
                relative_error: rule.relative_error(p, a),
            });
        }
    }
    Ok(AnomalyReport {
        forecaster: forecaster.name().into(),
        train_len,
        test_len: actuals.len(),
        rmse: rmse(&predictions, actuals)?,
        flagged,
        predictions,
    })
}
