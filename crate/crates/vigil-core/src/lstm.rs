//! Single-layer LSTM for one-step time-series prediction.
//!
//! The model consumes a fixed window of past observations and emits one
//! scalar forecast through a linear readout of the final hidden state.
//! Training is truncated backpropagation through time over each window (no
//! state carry between windows), minimizing squared error with minibatch
//! SGD. Inputs are z-scored with training-region statistics and predictions
//! inverted back to raw units; without that, gate saturation destroys
//! training on raw sensor scales.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::nn::{TrainConfig, TrainMeta};
use crate::rng::Rng;

/// How a series is sliced into training windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    /// Timesteps fed per prediction.
    pub window_len: usize,
    pub stride: usize,
}

impl WindowSpec {
    pub fn new(window_len: usize, stride: usize) -> Result<Self> {
        if window_len == 0 || stride == 0 {
            return Err(Error::invalid("window_len and stride must be positive"));
        }
        Ok(WindowSpec { window_len, stride })
    }

    /// Ten steps of history per prediction, dense stride.
    pub fn default_forecast() -> Self {
        WindowSpec {
            window_len: 10,
            stride: 1,
        }
    }
}

/// Gate parameters. Every gate matrix is `(hidden, input + hidden)`
/// row-major, applied to the concatenation `[x_t, h_{t-1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    input_dim: usize,
    hidden_dim: usize,
    w_input: Vec<f64>,
    w_forget: Vec<f64>,
    w_cell: Vec<f64>,
    w_output: Vec<f64>,
    b_input: Vec<f64>,
    b_forget: Vec<f64>,
    b_cell: Vec<f64>,
    b_output: Vec<f64>,
    readout_w: Vec<f64>,
    readout_b: f64,
}

/// Per-step values cached by the forward pass for BPTT.
struct StepTrace {
    z: Vec<f64>,
    gate_i: Vec<f64>,
    gate_f: Vec<f64>,
    gate_g: Vec<f64>,
    gate_o: Vec<f64>,
    c_prev: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Flat gradient buffer in [`LstmModel::params`] order.
struct LstmGrads(Vec<f64>);

impl LstmModel {
    /// Glorot-uniform gates and readout from a seeded generator; biases zero.
    pub fn seeded(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::invalid("input_dim and hidden_dim must be positive"));
        }
        let mut rng = Rng::seed_from(seed);
        let cols = input_dim + hidden_dim;
        let limit = math::sqrt(6.0 / (cols + hidden_dim) as f64);
        let gate = |rng: &mut Rng| -> Vec<f64> {
            (0..hidden_dim * cols).map(|_| rng.uniform(-limit, limit)).collect()
        };
        let w_input = gate(&mut rng);
        let w_forget = gate(&mut rng);
        let w_cell = gate(&mut rng);
        let w_output = gate(&mut rng);
        let r_limit = math::sqrt(6.0 / (hidden_dim + 1) as f64);
        let readout_w = (0..hidden_dim).map(|_| rng.uniform(-r_limit, r_limit)).collect();
        Ok(LstmModel {
            input_dim,
            hidden_dim,
            w_input,
            w_forget,
            w_cell,
            w_output,
            b_input: vec![0.0; hidden_dim],
            b_forget: vec![0.0; hidden_dim],
            b_cell: vec![0.0; hidden_dim],
            b_output: vec![0.0; hidden_dim],
            readout_w,
            readout_b: 0.0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    /// One gated step: `i,f,o = sigmoid(W[x;h] + b)`, `g = tanh(W[x;h] + b)`,
    /// `c' = f*c + i*g`, `h' = o*tanh(c')`.
    pub fn cell_step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_step(x, h, c)?;
        let trace = self.step_trace(x, h, c);
        let h_new = trace
            .gate_o
            .iter()
            .zip(&trace.tanh_c)
            .map(|(&o, &tc)| o * tc)
            .collect();
        Ok((h_new, trace.c))
    }

    fn check_step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        if h.len() != self.hidden_dim || c.len() != self.hidden_dim {
            return Err(Error::DimensionMismatch {
                expected: self.hidden_dim,
                got: h.len().max(c.len()),
            });
        }
        if x.iter().chain(h).chain(c).any(|v| v.is_nan()) {
            return Err(Error::invalid("NaN in cell-step input"));
        }
        Ok(())
    }

    fn step_trace(&self, x: &[f64], h: &[f64], c: &[f64]) -> StepTrace {
        let cols = self.input_dim + self.hidden_dim;
        let mut z = Vec::with_capacity(cols);
        z.extend_from_slice(x);
        z.extend_from_slice(h);

        let affine = |w: &[f64], b: &[f64]| -> Vec<f64> {
            (0..self.hidden_dim)
                .map(|r| {
                    let row = &w[r * cols..(r + 1) * cols];
                    let mut acc = b[r];
                    for (wv, zv) in row.iter().zip(&z) {
                        acc += wv * zv;
                    }
                    acc
                })
                .collect()
        };

        let gate_i: Vec<f64> = affine(&self.w_input, &self.b_input)
            .into_iter()
            .map(math::sigmoid)
            .collect();
        let gate_f: Vec<f64> = affine(&self.w_forget, &self.b_forget)
            .into_iter()
            .map(math::sigmoid)
            .collect();
        let gate_g: Vec<f64> = affine(&self.w_cell, &self.b_cell)
            .into_iter()
            .map(math::tanh)
            .collect();
        let gate_o: Vec<f64> = affine(&self.w_output, &self.b_output)
            .into_iter()
            .map(math::sigmoid)
            .collect();

        let c_new: Vec<f64> = (0..self.hidden_dim)
            .map(|j| gate_f[j] * c[j] + gate_i[j] * gate_g[j])
            .collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|&v| math::tanh(v)).collect();

        StepTrace {
            z,
            gate_i,
            gate_f,
            gate_g,
            gate_o,
            c_prev: c.to_vec(),
            c: c_new,
            tanh_c,
        }
    }

    /// Runs the cell over a scalar window and reads out one prediction.
    pub fn predict_window(&self, window: &[f64]) -> Result<f64> {
        if self.input_dim != 1 {
            return Err(Error::invalid("predict_window expects a scalar-input model"));
        }
        if window.is_empty() {
            return Err(Error::invalid("empty window"));
        }
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        for &x in window {
            let (h2, c2) = self.cell_step(&[x], &h, &c)?;
            h = h2;
            c = c2;
        }
        let mut out = self.readout_b;
        for (w, hv) in self.readout_w.iter().zip(&h) {
            out += w * hv;
        }
        Ok(out)
    }

    /// Squared-error BPTT over one window; accumulates into `grads` and
    /// returns the sample loss.
    fn backward_window(&self, window: &[f64], target: f64, grads: &mut LstmGrads) -> f64 {
        let hd = self.hidden_dim;
        let cols = self.input_dim + hd;

        let mut traces = Vec::with_capacity(window.len());
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        for &x in window {
            let trace = self.step_trace(&[x], &h, &c);
            h = trace
                .gate_o
                .iter()
                .zip(&trace.tanh_c)
                .map(|(&o, &tc)| o * tc)
                .collect();
            c = trace.c.clone();
            traces.push(trace);
        }
        let mut pred = self.readout_b;
        for (w, hv) in self.readout_w.iter().zip(&h) {
            pred += w * hv;
        }
        let err = pred - target;
        let loss = err * err;

        let (gw_i, rest) = grads.0.split_at_mut(hd * cols);
        let (gw_f, rest) = rest.split_at_mut(hd * cols);
        let (gw_g, rest) = rest.split_at_mut(hd * cols);
        let (gw_o, rest) = rest.split_at_mut(hd * cols);
        let (gb_i, rest) = rest.split_at_mut(hd);
        let (gb_f, rest) = rest.split_at_mut(hd);
        let (gb_g, rest) = rest.split_at_mut(hd);
        let (gb_o, rest) = rest.split_at_mut(hd);
        let (g_rw, g_rb) = rest.split_at_mut(hd);

        let dpred = 2.0 * err;
        let mut dh: Vec<f64> = self.readout_w.iter().map(|&w| dpred * w).collect();
        for (slot, hv) in g_rw.iter_mut().zip(&h) {
            *slot += dpred * hv;
        }
        g_rb[0] += dpred;

        let mut dc = vec![0.0; hd];
        for trace in traces.iter().rev() {
            let mut dz = vec![0.0; cols];
            for j in 0..hd {
                let d_o = dh[j] * trace.tanh_c[j];
                let tc = trace.tanh_c[j];
                dc[j] += dh[j] * trace.gate_o[j] * (1.0 - tc * tc);

                let d_i = dc[j] * trace.gate_g[j];
                let d_g = dc[j] * trace.gate_i[j];
                let d_f = dc[j] * trace.c_prev[j];

                // Pre-activation gradients through sigma / tanh.
                let zi = d_i * trace.gate_i[j] * (1.0 - trace.gate_i[j]);
                let zf = d_f * trace.gate_f[j] * (1.0 - trace.gate_f[j]);
                let zg = d_g * (1.0 - trace.gate_g[j] * trace.gate_g[j]);
                let zo = d_o * trace.gate_o[j] * (1.0 - trace.gate_o[j]);

                gb_i[j] += zi;
                gb_f[j] += zf;
                gb_g[j] += zg;
                gb_o[j] += zo;

                let row = j * cols;
                for (k, &zv) in trace.z.iter().enumerate() {
                    gw_i[row + k] += zi * zv;
                    gw_f[row + k] += zf * zv;
                    gw_g[row + k] += zg * zv;
                    gw_o[row + k] += zo * zv;
                    dz[k] += zi * self.w_input[row + k]
                        + zf * self.w_forget[row + k]
                        + zg * self.w_cell[row + k]
                        + zo * self.w_output[row + k];
                }

                dc[j] *= trace.gate_f[j];
            }
            dh.copy_from_slice(&dz[self.input_dim..]);
        }
        loss
    }

    /// Flat parameter vector: gate matrices (input, forget, cell, output),
    /// gate biases in the same order, readout weights, readout bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::new();
        p.extend_from_slice(&self.w_input);
        p.extend_from_slice(&self.w_forget);
        p.extend_from_slice(&self.w_cell);
        p.extend_from_slice(&self.w_output);
        p.extend_from_slice(&self.b_input);
        p.extend_from_slice(&self.b_forget);
        p.extend_from_slice(&self.b_cell);
        p.extend_from_slice(&self.b_output);
        p.extend_from_slice(&self.readout_w);
        p.push(self.readout_b);
        p
    }

    pub fn param_count(&self) -> usize {
        let cols = self.input_dim + self.hidden_dim;
        4 * self.hidden_dim * cols + 4 * self.hidden_dim + self.hidden_dim + 1
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let hd = self.hidden_dim;
        let cols = self.input_dim + hd;
        let mut o = 0;
        let take = |len: usize, o: &mut usize| -> Vec<f64> {
            let s = params[*o..*o + len].to_vec();
            *o += len;
            s
        };
        self.w_input = take(hd * cols, &mut o);
        self.w_forget = take(hd * cols, &mut o);
        self.w_cell = take(hd * cols, &mut o);
        self.w_output = take(hd * cols, &mut o);
        self.b_input = take(hd, &mut o);
        self.b_forget = take(hd, &mut o);
        self.b_cell = take(hd, &mut o);
        self.b_output = take(hd, &mut o);
        self.readout_w = take(hd, &mut o);
        self.readout_b = params[o];
        Ok(())
    }

    /// Rebuilds a model from a flat parameter vector.
    pub fn from_params(input_dim: usize, hidden_dim: usize, params: &[f64]) -> Result<Self> {
        let mut model = LstmModel::seeded(input_dim, hidden_dim, 0)?;
        model.set_params(params)?;
        Ok(model)
    }
}

/// A trained LSTM forecaster: model plus window spec and the z-score
/// constants fitted on its training region.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmForecaster {
    pub model: LstmModel,
    pub window: WindowSpec,
    pub norm_mean: f64,
    pub norm_std: f64,
    pub meta: TrainMeta,
}

/// Trains a scalar one-step forecaster on `series` (the training region).
pub fn train_lstm(series: &[f64], window: WindowSpec, cfg: &TrainConfig) -> Result<LstmForecaster> {
    train_lstm_sized(series, window, 64, cfg)
}

/// [`train_lstm`] with an explicit hidden size.
pub fn train_lstm_sized(
    series: &[f64],
    window: WindowSpec,
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<LstmForecaster> {
    if series.len() <= window.window_len + 1 {
        return Err(Error::invalid(format!(
            "series of length {} is too short for window {}",
            series.len(),
            window.window_len
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    if cfg.learning_rate <= 0.0 {
        return Err(Error::invalid("learning_rate must be positive"));
    }

    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = math::sqrt(var);
    // A constant training region normalizes to all zeros with unit scale.
    let std = if std < 1e-12 { 1.0 } else { std };
    let normalized: Vec<f64> = series.iter().map(|&x| (x - mean) / std).collect();

    let mut starts: Vec<usize> = (0..=series.len() - window.window_len - 1)
        .step_by(window.stride)
        .collect();
    if starts.is_empty() {
        return Err(Error::invalid("no training windows for this spec"));
    }

    let mut model = LstmModel::seeded(1, hidden_dim, cfg.seed)?;
    let mut rng = Rng::seed_from(cfg.seed);
    let batch = cfg.batch_size.max(1).min(starts.len());
    let mut final_loss = f64::NAN;

    for _ in 0..cfg.epochs {
        rng.shuffle(&mut starts);
        let mut epoch_loss = 0.0;
        for chunk in starts.chunks(batch) {
            let mut grads = LstmGrads(vec![0.0; model.param_count()]);
            let mut batch_loss = 0.0;
            for &s in chunk {
                let w = &normalized[s..s + window.window_len];
                let target = normalized[s + window.window_len];
                batch_loss += model.backward_window(w, target, &mut grads);
            }
            let scale = cfg.learning_rate / chunk.len() as f64;
            let mut params = model.params();
            for (p, g) in params.iter_mut().zip(&grads.0) {
                *p -= scale * g;
            }
            model.set_params(&params)?;
            epoch_loss += batch_loss;
        }
        final_loss = epoch_loss / starts.len() as f64;
    }

    Ok(LstmForecaster {
        model,
        window,
        norm_mean: mean,
        norm_std: std,
        meta: TrainMeta {
            seed: cfg.seed,
            epochs: cfg.epochs,
            batch_size: batch,
            learning_rate: cfg.learning_rate,
            loss: cfg.loss,
            final_loss,
        },
    })
}

impl LstmForecaster {
    /// One-step forecast from the trailing `window_len` values of `history`.
    pub fn forecast_one(&self, history: &[f64]) -> Result<f64> {
        let w = self.window.window_len;
        if history.len() < w {
            return Err(Error::invalid(format!(
                "history of length {} is shorter than the window {w}",
                history.len()
            )));
        }
        let tail = &history[history.len() - w..];
        let normalized: Vec<f64> = tail.iter().map(|&x| (x - self.norm_mean) / self.norm_std).collect();
        let pred = self.model.predict_window(&normalized)?;
        Ok(pred * self.norm_std + self.norm_mean)
    }

    /// One prediction per index `first_test..series.len()`, each computed
    /// only from observations strictly before it.
    pub fn forecast_from(&self, series: &[f64], first_test: usize) -> Result<Vec<f64>> {
        if first_test < self.window.window_len {
            return Err(Error::invalid(format!(
                "first test index {first_test} leaves less warmup than the window {}",
                self.window.window_len
            )));
        }
        if first_test > series.len() {
            return Err(Error::invalid("first test index beyond the series"));
        }
        (first_test..series.len())
            .map(|t| self.forecast_one(&series[..t]).map_err(|e| Error::at(t, e)))
            .collect()
    }
}
