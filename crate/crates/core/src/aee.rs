//! Auto-encoder-based embedding.
//!
//! An LSTM encoder reads the columns of the `m × t` input window. Its final
//! per-layer states seed an LSTM decoder whose inputs are calendar features
//! of the forecast time stamps only, so no target value (observed or
//! predicted) ever enters the decoder. The decoder's hidden-state sequence is
//! the embedding fed to the transformer decoder, and a linear head on it
//! gives the auxiliary short-term forecast.

use std::f64::consts::TAU;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Timelike, Utc};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{uniform, Linear};
use crate::tensor::{Binding, ParamId, ParamSet, Tape, Tensor, Var};

/// Width of a [`timestamp_features`] row.
pub const TIMESTAMP_FEATURES: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeeConfig {
    pub hidden: usize,
    pub layers: usize,
}

impl Default for AeeConfig {
    fn default() -> Self {
        AeeConfig {
            hidden: 384,
            layers: 2,
        }
    }
}

impl AeeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::Config("aee.hidden must be at least 1".into()));
        }
        if !(1..=2).contains(&self.layers) {
            return Err(Error::Config(format!(
                "aee.layers must be 1 or 2, got {}",
                self.layers
            )));
        }
        Ok(())
    }
}

/// One LSTM layer. Gate blocks are laid out `[input, forget, cell, output]`
/// along the columns of `w_x`, `w_h` and `bias`.
#[derive(Clone, Copy, Debug)]
pub struct LstmCellParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub hidden: usize,
}

impl LstmCellParams {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        inputs: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let w_x = params.add(format!("{name}.w_x"), uniform(rng, &[inputs, 4 * hidden], bound));
        let w_h = params.add(format!("{name}.w_h"), uniform(rng, &[hidden, 4 * hidden], bound));
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        let bias = params.add(format!("{name}.bias"), b);
        LstmCellParams {
            w_x,
            w_h,
            bias,
            inputs,
            hidden,
        }
    }

    pub fn param_count(inputs: usize, hidden: usize) -> usize {
        4 * hidden * (inputs + hidden + 1)
    }

    /// Runs the recurrence over the rows of `xs` (`steps × inputs`) from the
    /// given state and returns every hidden state plus the final `(h, c)`.
    fn unroll(
        &self,
        tape: &mut Tape,
        b: &Binding,
        xs: Var,
        mut h: Var,
        mut c: Var,
    ) -> Result<(Vec<Var>, Var, Var)> {
        let steps = tape.shape(xs)[0];
        let n = self.hidden;
        // input contributions for every step in one product
        let pre_x = tape.linear(xs, b.get(self.w_x), b.get(self.bias))?;
        let w_h = b.get(self.w_h);
        let mut outputs = Vec::with_capacity(steps);
        for step in 0..steps {
            let row = tape.slice_rows(pre_x, step, 1)?;
            let rec = tape.matmul(h, w_h)?;
            let gates = tape.add(row, rec)?;
            let i = tape.slice_cols(gates, 0, n)?;
            let f = tape.slice_cols(gates, n, n)?;
            let g = tape.slice_cols(gates, 2 * n, n)?;
            let o = tape.slice_cols(gates, 3 * n, n)?;
            let i = tape.sigmoid(i);
            let f = tape.sigmoid(f);
            let g = tape.tanh(g);
            let o = tape.sigmoid(o);
            let keep = tape.mul(f, c)?;
            let write = tape.mul(i, g)?;
            c = tape.add(keep, write)?;
            let squashed = tape.tanh(c);
            h = tape.mul(o, squashed)?;
            outputs.push(h);
        }
        Ok((outputs, h, c))
    }
}

/// Final encoder state of every layer, each `1 × hidden`.
#[derive(Clone, Debug)]
pub struct Latent {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct Aee {
    pub cfg: AeeConfig,
    pub encoder: Vec<LstmCellParams>,
    pub decoder: Vec<LstmCellParams>,
    pub head: Linear,
}

impl Aee {
    pub fn new(params: &mut ParamSet, cfg: AeeConfig, m: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = cfg.hidden;
        let stack = |params: &mut ParamSet, rng: &mut ChaCha8Rng, part: &str, first: usize| {
            (0..cfg.layers)
                .map(|l| {
                    let inputs = if l == 0 { first } else { n };
                    LstmCellParams::new(params, &format!("aee.{part}.{l}"), inputs, n, rng)
                })
                .collect::<Vec<_>>()
        };
        let encoder = stack(params, rng, "encoder", m);
        let decoder = stack(params, rng, "decoder", TIMESTAMP_FEATURES);
        let head = Linear::new(params, "aee.head", n, 1, rng);
        Aee {
            cfg,
            encoder,
            decoder,
            head,
        }
    }

    pub fn param_count(cfg: &AeeConfig, m: usize) -> usize {
        let n = cfg.hidden;
        let layers = |first: usize| {
            (0..cfg.layers)
                .map(|l| LstmCellParams::param_count(if l == 0 { first } else { n }, n))
                .sum::<usize>()
        };
        layers(m) + layers(TIMESTAMP_FEATURES) + Linear::param_count(n, 1)
    }

    /// Encodes an `m × t` window; step `j` reads column `j`.
    pub fn encode(&self, tape: &mut Tape, b: &Binding, window: &Tensor) -> Result<Latent> {
        let m = window.rows();
        if m != self.encoder[0].inputs {
            return Err(Error::dim(
                "aee.encode",
                window.shape(),
                &[self.encoder[0].inputs, window.cols()],
            ));
        }
        let mut xs = tape.constant(window.transpose());
        let mut latent = Latent {
            h: Vec::new(),
            c: Vec::new(),
        };
        for cell in &self.encoder {
            let h0 = tape.constant(Tensor::zeros(&[1, cell.hidden]));
            let c0 = tape.constant(Tensor::zeros(&[1, cell.hidden]));
            let (seq, h, c) = cell.unroll(tape, b, xs, h0, c0)?;
            latent.h.push(h);
            latent.c.push(c);
            xs = tape.concat_rows(&seq)?;
        }
        Ok(latent)
    }

    /// Unrolls the decoder over `features` (`h × 5`) from the encoder states
    /// and returns the top layer's hidden states, `h × hidden`.
    pub fn decode(
        &self,
        tape: &mut Tape,
        b: &Binding,
        latent: &Latent,
        features: &Tensor,
    ) -> Result<Var> {
        if features.cols() != TIMESTAMP_FEATURES {
            return Err(Error::dim(
                "aee.decode",
                features.shape(),
                &[features.rows(), TIMESTAMP_FEATURES],
            ));
        }
        let mut xs = tape.constant(features.clone());
        for (l, cell) in self.decoder.iter().enumerate() {
            let (seq, _, _) = cell.unroll(tape, b, xs, latent.h[l], latent.c[l])?;
            xs = tape.concat_rows(&seq)?;
        }
        Ok(xs)
    }

    /// Per-step linear map of the embedding to a length-`h` vector.
    pub fn aux_head(&self, tape: &mut Tape, b: &Binding, embedding: Var) -> Result<Var> {
        let col = self.head.forward(tape, b, embedding)?;
        let h = tape.shape(col)[0];
        tape.reshape(col, vec![h])
    }
}

fn fractional_day_of_year(ts: DateTime<Utc>) -> f64 {
    let year = ts.year();
    let days = if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
        366.0
    } else {
        365.0
    };
    let tod = ts.num_seconds_from_midnight() as f64 / 86_400.0;
    (ts.ordinal0() as f64 + tod) / days
}

/// Calendar features of the `horizon` forecast steps following `issue`.
/// Step `k` is stamped `issue + (k + 1)·step`; its row is
/// `[k/h, sin, cos of time of day, sin, cos of day of year]`.
pub fn timestamp_features(issue: DateTime<Utc>, horizon: usize, step: Duration) -> Tensor {
    let mut data = Vec::with_capacity(horizon * TIMESTAMP_FEATURES);
    for k in 0..horizon {
        let ts = issue + step * (k as i32 + 1);
        let tod = ts.num_seconds_from_midnight() as f64 / 86_400.0;
        let doy = fractional_day_of_year(ts);
        data.extend([
            k as f64 / horizon as f64,
            (TAU * tod).sin(),
            (TAU * tod).cos(),
            (TAU * doy).sin(),
            (TAU * doy).cos(),
        ]);
    }
    Tensor::new(vec![horizon.max(1), TIMESTAMP_FEATURES], data)
        .unwrap_or_else(|_| Tensor::zeros(&[1, TIMESTAMP_FEATURES]))
}
