//! Enhanced feature-based embedding.
//!
//! Every time point `j` of an `m × t` window becomes a vector holding the
//! target's value at `j`, each auxiliary's value at `j`, and the `s` preceding
//! values of every auxiliary. A shared dense layer plus nonlinearity maps it
//! to `d_model`. No positional term is added: rows of the result depend only
//! on their own subsequence.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Linear;
use crate::tensor::{Activation, Binding, ParamSet, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EfeConfig {
    /// Number of preceding auxiliary values per time point.
    pub s: usize,
    pub activation: Activation,
    /// Also append the target's own `s` preceding values.
    pub include_target_lags: bool,
}

impl Default for EfeConfig {
    fn default() -> Self {
        EfeConfig {
            s: 60,
            activation: Activation::Relu,
            include_target_lags: false,
        }
    }
}

impl EfeConfig {
    pub fn input_width(&self, m: usize) -> usize {
        let base = 1 + (m - 1) * (self.s + 1);
        if self.include_target_lags {
            base + self.s
        } else {
            base
        }
    }
}

/// Subsequence for time point `j`. Lags that fall before the window start
/// repeat the earliest in-window value of that series.
pub fn build_subsequence(window: &Tensor, j: usize, cfg: &EfeConfig) -> Result<Vec<f64>> {
    let (m, t) = (window.rows(), window.cols());
    if j >= t {
        return Err(Error::Index { index: j, len: t });
    }
    let mut out = Vec::with_capacity(cfg.input_width(m));
    out.push(window.at(0, j));
    for i in 1..m {
        out.push(window.at(i, j));
    }
    let lags = |row: usize, out: &mut Vec<f64>| {
        for l in (1..=cfg.s).rev() {
            let k = j.saturating_sub(l);
            out.push(window.at(row, if j >= l { k } else { 0 }));
        }
    };
    for i in 1..m {
        lags(i, &mut out);
    }
    if cfg.include_target_lags {
        lags(0, &mut out);
    }
    Ok(out)
}

/// All `t` subsequences stacked as a `t × input_width` matrix.
pub fn subsequence_matrix(window: &Tensor, cfg: &EfeConfig) -> Result<Tensor> {
    let t = window.cols();
    let width = cfg.input_width(window.rows());
    let mut data = Vec::with_capacity(t * width);
    for j in 0..t {
        data.extend(build_subsequence(window, j, cfg)?);
    }
    Tensor::new(vec![t, width], data)
}

/// The dense projection of the embedding.
#[derive(Clone, Copy, Debug)]
pub struct EfeLayer {
    pub dense: Linear,
    pub activation: Activation,
}

impl EfeLayer {
    pub fn new(
        params: &mut ParamSet,
        cfg: &EfeConfig,
        m: usize,
        d_model: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        EfeLayer {
            dense: Linear::new(params, "efe.dense", cfg.input_width(m), d_model, rng),
            activation: cfg.activation,
        }
    }

    pub fn param_count(cfg: &EfeConfig, m: usize, d_model: usize) -> usize {
        Linear::param_count(cfg.input_width(m), d_model)
    }

    /// `t × d_model` embedding of a window.
    pub fn embed_sequence(
        &self,
        tape: &mut Tape,
        binding: &Binding,
        window: &Tensor,
        cfg: &EfeConfig,
    ) -> Result<Var> {
        let subseq = subsequence_matrix(window, cfg)?;
        if subseq.cols() != self.dense.inputs {
            return Err(Error::dim(
                "efe.embed_sequence",
                subseq.shape(),
                &[self.dense.inputs, self.dense.outputs],
            ));
        }
        let x = tape.constant(subseq);
        let z = self.dense.forward(tape, binding, x)?;
        Ok(tape.activation(self.activation, z))
    }
}
