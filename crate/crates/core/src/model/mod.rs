//! The forecasting network.
//!
//! A transformer encoder runs over the feature-based embedding of the input
//! window. The decoder's self-attention runs directly over the
//! auto-encoder embedding of the forecast horizon and its cross-attention
//! reads the encoder memory. Nothing is masked. A per-step linear head on the
//! decoder output is added element-wise to the auxiliary head, and all `h`
//! values are produced in one pass.
//!
//! Two ablation modes replace both embeddings with a plain token embedding,
//! with or without sinusoidal positions, and learned decoder start tokens.

mod attention;
mod checkpoint;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use attention::{DecoderLayer, Dropout, EncoderLayer, FeedForward, MultiHeadAttention};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};

use crate::aee::{Aee, AeeConfig};
use crate::efe::{EfeConfig, EfeLayer};
use crate::error::{Error, Result};
use crate::nn::{uniform, Linear};
use crate::tensor::{Binding, ParamId, ParamSet, Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingMode {
    EfeAee,
    PositionToken,
    TokenOnly,
}

impl EmbeddingMode {
    pub const ALL: [EmbeddingMode; 3] = [
        EmbeddingMode::EfeAee,
        EmbeddingMode::PositionToken,
        EmbeddingMode::TokenOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmbeddingMode::EfeAee => "efe_aee",
            EmbeddingMode::PositionToken => "position_token",
            EmbeddingMode::TokenOnly => "token_only",
        }
    }

    pub fn has_aux_head(self) -> bool {
        self == EmbeddingMode::EfeAee
    }
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmbeddingMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown embedding mode {s:?} (expected efe_aee, position_token or token_only)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub ffn_width: usize,
    /// Input window length.
    pub t: usize,
    /// Forecast horizon.
    pub h: usize,
    /// Number of series, target included.
    pub m: usize,
    pub efe: EfeConfig,
    pub aee: AeeConfig,
    pub embedding_mode: EmbeddingMode,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_model: 384,
            n_heads: 4,
            n_enc_layers: 2,
            n_dec_layers: 1,
            ffn_width: 768,
            t: 1440,
            h: 288,
            m: 2,
            efe: EfeConfig::default(),
            aee: AeeConfig::default(),
            embedding_mode: EmbeddingMode::EfeAee,
            dropout: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "model.d_model ({}) must be a positive multiple of model.n_heads ({})",
                self.d_model, self.n_heads
            ));
        }
        if self.n_enc_layers == 0 || self.n_dec_layers == 0 {
            return bad("encoder and decoder need at least one layer each".into());
        }
        if self.ffn_width == 0 || self.t == 0 || self.h == 0 || self.m == 0 {
            return bad("model.ffn_width, model.t, model.h and model.m must be positive".into());
        }
        if self.efe.s == 0 {
            return bad("efe.s must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("model.dropout must be in [0, 1), got {}", self.dropout));
        }
        self.aee.validate()
    }

    /// Closed-form number of trainable scalars.
    pub fn param_count(&self) -> usize {
        let d = self.d_model;
        let mut n = self.n_enc_layers * EncoderLayer::param_count(d, self.ffn_width)
            + self.n_dec_layers * DecoderLayer::param_count(d, self.ffn_width)
            + Linear::param_count(d, 1);
        match self.embedding_mode {
            EmbeddingMode::EfeAee => {
                n += EfeLayer::param_count(&self.efe, self.m, d);
                n += Aee::param_count(&self.aee, self.m);
                if self.aee.hidden != d {
                    n += Linear::param_count(self.aee.hidden, d);
                }
            }
            EmbeddingMode::PositionToken | EmbeddingMode::TokenOnly => {
                n += Linear::param_count(self.m, d) + self.h * d;
            }
        }
        n
    }
}

/// Standard sinusoidal position table, `len × d`.
pub fn positional_encoding(len: usize, d: usize) -> Tensor {
    let mut pe = Tensor::zeros(&[len, d]);
    let data = pe.data_mut();
    for pos in 0..len {
        for i in 0..d {
            let pair = (i / 2) as f64;
            let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d as f64);
            data[pos * d + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}

#[derive(Clone, Debug)]
enum Embedding {
    EfeAee {
        efe: EfeLayer,
        aee: Aee,
        projection: Option<Linear>,
    },
    Token {
        token: Linear,
        start: ParamId,
        positional: bool,
    },
}

/// Network outputs on the tape: the fused forecast `ŷ`, the auxiliary head
/// `ŷ_aux` (absent in ablation modes) and every attention map produced.
#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub y_hat: Var,
    pub y_aux: Option<Var>,
    pub attention: Vec<Var>,
}

#[derive(Clone, Debug)]
pub struct PfModel {
    pub cfg: ModelConfig,
    embedding: Embedding,
    pub encoder: Vec<EncoderLayer>,
    pub decoder: Vec<DecoderLayer>,
    pub head: Linear,
}

impl PfModel {
    /// Builds the network and its freshly initialised parameters.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<(PfModel, ParamSet)> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = cfg.d_model;
        let embedding = match cfg.embedding_mode {
            EmbeddingMode::EfeAee => {
                let efe = EfeLayer::new(&mut params, &cfg.efe, cfg.m, d, &mut rng);
                let aee = Aee::new(&mut params, cfg.aee, cfg.m, &mut rng);
                let projection = (cfg.aee.hidden != d)
                    .then(|| Linear::new(&mut params, "aee.projection", cfg.aee.hidden, d, &mut rng));
                Embedding::EfeAee {
                    efe,
                    aee,
                    projection,
                }
            }
            mode => {
                let token = Linear::new(&mut params, "token", cfg.m, d, &mut rng);
                let bound = 1.0 / (d as f64).sqrt();
                let start = params.add("decoder.start", uniform(&mut rng, &[cfg.h, d], bound));
                Embedding::Token {
                    token,
                    start,
                    positional: mode == EmbeddingMode::PositionToken,
                }
            }
        };
        let encoder = (0..cfg.n_enc_layers)
            .map(|l| EncoderLayer::new(&mut params, &format!("encoder.{l}"), d, cfg.n_heads, cfg.ffn_width, &mut rng))
            .collect();
        let decoder = (0..cfg.n_dec_layers)
            .map(|l| DecoderLayer::new(&mut params, &format!("decoder.{l}"), d, cfg.n_heads, cfg.ffn_width, &mut rng))
            .collect();
        let head = Linear::new(&mut params, "head", d, 1, &mut rng);
        Ok((
            PfModel {
                cfg,
                embedding,
                encoder,
                decoder,
                head,
            },
            params,
        ))
    }

    pub fn aee(&self) -> Option<&Aee> {
        match &self.embedding {
            Embedding::EfeAee { aee, .. } => Some(aee),
            Embedding::Token { .. } => None,
        }
    }

    fn check_window(&self, window: &Tensor) -> Result<()> {
        if window.shape() != [self.cfg.m, self.cfg.t] {
            return Err(Error::dim("model.forward", window.shape(), &[self.cfg.m, self.cfg.t]));
        }
        Ok(())
    }

    /// Encoder input, `t × d_model`.
    pub fn encoder_input(&self, tape: &mut Tape, b: &Binding, window: &Tensor) -> Result<Var> {
        self.check_window(window)?;
        match &self.embedding {
            Embedding::EfeAee { efe, .. } => efe.embed_sequence(tape, b, window, &self.cfg.efe),
            Embedding::Token {
                token, positional, ..
            } => {
                let x = tape.constant(window.transpose());
                let e = token.forward(tape, b, x)?;
                if *positional {
                    let pe = tape.constant(positional_encoding(self.cfg.t, self.cfg.d_model));
                    tape.add(e, pe)
                } else {
                    Ok(e)
                }
            }
        }
    }

    pub fn encoder_forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        x: Var,
        dropout: &mut Dropout,
        maps: &mut Vec<Var>,
    ) -> Result<Var> {
        let mut x = x;
        for layer in &self.encoder {
            x = layer.forward(tape, b, x, dropout, maps)?;
        }
        Ok(x)
    }

    pub fn decoder_forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        y: Var,
        memory: Var,
        dropout: &mut Dropout,
        maps: &mut Vec<Var>,
    ) -> Result<Var> {
        let mut y = y;
        for layer in &self.decoder {
            y = layer.forward(tape, b, y, memory, dropout, maps)?;
        }
        Ok(y)
    }

    fn output_head(&self, tape: &mut Tape, b: &Binding, dec: Var) -> Result<Var> {
        let col = self.head.forward(tape, b, dec)?;
        tape.reshape(col, vec![self.cfg.h])
    }

    /// Full forward pass. `features` are the forecast time-stamp features
    /// (`h × 5`); ablation modes ignore them.
    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        window: &Tensor,
        features: &Tensor,
        dropout: &mut Dropout,
    ) -> Result<ForwardOutput> {
        let Embedding::EfeAee {
            aee, projection, ..
        } = &self.embedding
        else {
            return self.forward_ablation(tape, b, window, dropout);
        };
        if features.rows() != self.cfg.h {
            return Err(Error::dim("model.forward", features.shape(), &[self.cfg.h, crate::aee::TIMESTAMP_FEATURES]));
        }
        let mut maps = Vec::new();
        let x = self.encoder_input(tape, b, window)?;
        let memory = self.encoder_forward(tape, b, x, dropout, &mut maps)?;
        let latent = aee.encode(tape, b, window)?;
        let emb = aee.decode(tape, b, &latent, features)?;
        let y_aux = aee.aux_head(tape, b, emb)?;
        let dec_in = match projection {
            Some(p) => p.forward(tape, b, emb)?,
            None => emb,
        };
        let dec = self.decoder_forward(tape, b, dec_in, memory, dropout, &mut maps)?;
        let head = self.output_head(tape, b, dec)?;
        let y_hat = tape.add(head, y_aux)?;
        Ok(ForwardOutput {
            y_hat,
            y_aux: Some(y_aux),
            attention: maps,
        })
    }

    /// Forward pass of the token-embedding modes.
    pub fn forward_ablation(
        &self,
        tape: &mut Tape,
        b: &Binding,
        window: &Tensor,
        dropout: &mut Dropout,
    ) -> Result<ForwardOutput> {
        let Embedding::Token {
            start, positional, ..
        } = &self.embedding
        else {
            return Err(Error::Contract(
                "forward_ablation needs a token embedding mode".into(),
            ));
        };
        let mut maps = Vec::new();
        let x = self.encoder_input(tape, b, window)?;
        let memory = self.encoder_forward(tape, b, x, dropout, &mut maps)?;
        let mut y = b.get(*start);
        if *positional {
            let pe = tape.constant(positional_encoding(self.cfg.h, self.cfg.d_model));
            y = tape.add(y, pe)?;
        }
        let dec = self.decoder_forward(tape, b, y, memory, dropout, &mut maps)?;
        let y_hat = self.output_head(tape, b, dec)?;
        Ok(ForwardOutput {
            y_hat,
            y_aux: None,
            attention: maps,
        })
    }

    /// Inference without dropout; returns `ŷ` in model units.
    pub fn predict(&self, params: &ParamSet, window: &Tensor, features: &Tensor) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let b = tape.bind(params);
        let out = self.forward(&mut tape, &b, window, features, &mut Dropout::off())?;
        Ok(tape.value(out.y_hat).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};
    use rand::Rng;

    use super::*;
    use crate::aee::timestamp_features;
    use crate::dataio::default_step;
    use crate::nn::LAYER_NORM_EPS;
    use crate::tensor::param_gradient_check;

    pub(crate) fn tiny(mode: EmbeddingMode) -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 2,
            n_dec_layers: 1,
            ffn_width: 16,
            t: 8,
            h: 4,
            m: 2,
            efe: EfeConfig { s: 3, ..Default::default() },
            aee: AeeConfig { hidden: 3, layers: 1 },
            embedding_mode: mode,
            dropout: 0.0,
        }
    }

    fn window(m: usize, t: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..m * t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor::new(vec![m, t], data).unwrap()
    }

    fn features(h: usize) -> Tensor {
        let issue = Utc.with_ymd_and_hms(2020, 6, 1, 12, 0, 0).unwrap();
        timestamp_features(issue, h, default_step())
    }

    fn layer_norm_rows(x: &Tensor) -> Tensor {
        let c = x.cols();
        let mut out = x.clone();
        for row in out.data_mut().chunks_mut(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c as f64;
            for v in row.iter_mut() {
                *v = (*v - mean) / (var + LAYER_NORM_EPS).sqrt();
            }
        }
        out
    }

    #[test]
    fn output_shapes_and_param_count() {
        for mode in EmbeddingMode::ALL {
            let cfg = tiny(mode);
            let (model, params) = PfModel::new(cfg, 1).unwrap();
            assert_eq!(params.num_scalars(), cfg.param_count(), "{mode}");
            let mut tape = Tape::new();
            let b = tape.bind(&params);
            let out = model
                .forward(&mut tape, &b, &window(2, 8, 2), &features(4), &mut Dropout::off())
                .unwrap();
            assert_eq!(tape.shape(out.y_hat), &[4]);
            assert_eq!(out.y_aux.is_some(), mode.has_aux_head());
            // 2 heads × (2 encoder + 2 decoder attentions)
            assert_eq!(out.attention.len(), 8);
            for map in out.attention {
                for row in tape.value(map).data().chunks(tape.shape(map)[1]) {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn full_size_shapes() {
        let cfg = ModelConfig {
            d_model: 16,
            n_heads: 4,
            ffn_width: 32,
            efe: EfeConfig { s: 4, ..Default::default() },
            aee: AeeConfig { hidden: 8, layers: 1 },
            t: 96,
            ..Default::default()
        };
        let (model, params) = PfModel::new(cfg, 0).unwrap();
        let y = model.predict(&params, &window(2, 96, 1), &features(288)).unwrap();
        assert_eq!(y.len(), 288);
    }

    #[test]
    fn zero_decoder_head_leaves_aux_output() {
        let cfg = tiny(EmbeddingMode::EfeAee);
        let (model, mut params) = PfModel::new(cfg, 3).unwrap();
        params.get_mut(model.head.weight).value.data_mut().fill(0.0);
        let mut tape = Tape::new();
        let b = tape.bind(&params);
        let out = model
            .forward(&mut tape, &b, &window(2, 8, 4), &features(4), &mut Dropout::off())
            .unwrap();
        assert_eq!(tape.value(out.y_hat), tape.value(out.y_aux.unwrap()));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny(EmbeddingMode::EfeAee);
        cfg.n_heads = 3;
        assert!(matches!(PfModel::new(cfg, 0), Err(Error::Config(_))));
        let mut cfg = tiny(EmbeddingMode::EfeAee);
        cfg.aee.layers = 3;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn wrong_window_shape_is_a_dimension_error() {
        let (model, params) = PfModel::new(tiny(EmbeddingMode::EfeAee), 0).unwrap();
        let err = model.predict(&params, &window(2, 7, 0), &features(4));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    fn zero_value_and_ffn_paths(model: &PfModel, params: &mut ParamSet) {
        for layer in &model.encoder {
            for lin in [layer.attention.value, layer.attention.output, layer.ffn.outer] {
                params.get_mut(lin.weight).value.data_mut().fill(0.0);
                params.get_mut(lin.bias).value.data_mut().fill(0.0);
            }
        }
    }

    #[test]
    fn residual_path_reduces_to_layer_norm() {
        let cfg = tiny(EmbeddingMode::TokenOnly);
        let (model, mut params) = PfModel::new(cfg, 5).unwrap();
        zero_value_and_ffn_paths(&model, &mut params);
        let mut tape = Tape::new();
        let b = tape.bind(&params);
        let x = tape.leaf(window(8, 8, 6));
        let mem = model
            .encoder_forward(&mut tape, &b, x, &mut Dropout::off(), &mut Vec::new())
            .unwrap();
        // one normalisation per add & norm, two per layer
        let mut expected = tape.value(x).clone();
        for _ in 0..2 * cfg.n_enc_layers {
            expected = layer_norm_rows(&expected);
        }
        for (a, e) in tape.value(mem).data().iter().zip(expected.data()) {
            assert!((a - e).abs() < 1e-10, "{a} vs {e}");
        }
    }

    #[test]
    fn encoder_and_decoder_are_unmasked() {
        let cfg = tiny(EmbeddingMode::EfeAee);
        let (model, params) = PfModel::new(cfg, 7).unwrap();
        let x0 = window(8, 8, 8);
        let mut x1 = x0.clone();
        for v in &mut x1.data_mut()[7 * 8..] {
            *v += 0.5;
        }
        let memory_row0 = |x: &Tensor| {
            let mut tape = Tape::new();
            let b = tape.bind(&params);
            let xv = tape.constant(x.clone());
            let m = model
                .encoder_forward(&mut tape, &b, xv, &mut Dropout::off(), &mut Vec::new())
                .unwrap();
            tape.value(m).row(0).to_vec()
        };
        assert_ne!(memory_row0(&x0), memory_row0(&x1));

        let y0 = window(4, 8, 9);
        let mut y1 = y0.clone();
        for v in &mut y1.data_mut()[3 * 8..] {
            *v += 0.5;
        }
        let mem = window(8, 8, 10);
        let decoder_row0 = |y: &Tensor| {
            let mut tape = Tape::new();
            let b = tape.bind(&params);
            let yv = tape.constant(y.clone());
            let mv = tape.constant(mem.clone());
            let d = model
                .decoder_forward(&mut tape, &b, yv, mv, &mut Dropout::off(), &mut Vec::new())
                .unwrap();
            tape.value(d).row(0).to_vec()
        };
        assert_ne!(decoder_row0(&y0), decoder_row0(&y1));
    }

    #[test]
    fn zero_cross_attention_isolates_decoder_from_memory() {
        let cfg = tiny(EmbeddingMode::EfeAee);
        let (model, mut params) = PfModel::new(cfg, 11).unwrap();
        for layer in &model.decoder {
            for lin in [layer.cross_attention.value, layer.cross_attention.output] {
                params.get_mut(lin.weight).value.data_mut().fill(0.0);
                params.get_mut(lin.bias).value.data_mut().fill(0.0);
            }
        }
        let y = window(4, 8, 12);
        let run = |mem: Tensor| {
            let mut tape = Tape::new();
            let b = tape.bind(&params);
            let yv = tape.constant(y.clone());
            let mv = tape.constant(mem);
            let d = model
                .decoder_forward(&mut tape, &b, yv, mv, &mut Dropout::off(), &mut Vec::new())
                .unwrap();
            tape.value(d).clone()
        };
        assert_eq!(run(Tensor::zeros(&[8, 8])), run(window(8, 8, 13)));
    }

    #[test]
    fn token_modes_and_positions() {
        let w = Tensor::from_rows(&[vec![0.7; 8], vec![-0.3; 8]]).unwrap();
        let rows = |mode| {
            let (model, params) = PfModel::new(tiny(mode), 2).unwrap();
            let mut tape = Tape::new();
            let b = tape.bind(&params);
            let x = model.encoder_input(&mut tape, &b, &w).unwrap();
            tape.value(x).clone()
        };
        let tok = rows(EmbeddingMode::TokenOnly);
        assert!((1..8).all(|j| tok.row(j) == tok.row(0)));
        let pos = rows(EmbeddingMode::PositionToken);
        assert!((1..8).all(|j| pos.row(j) != pos.row(0)));
    }

    #[test]
    fn token_only_encoder_is_permutation_equivariant() {
        let (model, params) = PfModel::new(tiny(EmbeddingMode::TokenOnly), 4).unwrap();
        let w = window(2, 8, 14);
        let perm = [3usize, 0, 7, 1, 6, 2, 5, 4];
        let mut pw = w.clone();
        for (dst, &src) in perm.iter().enumerate() {
            for i in 0..2 {
                pw.data_mut()[i * 8 + dst] = w.at(i, src);
            }
        }
        let memory = |win: &Tensor| {
            let mut tape = Tape::new();
            let b = tape.bind(&params);
            let x = model.encoder_input(&mut tape, &b, win).unwrap();
            let m = model
                .encoder_forward(&mut tape, &b, x, &mut Dropout::off(), &mut Vec::new())
                .unwrap();
            tape.value(m).clone()
        };
        let (a, p) = (memory(&w), memory(&pw));
        for (dst, &src) in perm.iter().enumerate() {
            for (x, y) in p.row(dst).iter().zip(a.row(src)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn positional_table_values() {
        let pe = positional_encoding(3, 4);
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.at(1, 0) - 1f64.sin()).abs() < 1e-15);
        assert!((pe.at(1, 3) - (1.0 / 100.0f64).cos()).abs() < 1e-15);
    }

    fn gradient_pass_fraction(mode: EmbeddingMode, seed: u64) -> f64 {
        let cfg = tiny(mode);
        let (model, params) = PfModel::new(cfg, seed).unwrap();
        let w = window(2, 8, seed + 100);
        let f = features(4);
        let target = Tensor::vector(vec![0.5, -0.1, 0.2, 0.9]);
        let report = param_gradient_check(&params, 1e-6, 1e-4, |p| {
            let mut tape = Tape::new();
            let b = tape.bind(p);
            let out = model.forward(&mut tape, &b, &w, &f, &mut Dropout::off())?;
            let y = tape.constant(target.clone());
            let loss = tape.rmse(out.y_hat, y)?;
            tape.backward(loss)?.accumulate_into(&tape, p);
            Ok(tape.value(loss).item())
        })
        .unwrap();
        report.pass_fraction()
    }

    #[test]
    fn full_model_gradient_check() {
        for seed in 0..2 {
            let frac = gradient_pass_fraction(EmbeddingMode::EfeAee, seed);
            assert!(frac >= 0.99, "seed {seed}: {frac}");
        }
        assert!(gradient_pass_fraction(EmbeddingMode::PositionToken, 9) >= 0.99);
    }
}
