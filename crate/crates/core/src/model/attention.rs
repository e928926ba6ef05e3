use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::nn::{LayerNorm, Linear};
use crate::tensor::{Binding, ParamSet, Tape, Tensor, Var};

/// Inverted dropout. Masks are drawn from a private seeded stream, so a
/// training step is reproducible from its seed.
#[derive(Clone, Debug)]
pub struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn off() -> Self {
        Dropout {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn train(rate: f64, seed: u64) -> Self {
        Dropout {
            rate,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        let Some(rng) = self.rng.as_mut() else {
            return Ok(x);
        };
        if self.rate <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - self.rate;
        let mut mask = Tensor::zeros(tape.shape(x));
        for v in mask.data_mut() {
            *v = if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
        }
        let m = tape.constant(mask);
        tape.mul(x, m)
    }
}

/// Query, key, value and output projections of one attention layer.
#[derive(Clone, Copy, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
}

impl MultiHeadAttention {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        heads: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut proj = |part: &str| Linear::new(params, &format!("{name}.{part}"), d_model, d_model, rng);
        MultiHeadAttention {
            query: proj("query"),
            key: proj("key"),
            value: proj("value"),
            output: proj("output"),
            heads,
        }
    }

    pub fn param_count(d_model: usize) -> usize {
        4 * Linear::param_count(d_model, d_model)
    }

    /// Scaled dot-product attention of the rows of `q` over the rows of `k`,
    /// `v`, without any mask. Attention maps (one per head) are pushed onto
    /// `maps`.
    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        q: Var,
        k: Var,
        v: Var,
        dropout: &mut Dropout,
        maps: &mut Vec<Var>,
    ) -> Result<Var> {
        let d = tape.shape(q)[1];
        if tape.shape(k)[1] != d || tape.shape(v) != tape.shape(k) {
            return Err(Error::dim("multi_head_attention", tape.shape(q), tape.shape(k)));
        }
        if !d.is_multiple_of(self.heads) {
            return Err(Error::Contract(format!(
                "width {d} not divisible by {} heads",
                self.heads
            )));
        }
        let dk = d / self.heads;
        let qp = self.query.forward(tape, b, q)?;
        let kp = self.key.forward(tape, b, k)?;
        let vp = self.value.forward(tape, b, v)?;
        let scale = 1.0 / (dk as f64).sqrt();
        let mut heads = Vec::with_capacity(self.heads);
        for head in 0..self.heads {
            let qh = tape.slice_cols(qp, head * dk, dk)?;
            let kh = tape.slice_cols(kp, head * dk, dk)?;
            let vh = tape.slice_cols(vp, head * dk, dk)?;
            let kt = tape.transpose(kh)?;
            let scores = tape.matmul(qh, kt)?;
            let scores = tape.scale(scores, scale);
            let weights = tape.softmax_rows(scores)?;
            maps.push(weights);
            let weights = dropout.apply(tape, weights)?;
            heads.push(tape.matmul(weights, vh)?);
        }
        let joined = if heads.len() == 1 {
            heads[0]
        } else {
            tape.concat_cols(&heads)?
        };
        self.output.forward(tape, b, joined)
    }
}

/// Position-wise two-layer network with a relu in between.
#[derive(Clone, Copy, Debug)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        width: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        FeedForward {
            inner: Linear::new(params, &format!("{name}.inner"), d_model, width, rng),
            outer: Linear::new(params, &format!("{name}.outer"), width, d_model, rng),
        }
    }

    pub fn param_count(d_model: usize, width: usize) -> usize {
        Linear::param_count(d_model, width) + Linear::param_count(width, d_model)
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        x: Var,
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let z = self.inner.forward(tape, b, x)?;
        let z = tape.relu(z);
        let z = dropout.apply(tape, z)?;
        self.outer.forward(tape, b, z)
    }
}

/// Self-attention and feed-forward, each followed by add & norm.
#[derive(Clone, Copy, Debug)]
pub struct EncoderLayer {
    pub attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub ffn: FeedForward,
    pub norm2: LayerNorm,
}

impl EncoderLayer {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        heads: usize,
        ffn: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        EncoderLayer {
            attention: MultiHeadAttention::new(params, &format!("{name}.self_attention"), d_model, heads, rng),
            norm1: LayerNorm::new(params, &format!("{name}.norm1"), d_model),
            ffn: FeedForward::new(params, &format!("{name}.ffn"), d_model, ffn, rng),
            norm2: LayerNorm::new(params, &format!("{name}.norm2"), d_model),
        }
    }

    pub fn param_count(d_model: usize, ffn: usize) -> usize {
        MultiHeadAttention::param_count(d_model) + FeedForward::param_count(d_model, ffn) + 4 * d_model
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        x: Var,
        dropout: &mut Dropout,
        maps: &mut Vec<Var>,
    ) -> Result<Var> {
        let a = self.attention.forward(tape, b, x, x, x, dropout, maps)?;
        let x = add_norm(tape, b, &self.norm1, x, a)?;
        let f = self.ffn.forward(tape, b, x, dropout)?;
        add_norm(tape, b, &self.norm2, x, f)
    }
}

/// Self-attention, cross-attention to the encoder memory and feed-forward,
/// each followed by add & norm.
#[derive(Clone, Copy, Debug)]
pub struct DecoderLayer {
    pub self_attention: MultiHeadAttention,
    pub norm1: LayerNorm,
    pub cross_attention: MultiHeadAttention,
    pub norm2: LayerNorm,
    pub ffn: FeedForward,
    pub norm3: LayerNorm,
}

impl DecoderLayer {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        d_model: usize,
        heads: usize,
        ffn: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        DecoderLayer {
            self_attention: MultiHeadAttention::new(params, &format!("{name}.self_attention"), d_model, heads, rng),
            norm1: LayerNorm::new(params, &format!("{name}.norm1"), d_model),
            cross_attention: MultiHeadAttention::new(params, &format!("{name}.cross_attention"), d_model, heads, rng),
            norm2: LayerNorm::new(params, &format!("{name}.norm2"), d_model),
            ffn: FeedForward::new(params, &format!("{name}.ffn"), d_model, ffn, rng),
            norm3: LayerNorm::new(params, &format!("{name}.norm3"), d_model),
        }
    }

    pub fn param_count(d_model: usize, ffn: usize) -> usize {
        2 * MultiHeadAttention::param_count(d_model) + FeedForward::param_count(d_model, ffn) + 6 * d_model
    }

    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape,
        b: &Binding,
        y: Var,
        memory: Var,
        dropout: &mut Dropout,
        maps: &mut Vec<Var>,
    ) -> Result<Var> {
        let a = self.self_attention.forward(tape, b, y, y, y, dropout, maps)?;
        let y = add_norm(tape, b, &self.norm1, y, a)?;
        let c = self
            .cross_attention
            .forward(tape, b, y, memory, memory, dropout, maps)?;
        let y = add_norm(tape, b, &self.norm2, y, c)?;
        let f = self.ffn.forward(tape, b, y, dropout)?;
        add_norm(tape, b, &self.norm3, y, f)
    }
}

fn add_norm(tape: &mut Tape, b: &Binding, norm: &LayerNorm, x: Var, sub: Var) -> Result<Var> {
    let s = tape.add(x, sub)?;
    norm.forward(tape, b, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_attention(params: &mut ParamSet, d: usize) -> MultiHeadAttention {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mha = MultiHeadAttention::new(params, "mha", d, 1, &mut rng);
        for lin in [mha.query, mha.key, mha.value, mha.output] {
            let w = params.get_mut(lin.weight).value.data_mut();
            w.fill(0.0);
            for i in 0..d {
                w[i * d + i] = 1.0;
            }
        }
        mha
    }

    #[test]
    fn single_key_returns_value_row() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mha = MultiHeadAttention::new(&mut params, "mha", 4, 2, &mut rng);
        let mut tape = Tape::new();
        let b = tape.bind(&params);
        let q = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0, 2.0, -1.0], vec![0.5; 4], vec![3.0, 1.0, 0.0, 0.0]]).unwrap());
        let kv = tape.constant(Tensor::from_rows(&[vec![0.2, -0.4, 1.0, 0.7]]).unwrap());
        let mut maps = Vec::new();
        let out = mha.forward(&mut tape, &b, q, kv, kv, &mut Dropout::off(), &mut maps).unwrap();
        // expected: value row projected, then output-projected
        let vrow = mha.value.forward(&mut tape, &b, kv).unwrap();
        let expected = mha.output.forward(&mut tape, &b, vrow).unwrap();
        let e = tape.value(expected).row(0).to_vec();
        for r in 0..3 {
            for (a, x) in tape.value(out).row(r).iter().zip(&e) {
                assert!((a - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hand_computed_two_by_two() {
        let mut params = ParamSet::new();
        let mha = identity_attention(&mut params, 2);
        let mut tape = Tape::new();
        let b = tape.bind(&params);
        let x = tape.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let mut maps = Vec::new();
        let out = mha.forward(&mut tape, &b, x, x, x, &mut Dropout::off(), &mut maps).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let hi = s.exp() / (s.exp() + 1.0);
        let lo = 1.0 - hi;
        let expected = [hi, lo, lo, hi];
        for (a, e) in tape.value(out).data().iter().zip(expected) {
            assert!((a - e).abs() < 1e-12, "{a} vs {e}");
        }
        assert_eq!(maps.len(), 1);
    }

    #[test]
    fn identical_queries_give_identical_rows() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mha = MultiHeadAttention::new(&mut params, "mha", 4, 2, &mut rng);
        let mut tape = Tape::new();
        let b = tape.bind(&params);
        let q = tape.constant(Tensor::from_rows(&[vec![0.3, 0.1, -0.2, 0.9], vec![0.3, 0.1, -0.2, 0.9]]).unwrap());
        let kv = tape.constant(Tensor::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![-1.0, 0.0, 1.0, 0.5], vec![0.0; 4]]).unwrap());
        let mut maps = Vec::new();
        let out = mha.forward(&mut tape, &b, q, kv, kv, &mut Dropout::off(), &mut maps).unwrap();
        assert_eq!(tape.value(out).row(0), tape.value(out).row(1));
        for m in maps {
            for row in tape.value(m).data().chunks(3) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_widths_are_rejected() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mha = MultiHeadAttention::new(&mut params, "mha", 4, 2, &mut rng);
        let mut tape = Tape::new();
        let b = tape.bind(&params);
        let q = tape.constant(Tensor::zeros(&[2, 4]));
        let k = tape.constant(Tensor::zeros(&[2, 3]));
        let err = mha.forward(&mut tape, &b, q, k, k, &mut Dropout::off(), &mut Vec::new());
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn dropout_keeps_expectation_and_is_seeded() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::ones(&[100, 100]));
        let mut d1 = Dropout::train(0.1, 5);
        let mut d2 = Dropout::train(0.1, 5);
        let a = d1.apply(&mut tape, x).unwrap();
        let b = d2.apply(&mut tape, x).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        let mean = tape.value(a).data().iter().sum::<f64>() / 10_000.0;
        assert!((mean - 1.0).abs() < 0.03, "{mean}");
        let off = Dropout::off().apply(&mut tape, x).unwrap();
        assert_eq!(off, x);
    }
}
