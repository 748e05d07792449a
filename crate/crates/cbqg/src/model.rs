//! Transformer encoder–decoder.
//!
//! The encoder maps a source token sequence to continuous representations
//! `z`; the decoder generates the target autoregressively with causal
//! self-attention and cross-attention over `z`. The same architecture serves
//! both directions: answers → questions for generation, questions → answers
//! for reconstruction.
//!
//! Implementation notes: post-layer-norm sublayers, sinusoidal positional
//! encodings, per-head projection matrices (mathematically identical to the
//! fused layout, no reshapes needed), and inverted dropout applied to the
//! embedding and each sublayer output. Parameters initialize from
//! uniform(−0.08, 0.08) except layer-norm gains (1) and biases (0).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{TokenSequence, BOS, EOS, PAD};
use crate::tensor::{Tape, Tensor, TensorError};

/// Additive mask value for blocked attention edges.
const MASK_NEG: f64 = -1e30;

/// Architecture sizes and sequence limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub d_model: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub vocab_size: usize,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub dropout_rate: f64,
}

impl ModelConfig {
    /// Sizes that train in minutes on CPU while exercising every code path.
    pub fn toy(vocab_size: usize, max_src_len: usize, max_tgt_len: usize) -> Self {
        ModelConfig {
            num_layers: 2,
            d_model: 64,
            num_heads: 4,
            ffn_dim: 128,
            vocab_size,
            max_src_len,
            max_tgt_len,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("num_layers", self.num_layers),
            ("d_model", self.d_model),
            ("num_heads", self.num_heads),
            ("ffn_dim", self.ffn_dim),
            ("vocab_size", self.vocab_size),
            ("max_src_len", self.max_src_len),
            ("max_tgt_len", self.max_tgt_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig { field: name, reason: "must be positive" });
            }
        }
        if !self.d_model.is_multiple_of(self.num_heads) {
            return Err(ModelError::InvalidConfig {
                field: "num_heads",
                reason: "d_model must be divisible by num_heads",
            });
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidConfig {
                field: "dropout_rate",
                reason: "must lie in [0, 1)",
            });
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.num_heads
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: &'static str },
    #[error("sequence length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A named trainable buffer.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Param {
    fn uniform(name: String, shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Self {
        let n = shape.iter().product();
        let values = (0..n).map(|_| rng.gen_range(-0.08..0.08)).collect();
        Param { name, shape, values }
    }

    fn constant(name: String, shape: Vec<usize>, v: f64) -> Self {
        let n = shape.iter().product();
        Param { name, shape, values: vec![v; n] }
    }
}

#[derive(Debug, Clone)]
struct LnParams {
    gain: Param,
    bias: Param,
}

impl LnParams {
    fn init(prefix: &str, d: usize) -> Self {
        LnParams {
            gain: Param::constant(format!("{prefix}.gain"), vec![d], 1.0),
            bias: Param::constant(format!("{prefix}.bias"), vec![d], 0.0),
        }
    }
}

#[derive(Debug, Clone)]
struct HeadParams {
    wq: Param,
    wk: Param,
    wv: Param,
}

#[derive(Debug, Clone)]
struct AttnParams {
    heads: Vec<HeadParams>,
    wo: Param,
    bo: Param,
}

impl AttnParams {
    fn build(prefix: &str, cfg: &ModelConfig, make: &mut dyn FnMut(String, Vec<usize>) -> Param) -> Self {
        let (d, h) = (cfg.d_model, cfg.head_dim());
        let heads = (0..cfg.num_heads)
            .map(|i| HeadParams {
                wq: make(format!("{prefix}.h{i}.wq"), vec![d, h]),
                wk: make(format!("{prefix}.h{i}.wk"), vec![d, h]),
                wv: make(format!("{prefix}.h{i}.wv"), vec![d, h]),
            })
            .collect();
        AttnParams {
            heads,
            wo: make(format!("{prefix}.wo"), vec![d, d]),
            bo: make(format!("{prefix}.bo"), vec![d]),
        }
    }
}

#[derive(Debug, Clone)]
struct FfnParams {
    w1: Param,
    b1: Param,
    w2: Param,
    b2: Param,
}

impl FfnParams {
    fn build(prefix: &str, cfg: &ModelConfig, make: &mut dyn FnMut(String, Vec<usize>) -> Param) -> Self {
        let (d, f) = (cfg.d_model, cfg.ffn_dim);
        FfnParams {
            w1: make(format!("{prefix}.w1"), vec![d, f]),
            b1: make(format!("{prefix}.b1"), vec![f]),
            w2: make(format!("{prefix}.w2"), vec![f, d]),
            b2: make(format!("{prefix}.b2"), vec![d]),
        }
    }
}

#[derive(Debug, Clone)]
struct EncLayerParams {
    attn: AttnParams,
    ln1: LnParams,
    ffn: FfnParams,
    ln2: LnParams,
}

#[derive(Debug, Clone)]
struct DecLayerParams {
    self_attn: AttnParams,
    ln1: LnParams,
    cross_attn: AttnParams,
    ln2: LnParams,
    ffn: FfnParams,
    ln3: LnParams,
}

/// The full parameter set plus configuration.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub cfg: ModelConfig,
    embedding: Param,
    out_w: Param,
    out_b: Param,
    enc_layers: Vec<EncLayerParams>,
    dec_layers: Vec<DecLayerParams>,
}

impl Seq2SeqModel {
    fn build(
        cfg: ModelConfig,
        make: &mut dyn FnMut(String, Vec<usize>) -> Param,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        let (v, d) = (cfg.vocab_size, cfg.d_model);
        let embedding = make("embedding".into(), vec![v, d]);
        let out_w = make("out.w".into(), vec![d, v]);
        let out_b = make("out.b".into(), vec![v]);
        let enc_layers = (0..cfg.num_layers)
            .map(|l| EncLayerParams {
                attn: AttnParams::build(&format!("enc.{l}.attn"), &cfg, make),
                ln1: LnParams::init(&format!("enc.{l}.ln1"), d),
                ffn: FfnParams::build(&format!("enc.{l}.ffn"), &cfg, make),
                ln2: LnParams::init(&format!("enc.{l}.ln2"), d),
            })
            .collect();
        let dec_layers = (0..cfg.num_layers)
            .map(|l| DecLayerParams {
                self_attn: AttnParams::build(&format!("dec.{l}.self"), &cfg, make),
                ln1: LnParams::init(&format!("dec.{l}.ln1"), d),
                cross_attn: AttnParams::build(&format!("dec.{l}.cross"), &cfg, make),
                ln2: LnParams::init(&format!("dec.{l}.ln2"), d),
                ffn: FfnParams::build(&format!("dec.{l}.ffn"), &cfg, make),
                ln3: LnParams::init(&format!("dec.{l}.ln3"), d),
            })
            .collect();
        Ok(Seq2SeqModel { cfg, embedding, out_w, out_b, enc_layers, dec_layers })
    }

    /// Initialize all parameters from the given generator: uniform(−0.08,
    /// 0.08) weights, layer-norm gains 1 and biases 0.
    pub fn init(cfg: ModelConfig, rng: &mut ChaCha8Rng) -> Result<Self, ModelError> {
        Self::build(cfg, &mut |name, shape| Param::uniform(name, shape, rng))
    }

    /// A zero-valued parameter skeleton; checkpoint loading fills it in.
    pub fn zeroed(cfg: ModelConfig) -> Result<Self, ModelError> {
        Self::build(cfg, &mut |name, shape| Param::constant(name, shape, 0.0))
    }

    /// All parameters in a fixed traversal order (checkpoint and optimizer
    /// order).
    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.embedding, &self.out_w, &self.out_b];
        for l in &self.enc_layers {
            for h in &l.attn.heads {
                out.extend([&h.wq, &h.wk, &h.wv]);
            }
            out.extend([&l.attn.wo, &l.attn.bo, &l.ln1.gain, &l.ln1.bias]);
            out.extend([&l.ffn.w1, &l.ffn.b1, &l.ffn.w2, &l.ffn.b2]);
            out.extend([&l.ln2.gain, &l.ln2.bias]);
        }
        for l in &self.dec_layers {
            for h in &l.self_attn.heads {
                out.extend([&h.wq, &h.wk, &h.wv]);
            }
            out.extend([&l.self_attn.wo, &l.self_attn.bo, &l.ln1.gain, &l.ln1.bias]);
            for h in &l.cross_attn.heads {
                out.extend([&h.wq, &h.wk, &h.wv]);
            }
            out.extend([&l.cross_attn.wo, &l.cross_attn.bo, &l.ln2.gain, &l.ln2.bias]);
            out.extend([&l.ffn.w1, &l.ffn.b1, &l.ffn.w2, &l.ffn.b2]);
            out.extend([&l.ln3.gain, &l.ln3.bias]);
        }
        out
    }

    /// Mutable view over the same traversal order as [`Seq2SeqModel::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> =
            vec![&mut self.embedding, &mut self.out_w, &mut self.out_b];
        for l in &mut self.enc_layers {
            for h in &mut l.attn.heads {
                out.extend([&mut h.wq, &mut h.wk, &mut h.wv]);
            }
            out.extend([&mut l.attn.wo, &mut l.attn.bo, &mut l.ln1.gain, &mut l.ln1.bias]);
            out.extend([&mut l.ffn.w1, &mut l.ffn.b1, &mut l.ffn.w2, &mut l.ffn.b2]);
            out.extend([&mut l.ln2.gain, &mut l.ln2.bias]);
        }
        for l in &mut self.dec_layers {
            for h in &mut l.self_attn.heads {
                out.extend([&mut h.wq, &mut h.wk, &mut h.wv]);
            }
            out.extend([
                &mut l.self_attn.wo,
                &mut l.self_attn.bo,
                &mut l.ln1.gain,
                &mut l.ln1.bias,
            ]);
            for h in &mut l.cross_attn.heads {
                out.extend([&mut h.wq, &mut h.wk, &mut h.wv]);
            }
            out.extend([
                &mut l.cross_attn.wo,
                &mut l.cross_attn.bo,
                &mut l.ln2.gain,
                &mut l.ln2.bias,
            ]);
            out.extend([&mut l.ffn.w1, &mut l.ffn.b1, &mut l.ffn.w2, &mut l.ffn.b2]);
            out.extend([&mut l.ln3.gain, &mut l.ln3.bias]);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|p| p.values.len()).sum()
    }

    // ── Eval-mode conveniences (fresh tape per call) ─────────────────

    pub fn encode_eval(&self, seq: &TokenSequence) -> Result<EncoderOutput, ModelError> {
        let mut tape = Tape::new();
        let taped = TapedModel::register(&mut tape, self, false);
        taped.encode(&mut tape, seq, &mut ForwardCtx::eval())
    }

    pub fn decode_logits_eval(
        &self,
        enc: &EncoderOutput,
        prefix: &[usize],
    ) -> Result<Tensor, ModelError> {
        let mut tape = Tape::new();
        let taped = TapedModel::register(&mut tape, self, false);
        taped.decode_logits(&mut tape, enc, prefix, &mut ForwardCtx::eval())
    }

    /// Greedy argmax decoding from `[BOS]`: appends the highest-probability
    /// token each step (ties → lowest id), stopping at `[EOS]` or when the
    /// sequence reaches `max_len` ids.
    pub fn greedy_generate(
        &self,
        enc: &EncoderOutput,
        max_len: usize,
    ) -> Result<TokenSequence, ModelError> {
        let max_len = max_len.min(self.cfg.max_tgt_len);
        let mut ids = vec![BOS];
        while ids.len() < max_len {
            let logits = self.decode_logits_eval(enc, &ids)?;
            let cols = logits.cols();
            let last = &logits.values[(logits.rows() - 1) * cols..];
            let mut best = 0;
            for (i, v) in last.iter().enumerate() {
                if *v > last[best] {
                    best = i;
                }
            }
            ids.push(best);
            if best == EOS {
                break;
            }
        }
        Ok(TokenSequence { ids })
    }
}

/// Encoder output: continuous representations plus the source key mask.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// (src_len, d_model) representations.
    pub z: Tensor,
    /// Which source positions are real tokens (false at `[PAD]`).
    pub key_valid: Vec<bool>,
}

/// Forward-pass mode: evaluation is deterministic; training draws dropout
/// masks from the provided stream.
pub struct ForwardCtx<'a> {
    pub train: bool,
    pub dropout_rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a> ForwardCtx<'a> {
    pub fn eval() -> Self {
        ForwardCtx { train: false, dropout_rng: None }
    }

    pub fn train(rng: &'a mut ChaCha8Rng) -> Self {
        ForwardCtx { train: true, dropout_rng: Some(rng) }
    }
}

// ── On-tape registration ──────────────────────────────────────────────

struct TapedLn {
    gain: Tensor,
    bias: Tensor,
}

struct TapedHead {
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
}

struct TapedAttn {
    heads: Vec<TapedHead>,
    wo: Tensor,
    bo: Tensor,
}

struct TapedFfn {
    w1: Tensor,
    b1: Tensor,
    w2: Tensor,
    b2: Tensor,
}

struct TapedEncLayer {
    attn: TapedAttn,
    ln1: TapedLn,
    ffn: TapedFfn,
    ln2: TapedLn,
}

struct TapedDecLayer {
    self_attn: TapedAttn,
    ln1: TapedLn,
    cross_attn: TapedAttn,
    ln2: TapedLn,
    ffn: TapedFfn,
    ln3: TapedLn,
}

/// A model's parameters registered as leaves on one tape. `trainable`
/// controls whether gradients accumulate (false freezes the model while
/// still letting gradients flow *through* its activations).
pub struct TapedModel {
    cfg: ModelConfig,
    pub embedding: Tensor,
    out_w: Tensor,
    out_b: Tensor,
    enc_layers: Vec<TapedEncLayer>,
    dec_layers: Vec<TapedDecLayer>,
}

fn reg(tape: &mut Tape, p: &Param, trainable: bool) -> Tensor {
    tape.leaf(p.values.clone(), p.shape.clone(), trainable)
}

impl TapedModel {
    pub fn register(tape: &mut Tape, model: &Seq2SeqModel, trainable: bool) -> Self {
        let t = trainable;
        let enc_layers = model
            .enc_layers
            .iter()
            .map(|l| TapedEncLayer {
                attn: Self::reg_attn(tape, &l.attn, t),
                ln1: TapedLn { gain: reg(tape, &l.ln1.gain, t), bias: reg(tape, &l.ln1.bias, t) },
                ffn: Self::reg_ffn(tape, &l.ffn, t),
                ln2: TapedLn { gain: reg(tape, &l.ln2.gain, t), bias: reg(tape, &l.ln2.bias, t) },
            })
            .collect();
        let dec_layers = model
            .dec_layers
            .iter()
            .map(|l| TapedDecLayer {
                self_attn: Self::reg_attn(tape, &l.self_attn, t),
                ln1: TapedLn { gain: reg(tape, &l.ln1.gain, t), bias: reg(tape, &l.ln1.bias, t) },
                cross_attn: Self::reg_attn(tape, &l.cross_attn, t),
                ln2: TapedLn { gain: reg(tape, &l.ln2.gain, t), bias: reg(tape, &l.ln2.bias, t) },
                ffn: Self::reg_ffn(tape, &l.ffn, t),
                ln3: TapedLn { gain: reg(tape, &l.ln3.gain, t), bias: reg(tape, &l.ln3.bias, t) },
            })
            .collect();
        TapedModel {
            cfg: model.cfg.clone(),
            embedding: reg(tape, &model.embedding, t),
            out_w: reg(tape, &model.out_w, t),
            out_b: reg(tape, &model.out_b, t),
            enc_layers,
            dec_layers,
        }
    }

    fn reg_attn(tape: &mut Tape, a: &AttnParams, t: bool) -> TapedAttn {
        TapedAttn {
            heads: a
                .heads
                .iter()
                .map(|h| TapedHead {
                    wq: reg(tape, &h.wq, t),
                    wk: reg(tape, &h.wk, t),
                    wv: reg(tape, &h.wv, t),
                })
                .collect(),
            wo: reg(tape, &a.wo, t),
            bo: reg(tape, &a.bo, t),
        }
    }

    fn reg_ffn(tape: &mut Tape, f: &FfnParams, t: bool) -> TapedFfn {
        TapedFfn {
            w1: reg(tape, &f.w1, t),
            b1: reg(tape, &f.b1, t),
            w2: reg(tape, &f.w2, t),
            b2: reg(tape, &f.b2, t),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Tape handles in the same order as [`Seq2SeqModel::params`].
    pub fn param_tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.embedding, &self.out_w, &self.out_b];
        for l in &self.enc_layers {
            for h in &l.attn.heads {
                out.extend([&h.wq, &h.wk, &h.wv]);
            }
            out.extend([&l.attn.wo, &l.attn.bo, &l.ln1.gain, &l.ln1.bias]);
            out.extend([&l.ffn.w1, &l.ffn.b1, &l.ffn.w2, &l.ffn.b2]);
            out.extend([&l.ln2.gain, &l.ln2.bias]);
        }
        for l in &self.dec_layers {
            for h in &l.self_attn.heads {
                out.extend([&h.wq, &h.wk, &h.wv]);
            }
            out.extend([&l.self_attn.wo, &l.self_attn.bo, &l.ln1.gain, &l.ln1.bias]);
            for h in &l.cross_attn.heads {
                out.extend([&h.wq, &h.wk, &h.wv]);
            }
            out.extend([&l.cross_attn.wo, &l.cross_attn.bo, &l.ln2.gain, &l.ln2.bias]);
            out.extend([&l.ffn.w1, &l.ffn.b1, &l.ffn.w2, &l.ffn.b2]);
            out.extend([&l.ln3.gain, &l.ln3.bias]);
        }
        out
    }

    // ── Forward passes ───────────────────────────────────────────────

    /// Encode a token sequence to continuous representations.
    pub fn encode(
        &self,
        tape: &mut Tape,
        seq: &TokenSequence,
        ctx: &mut ForwardCtx,
    ) -> Result<EncoderOutput, ModelError> {
        if seq.len() > self.cfg.max_src_len {
            return Err(ModelError::SequenceTooLong {
                len: seq.len(),
                max: self.cfg.max_src_len,
            });
        }
        let emb = tape.embedding(&self.embedding, &seq.ids);
        let key_valid: Vec<bool> = seq.ids.iter().map(|&id| id != PAD).collect();
        self.encode_from_embeddings(tape, &emb, &key_valid, ctx)
    }

    /// Encoder stack over raw token embeddings. Entry point for feeding
    /// relaxed one-hot questions through a reconstruction model.
    pub fn encode_from_embeddings(
        &self,
        tape: &mut Tape,
        emb: &Tensor,
        key_valid: &[bool],
        ctx: &mut ForwardCtx,
    ) -> Result<EncoderOutput, ModelError> {
        let len = emb.rows();
        if len > self.cfg.max_src_len {
            return Err(ModelError::SequenceTooLong { len, max: self.cfg.max_src_len });
        }
        assert_eq!(key_valid.len(), len, "key mask length mismatch");
        let mut x = self.embed_positions(tape, emb, ctx);
        let mask = additive_mask(len, len, key_valid, false);
        for layer in &self.enc_layers {
            let attn = attention(
                tape,
                &layer.attn,
                &x,
                &x,
                &mask,
                self.cfg.head_dim(),
            );
            let attn = self.dropout(tape, &attn, ctx);
            let sum = tape.add(&x, &attn);
            x = tape.layer_norm(&sum, &layer.ln1.gain, &layer.ln1.bias, 1e-5);

            let ffn = feed_forward(tape, &layer.ffn, &x);
            let ffn = self.dropout(tape, &ffn, ctx);
            let sum = tape.add(&x, &ffn);
            x = tape.layer_norm(&sum, &layer.ln2.gain, &layer.ln2.bias, 1e-5);
        }
        Ok(EncoderOutput { z: x, key_valid: key_valid.to_vec() })
    }

    /// Teacher-forced decoder: logits at position t depend only on
    /// `prefix[0..=t]` and the encoder output.
    pub fn decode_logits(
        &self,
        tape: &mut Tape,
        enc: &EncoderOutput,
        prefix: &[usize],
        ctx: &mut ForwardCtx,
    ) -> Result<Tensor, ModelError> {
        if prefix.len() > self.cfg.max_tgt_len {
            return Err(ModelError::SequenceTooLong {
                len: prefix.len(),
                max: self.cfg.max_tgt_len,
            });
        }
        assert!(!prefix.is_empty(), "decoder prefix must not be empty");
        let len = prefix.len();
        let emb = tape.embedding(&self.embedding, prefix);
        let mut x = self.embed_positions(tape, &emb, ctx);
        let tgt_valid: Vec<bool> = prefix.iter().map(|&id| id != PAD).collect();
        let self_mask = additive_mask(len, len, &tgt_valid, true);
        let cross_mask = additive_mask(len, enc.key_valid.len(), &enc.key_valid, false);
        for layer in &self.dec_layers {
            let attn =
                attention(tape, &layer.self_attn, &x, &x, &self_mask, self.cfg.head_dim());
            let attn = self.dropout(tape, &attn, ctx);
            let sum = tape.add(&x, &attn);
            x = tape.layer_norm(&sum, &layer.ln1.gain, &layer.ln1.bias, 1e-5);

            let cross =
                attention(tape, &layer.cross_attn, &x, &enc.z, &cross_mask, self.cfg.head_dim());
            let cross = self.dropout(tape, &cross, ctx);
            let sum = tape.add(&x, &cross);
            x = tape.layer_norm(&sum, &layer.ln2.gain, &layer.ln2.bias, 1e-5);

            let ffn = feed_forward(tape, &layer.ffn, &x);
            let ffn = self.dropout(tape, &ffn, ctx);
            let sum = tape.add(&x, &ffn);
            x = tape.layer_norm(&sum, &layer.ln3.gain, &layer.ln3.bias, 1e-5);
        }
        let proj = tape.matmul(&x, &self.out_w);
        Ok(tape.add(&proj, &self.out_b))
    }

    /// Scale embeddings, add sinusoidal positions, apply embedding dropout.
    fn embed_positions(&self, tape: &mut Tape, emb: &Tensor, ctx: &mut ForwardCtx) -> Tensor {
        let len = emb.rows();
        let scaled = tape.scale(emb, (self.cfg.d_model as f64).sqrt());
        let pos = positional_encoding(len, self.cfg.d_model);
        let with_pos = tape.add(&scaled, &pos);
        self.dropout(tape, &with_pos, ctx)
    }

    /// Inverted dropout: keep with probability 1−p, scaling survivors by
    /// 1/(1−p). Draws nothing in eval mode or at rate zero, so disabled
    /// branches leave the random stream untouched.
    fn dropout(&self, tape: &mut Tape, x: &Tensor, ctx: &mut ForwardCtx) -> Tensor {
        let rate = self.cfg.dropout_rate;
        if !ctx.train || rate == 0.0 {
            return x.clone();
        }
        let rng = ctx.dropout_rng.as_mut().expect("training forward requires a dropout stream");
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..x.numel())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mask = Tensor::new(mask, x.shape.clone());
        tape.mul(x, &mask)
    }
}

/// Mean NLL of the target tokens given decoder logits, excluding positions
/// where `valid` is false (padding).
pub fn nll_loss(
    tape: &mut Tape,
    logits: &Tensor,
    targets: &[usize],
    valid: &[bool],
) -> Result<Tensor, TensorError> {
    let lp = tape.log_softmax(logits, 1);
    tape.gather_nll(&lp, targets, valid)
}

/// Split a framed target sequence into (decoder input, predicted targets,
/// valid mask): `[BOS, t1..tm, EOS]` → prefix `[BOS, t1..tm]`, targets
/// `[t1..tm, EOS]`.
pub fn teacher_forcing_views(seq: &TokenSequence) -> (Vec<usize>, Vec<usize>, Vec<bool>) {
    let trimmed = seq.trimmed();
    assert!(trimmed.len() >= 2, "sequence must contain at least [BOS] and [EOS]");
    let prefix = trimmed[..trimmed.len() - 1].to_vec();
    let targets = trimmed[1..].to_vec();
    let valid = targets.iter().map(|&id| id != PAD).collect();
    (prefix, targets, valid)
}

/// Multi-head attention with an additive mask on the score matrix.
fn attention(
    tape: &mut Tape,
    attn: &TapedAttn,
    x_q: &Tensor,
    x_kv: &Tensor,
    mask: &Tensor,
    head_dim: usize,
) -> Tensor {
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut head_outputs = Vec::with_capacity(attn.heads.len());
    for head in &attn.heads {
        let q = tape.matmul(x_q, &head.wq);
        let k = tape.matmul(x_kv, &head.wk);
        let v = tape.matmul(x_kv, &head.wv);
        let scores = tape.matmul_nt(&q, &k);
        let scores = tape.scale(&scores, scale);
        let scores = tape.add(&scores, mask);
        let probs = tape.softmax(&scores, 1);
        head_outputs.push(tape.matmul(&probs, &v));
    }
    let refs: Vec<&Tensor> = head_outputs.iter().collect();
    let concat = tape.concat(&refs, 1);
    let proj = tape.matmul(&concat, &attn.wo);
    tape.add(&proj, &attn.bo)
}

/// Position-wise feed-forward: W2·relu(W1·x + b1) + b2.
fn feed_forward(tape: &mut Tape, ffn: &TapedFfn, x: &Tensor) -> Tensor {
    let h = tape.matmul(x, &ffn.w1);
    let h = tape.add(&h, &ffn.b1);
    let h = tape.relu(&h);
    let out = tape.matmul(&h, &ffn.w2);
    tape.add(&out, &ffn.b2)
}

/// (q_len, k_len) additive mask: 0 on allowed edges, a large negative on
/// padded keys and (when `causal`) future positions.
fn additive_mask(q_len: usize, k_len: usize, key_valid: &[bool], causal: bool) -> Tensor {
    let mut values = vec![0.0; q_len * k_len];
    for qi in 0..q_len {
        for ki in 0..k_len {
            let blocked = !key_valid[ki] || (causal && ki > qi);
            if blocked {
                values[qi * k_len + ki] = MASK_NEG;
            }
        }
    }
    Tensor::new(values, vec![q_len, k_len])
}

/// Sinusoidal positional encodings for `len` positions.
fn positional_encoding(len: usize, d_model: usize) -> Tensor {
    let mut values = vec![0.0; len * d_model];
    for pos in 0..len {
        for i in 0..d_model / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            values[pos * d_model + 2 * i] = angle.sin();
            values[pos * d_model + 2 * i + 1] = angle.cos();
        }
    }
    Tensor::new(values, vec![len, d_model])
}
