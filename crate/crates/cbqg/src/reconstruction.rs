//! Answer reconstruction through a straight-through Gumbel-Softmax.
//!
//! Decoder logits at teacher-forced positions are relaxed into per-position
//! distributions with Gumbel noise, discretized to one-hots by argmax in the
//! forward pass while keeping the soft gradients in the backward pass. The
//! one-hot rows are multiplied with the reconstruction model's vocabulary
//! embedding and fed through its (frozen) encoder; the loss is the mean NLL
//! of the original answer tokens.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{TokenSequence, BOS, EOS};
use crate::model::{nll_loss, teacher_forcing_views, ForwardCtx, ModelError, TapedModel};
use crate::tensor::{Tape, Tensor, TensorError};

/// Clamp bound keeping log(−log(u)) finite.
const UNIFORM_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ReconstructionError {
    #[error("generator and reconstruction model vocabularies differ: {generator} vs {qa}")]
    VocabMismatch { generator: usize, qa: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Temperature for the Gumbel-Softmax relaxation.
#[derive(Debug, Clone, Copy)]
pub struct GumbelConfig {
    pub tau: f64,
}

impl Default for GumbelConfig {
    fn default() -> Self {
        GumbelConfig { tau: 1.0 }
    }
}

/// Per-position one-hot rows over the vocabulary, carrying straight-through
/// gradient linkage to the soft Gumbel-Softmax distributions.
pub struct RelaxedQuestion {
    /// (question_len, vocab) one-hot forward values.
    pub one_hot: Tensor,
}

impl RelaxedQuestion {
    pub fn len(&self) -> usize {
        self.one_hot.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.one_hot.numel() == 0
    }

    /// Argmax token ids of the forward one-hots.
    pub fn token_ids(&self) -> Vec<usize> {
        let cols = self.one_hot.cols();
        self.one_hot
            .values
            .chunks(cols)
            .map(|row| row.iter().position(|v| *v == 1.0).expect("one-hot row"))
            .collect()
    }
}

/// Standard Gumbel noise via the inverse transform g = −log(−log(u)), with
/// u clamped into (ε, 1−ε) for numerical safety.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    let u = u.clamp(UNIFORM_EPS, 1.0 - UNIFORM_EPS);
    -(-u.ln()).ln()
}

/// Draw a (rows, cols) matrix of Gumbel noise from the given stream.
pub fn sample_gumbel(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let values = (0..rows * cols).map(|_| gumbel_from_uniform(rng.gen::<f64>())).collect();
    Tensor::new(values, vec![rows, cols])
}

/// Soft Gumbel-Softmax: softmax((log p + g) / τ) per row, where
/// log p = log_softmax(logits). Differentiable with respect to the logits.
pub fn gumbel_softmax(tape: &mut Tape, logits: &Tensor, tau: f64, noise: &Tensor) -> Tensor {
    assert!(tau > 0.0, "gumbel_softmax: temperature must be positive");
    assert_eq!(logits.shape, noise.shape, "gumbel_softmax: noise shape mismatch");
    let axis = logits.ndim() - 1;
    let log_p = tape.log_softmax(logits, axis);
    let perturbed = tape.add(&log_p, noise);
    let scaled = tape.scale(&perturbed, 1.0 / tau);
    tape.softmax(&scaled, axis)
}

/// Straight-through Gumbel-Softmax over per-position decoder logits:
/// forward rows are one-hots of the soft argmax; backward gradients equal
/// the gradients through the soft rows.
pub fn st_gumbel_softmax(
    tape: &mut Tape,
    logits: &Tensor,
    tau: f64,
    noise: &Tensor,
) -> RelaxedQuestion {
    let soft = gumbel_softmax(tape, logits, tau, noise);
    RelaxedQuestion { one_hot: tape.straight_through(&soft) }
}

/// Mean NLL of the true answer under the frozen reconstruction model, with
/// the relaxed question as input.
///
/// Input embeddings are the one-hot rows times the reconstruction model's
/// vocabulary embedding, framed by real `[BOS]`/`[EOS]` embeddings so the
/// sequence matches what the model saw in its own training.
pub fn reconstruction_loss(
    tape: &mut Tape,
    q_hat: &RelaxedQuestion,
    answer: &TokenSequence,
    qa_model: &TapedModel,
    generator_vocab_size: usize,
    ctx: &mut ForwardCtx,
) -> Result<Tensor, ReconstructionError> {
    let qa_vocab = qa_model.embedding.shape[0];
    if qa_vocab != generator_vocab_size || q_hat.one_hot.cols() != qa_vocab {
        return Err(ReconstructionError::VocabMismatch {
            generator: generator_vocab_size.max(q_hat.one_hot.cols()),
            qa: qa_vocab,
        });
    }

    // Soft token embeddings: (m, |V|) @ (|V|, d).
    let soft_emb = tape.matmul(&q_hat.one_hot, &qa_model.embedding);
    let bos_emb = tape.embedding(&qa_model.embedding, &[BOS]);
    let eos_emb = tape.embedding(&qa_model.embedding, &[EOS]);
    let framed = tape.concat(&[&bos_emb, &soft_emb, &eos_emb], 0);
    let key_valid = vec![true; framed.rows()];
    let enc = qa_model.encode_from_embeddings(tape, &framed, &key_valid, ctx)?;

    let (prefix, targets, valid) = teacher_forcing_views(answer);
    let logits = qa_model.decode_logits(tape, &enc, &prefix, ctx)?;
    Ok(nll_loss(tape, &logits, &targets, &valid)?)
}

/// Relax the generator's teacher-forced decoder logits into a
/// straight-through question: one row per ground-truth question token
/// (`[EOS]`-prediction row excluded), so the relaxed length equals the
/// question length.
pub fn relax_question(
    tape: &mut Tape,
    decoder_logits: &Tensor,
    question_len: usize,
    cfg: GumbelConfig,
    noise: &Tensor,
) -> RelaxedQuestion {
    assert!(question_len >= 1, "relax_question: empty question");
    assert!(
        question_len <= decoder_logits.rows(),
        "relax_question: more question tokens than logit rows"
    );
    let body_logits = tape.slice(decoder_logits, 0, 0, question_len);
    st_gumbel_softmax(tape, &body_logits, cfg.tau, noise)
}
