//! Contrastive sentence-embedding loss.
//!
//! Anchors are answer `[CLS]` embeddings; positives come from either the
//! ground-truth question (`CL_t`) or a second dropout-perturbed encoding of
//! the same answer (`CL_s`). The other 2(N−1) embeddings in a mini-batch are
//! the negatives. The loss is the temperature-scaled cross entropy over
//! cosine similarities, averaged over both views of every pair, with the
//! self term excluded from each denominator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TokenSequence;
use crate::model::{ForwardCtx, ModelError, TapedModel};
use crate::tensor::{Tape, Tensor, TensorError};

/// Positive-pair construction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClStrategy {
    /// Ground-truth question as the positive of its answer.
    ClT,
    /// Two dropout views of the same answer.
    ClS,
    /// Contrastive branch disabled.
    Off,
}

#[derive(Debug, Error)]
pub enum ContrastiveError {
    #[error("batch is empty")]
    EmptyBatch,
    #[error("temperature must be positive (got {0})")]
    BadTemperature(f64),
    #[error("anchors and positives differ in count: {anchors} vs {positives}")]
    CountMismatch { anchors: usize, positives: usize },
    #[error("sequence must begin with [CLS]")]
    MissingCls,
    #[error("the dropout-view strategy requires train mode with dropout_rate > 0")]
    DropoutUnavailable,
    #[error("positives requested while the contrastive branch is disabled")]
    StrategyDisabled,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// N anchor/positive embedding pairs and the loss temperature.
pub struct EmbeddingBatch {
    pub anchors: Vec<Tensor>,
    pub positives: Vec<Tensor>,
    pub tau: f64,
}

impl EmbeddingBatch {
    fn validate(&self) -> Result<(), ContrastiveError> {
        if self.anchors.is_empty() {
            return Err(ContrastiveError::EmptyBatch);
        }
        if self.anchors.len() != self.positives.len() {
            return Err(ContrastiveError::CountMismatch {
                anchors: self.anchors.len(),
                positives: self.positives.len(),
            });
        }
        if self.tau <= 0.0 {
            return Err(ContrastiveError::BadTemperature(self.tau));
        }
        Ok(())
    }
}

/// The `[CLS]` sentence embedding: encoder output row 0 of a
/// `[CLS]`-prefixed sequence.
pub fn cls_embedding(
    tape: &mut Tape,
    model: &TapedModel,
    seq: &TokenSequence,
    ctx: &mut ForwardCtx,
) -> Result<Tensor, ContrastiveError> {
    if !seq.starts_with_cls() {
        return Err(ContrastiveError::MissingCls);
    }
    let enc = model.encode(tape, seq, ctx)?;
    Ok(tape.slice(&enc.z, 0, 0, 1))
}

/// Build anchor/positive embeddings for a batch of (answer, question)
/// sequences under the chosen strategy. Sequences must be `[CLS]`-prefixed.
pub fn make_positives(
    tape: &mut Tape,
    model: &TapedModel,
    batch: &[(TokenSequence, TokenSequence)],
    strategy: ClStrategy,
    tau: f64,
    dropout_rate: f64,
    ctx: &mut ForwardCtx,
) -> Result<EmbeddingBatch, ContrastiveError> {
    if batch.is_empty() {
        return Err(ContrastiveError::EmptyBatch);
    }
    let mut anchors = Vec::with_capacity(batch.len());
    let mut positives = Vec::with_capacity(batch.len());
    match strategy {
        ClStrategy::Off => return Err(ContrastiveError::StrategyDisabled),
        ClStrategy::ClT => {
            for (answer, question) in batch {
                anchors.push(cls_embedding(tape, model, answer, ctx)?);
                positives.push(cls_embedding(tape, model, question, ctx)?);
            }
        }
        ClStrategy::ClS => {
            // Two dropout draws of the same input; identical without dropout.
            if !ctx.train || dropout_rate == 0.0 {
                return Err(ContrastiveError::DropoutUnavailable);
            }
            for (answer, _) in batch {
                anchors.push(cls_embedding(tape, model, answer, ctx)?);
                positives.push(cls_embedding(tape, model, answer, ctx)?);
            }
        }
    }
    Ok(EmbeddingBatch { anchors, positives, tau })
}

/// Normalized temperature-scaled cross entropy over the 2N in-batch views.
///
/// For each view v with positive p(v): −log softmax over similarities to
/// the other 2N−1 views, evaluated at p(v); the result is the mean over all
/// 2N views. A single pair (N = 1) has only its positive in the
/// denominator, so the loss is exactly 0.
pub fn nt_xent_loss(tape: &mut Tape, batch: &EmbeddingBatch) -> Result<Tensor, ContrastiveError> {
    batch.validate()?;
    let n = batch.anchors.len();
    let views: Vec<&Tensor> = batch.anchors.iter().chain(batch.positives.iter()).collect();
    for v in &views {
        let norm: f64 = v.values.iter().map(|x| x * x).sum::<f64>();
        if norm == 0.0 {
            return Err(ContrastiveError::Tensor(TensorError::ZeroNorm));
        }
    }
    let total = 2 * n;
    let inv_tau = 1.0 / batch.tau;

    // Scaled cosine similarity for every unordered view pair, computed once.
    let mut sims: Vec<Option<Tensor>> = vec![None; total * total];
    for i in 0..total {
        for j in (i + 1)..total {
            let s = tape.cosine(views[i], views[j])?;
            let s = tape.scale(&s, inv_tau);
            sims[i * total + j] = Some(s);
        }
    }
    let sim = |sims: &[Option<Tensor>], i: usize, j: usize| -> Tensor {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        sims[lo * total + hi].clone().expect("similarity computed")
    };

    let mut per_view = Vec::with_capacity(total);
    for i in 0..total {
        let positive = (i + n) % total;
        // Similarities of view i to all other views, positive first.
        let mut row = vec![sim(&sims, i, positive)];
        for j in 0..total {
            if j != i && j != positive {
                row.push(sim(&sims, i, j));
            }
        }
        let refs: Vec<&Tensor> = row.iter().collect();
        let logits = tape.concat(&refs, 0);
        let lp = tape.log_softmax(&logits, 0);
        // −log-probability of the positive (index 0 of the row).
        let pos_lp = tape.slice(&lp, 0, 0, 1);
        per_view.push(tape.scale(&pos_lp, -1.0));
    }
    let refs: Vec<&Tensor> = per_view.iter().collect();
    let stacked = tape.concat(&refs, 0);
    Ok(tape.mean(&stacked))
}
