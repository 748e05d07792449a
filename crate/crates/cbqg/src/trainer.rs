//! Joint training loop, optimizer, and checkpoint selection.
//!
//! One training step: forward the generation NLL, the contrastive loss per
//! strategy, and the reconstruction loss through the straight-through path;
//! sum with the λ weights; one Adam step. After every epoch the model is
//! scored by greedy-decoding the validation split with ROUGE-L, and the
//! epoch with the highest score becomes the returned checkpoint.
//!
//! Branches are only *constructed* when their weight is active, so a run
//! with λ₂ = λ₃ = 0 consumes exactly the same random draws as a plain NLL
//! loop and reproduces it bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, Direction};
use crate::contrastive::{make_positives, nt_xent_loss, ClStrategy, ContrastiveError};
use crate::data::{decode, encode, DatasetSplit, EncodeMode, QAPair, TokenSequence, Vocab};
use crate::model::{
    nll_loss, teacher_forcing_views, ForwardCtx, ModelConfig, ModelError, Seq2SeqModel,
    TapedModel,
};
use crate::reconstruction::{
    reconstruction_loss, relax_question, sample_gumbel, GumbelConfig, ReconstructionError,
};
use crate::rng::{fisher_yates, stream_rng, Stream};
use crate::rouge::corpus_rouge_l_f1;
use crate::tensor::{Tape, Tensor, TensorError};

/// Loss weights and optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub tau_cl: f64,
    pub tau_gs: f64,
    pub cl_strategy: ClStrategy,
    pub ar_enabled: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda1: 1.0,
            lambda2: 0.1,
            lambda3: 0.1,
            learning_rate: 5e-5,
            epochs: 5,
            batch_size: 16,
            tau_cl: 0.3,
            tau_gs: 1.0,
            cl_strategy: ClStrategy::ClT,
            ar_enabled: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let field = |name: &'static str, ok: bool, reason: &'static str| {
            if ok {
                Ok(())
            } else {
                Err(TrainError::InvalidConfig { field: name, reason })
            }
        };
        field("lambda1", self.lambda1 >= 0.0, "must be non-negative")?;
        field("lambda2", self.lambda2 >= 0.0, "must be non-negative")?;
        field("lambda3", self.lambda3 >= 0.0, "must be non-negative")?;
        field("learning_rate", self.learning_rate > 0.0, "must be positive")?;
        field("epochs", self.epochs >= 1, "must be at least 1")?;
        field("batch_size", self.batch_size >= 1, "must be at least 1")?;
        field("tau_cl", self.tau_cl > 0.0, "must be positive")?;
        field("tau_gs", self.tau_gs > 0.0, "must be positive")?;
        Ok(())
    }

    fn cl_active(&self) -> bool {
        self.cl_strategy != ClStrategy::Off && self.lambda2 > 0.0
    }

    fn ar_active(&self) -> bool {
        self.ar_enabled && self.lambda3 > 0.0
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: &'static str },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Contrastive(#[from] ContrastiveError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io { path: path.display().to_string(), source }
}

/// L = λ₁·L_qg + λ₂·L_cl + λ₃·L_ar.
pub fn total_loss(l_qg: f64, l_cl: f64, l_ar: f64, cfg: &TrainConfig) -> f64 {
    cfg.lambda1 * l_qg + cfg.lambda2 * l_cl + cfg.lambda3 * l_ar
}

// ── Adam ─────────────────────────────────────────────────────────────

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First/second moment estimates, one pair of buffers per parameter.
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self) -> u64 {
        self.t
    }
}

/// Textbook Adam update with bias correction over aligned parameter and
/// gradient slices.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[Vec<f64>],
    state: &mut AdamState,
    lr: f64,
) {
    assert_eq!(params.len(), grads.len(), "adam_step: param/grad count mismatch");
    assert_eq!(params.len(), state.m.len(), "adam_step: state not initialized for these params");
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - ADAM_BETA1.powi(t);
    let bc2 = 1.0 - ADAM_BETA2.powi(t);
    for ((p, g), (m, v)) in
        params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        assert_eq!(p.len(), g.len(), "adam_step: shape mismatch");
        for i in 0..p.len() {
            m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
            v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
}

// ── Batch loss construction ──────────────────────────────────────────

/// Pre-encoded sequences for one training example.
pub struct ExampleEncoding {
    pub src: TokenSequence,
    pub tgt: TokenSequence,
    pub src_cls: TokenSequence,
    pub tgt_cls: TokenSequence,
}

/// Encode a pair for the given direction, trimming trailing padding (the
/// model masks padding anyway; trimming just avoids wasted compute).
pub fn encode_example(
    pair: &QAPair,
    vocab: &Vocab,
    cfg: &ModelConfig,
    direction: Direction,
) -> ExampleEncoding {
    let (src_text, tgt_text) = match direction {
        Direction::Qg => (&pair.answer, &pair.question),
        Direction::Qa => (&pair.question, &pair.answer),
    };
    let trim = |s: TokenSequence| TokenSequence { ids: s.trimmed().to_vec() };
    ExampleEncoding {
        src: trim(encode(src_text, vocab, cfg.max_src_len, EncodeMode::Answer)),
        tgt: trim(encode(tgt_text, vocab, cfg.max_tgt_len, EncodeMode::Question)),
        src_cls: trim(encode(src_text, vocab, cfg.max_src_len, EncodeMode::ClsPrefixed)),
        tgt_cls: trim(encode(tgt_text, vocab, cfg.max_src_len, EncodeMode::ClsPrefixed)),
    }
}

/// Where the straight-through path gets its Gumbel noise.
pub enum GumbelNoise<'a> {
    /// Draw from the run's gumbel stream (training).
    Stream(&'a mut ChaCha8Rng),
    /// Use pre-drawn per-example noise (gradient checking).
    Fixed(&'a [Tensor]),
}

/// Scalar tape nodes for one batch's losses.
pub struct JointLosses {
    pub l_qg: Tensor,
    pub l_cl: Option<Tensor>,
    pub l_ar: Option<Tensor>,
    pub total: Tensor,
}

/// Forward the full joint objective for one batch on an open tape.
///
/// Branch order follows the training algorithm: generation NLL first, then
/// the contrastive loss, then answer reconstruction. Inactive branches are
/// skipped entirely and consume no randomness.
pub fn build_joint_loss(
    tape: &mut Tape,
    generator: &TapedModel,
    qa_model: Option<&TapedModel>,
    batch: &[&ExampleEncoding],
    cfg: &TrainConfig,
    mut gumbel: GumbelNoise,
    ctx: &mut ForwardCtx,
) -> Result<JointLosses, TrainError> {
    assert!(!batch.is_empty(), "empty batch");
    let vocab_size = generator.config().vocab_size;

    // Generation NLL, kept per example for the reconstruction branch.
    let mut qg_losses = Vec::with_capacity(batch.len());
    let mut decoder_logits = Vec::with_capacity(batch.len());
    for ex in batch {
        let enc = generator.encode(tape, &ex.src, ctx)?;
        let (prefix, targets, valid) = teacher_forcing_views(&ex.tgt);
        let logits = generator.decode_logits(tape, &enc, &prefix, ctx)?;
        qg_losses.push(nll_loss(tape, &logits, &targets, &valid)?);
        decoder_logits.push(logits);
    }
    let refs: Vec<&Tensor> = qg_losses.iter().collect();
    let stacked = tape.concat(&refs, 0);
    let l_qg = tape.mean(&stacked);

    let l_cl = if cfg.cl_active() {
        let pairs: Vec<(TokenSequence, TokenSequence)> =
            batch.iter().map(|ex| (ex.src_cls.clone(), ex.tgt_cls.clone())).collect();
        let emb_batch = make_positives(
            tape,
            generator,
            &pairs,
            cfg.cl_strategy,
            cfg.tau_cl,
            generator.config().dropout_rate,
            ctx,
        )?;
        Some(nt_xent_loss(tape, &emb_batch)?)
    } else {
        None
    };

    let l_ar = if cfg.ar_active() {
        let qa = qa_model.expect("reconstruction requires a qa model");
        let mut ar_losses = Vec::with_capacity(batch.len());
        for (ex, logits) in batch.iter().zip(&decoder_logits) {
            // One relaxed row per ground-truth question token.
            let question_len = ex.tgt.trimmed().len() - 2;
            if question_len == 0 {
                return Err(TrainError::Data(
                    "reconstruction needs a non-empty question for every pair".into(),
                ));
            }
            let noise = match &mut gumbel {
                GumbelNoise::Stream(rng) => sample_gumbel(question_len, vocab_size, rng),
                GumbelNoise::Fixed(list) => list[ar_losses.len()].clone(),
            };
            let q_hat = relax_question(
                tape,
                logits,
                question_len,
                GumbelConfig { tau: cfg.tau_gs },
                &noise,
            );
            // The frozen scorer runs without dropout.
            let loss = reconstruction_loss(
                tape,
                &q_hat,
                &ex.src,
                qa,
                vocab_size,
                &mut ForwardCtx::eval(),
            )?;
            ar_losses.push(loss);
        }
        let refs: Vec<&Tensor> = ar_losses.iter().collect();
        let stacked = tape.concat(&refs, 0);
        Some(tape.mean(&stacked))
    } else {
        None
    };

    let mut total = tape.scale(&l_qg, cfg.lambda1);
    if let Some(cl) = &l_cl {
        let weighted = tape.scale(cl, cfg.lambda2);
        total = tape.add(&total, &weighted);
    }
    if let Some(ar) = &l_ar {
        let weighted = tape.scale(ar, cfg.lambda3);
        total = tape.add(&total, &weighted);
    }
    Ok(JointLosses { l_qg, l_cl, l_ar, total })
}

// ── Training loops ───────────────────────────────────────────────────

/// One epoch's mean losses and validation score.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub l_qg: f64,
    pub l_cl: f64,
    pub l_ar: f64,
    pub total: f64,
    pub val_rouge_l: f64,
}

/// Best checkpoint plus the per-epoch metric trail.
#[derive(Debug)]
pub struct TrainOutcome {
    pub best: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
}

/// Train a question generator (answers → questions) with the joint loss.
///
/// `qa_model` must be supplied when the reconstruction branch is enabled;
/// its parameters stay frozen. When `run_dir` is set, per-epoch checkpoints,
/// the best checkpoint, and `metrics.jsonl` are written there.
pub fn train_qg(
    splits: &DatasetSplit,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    qa_model: Option<&Checkpoint>,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    run_training(Direction::Qg, splits, model_cfg, cfg, qa_model, run_dir)
}

/// Train a question-answering model (questions → answers) with plain NLL.
pub fn train_qa(
    splits: &DatasetSplit,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    let mut cfg = cfg.clone();
    cfg.cl_strategy = ClStrategy::Off;
    cfg.ar_enabled = false;
    cfg.lambda2 = 0.0;
    cfg.lambda3 = 0.0;
    run_training(Direction::Qa, splits, model_cfg, &cfg, None, run_dir)
}

fn run_training(
    direction: Direction,
    splits: &DatasetSplit,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    qa_model: Option<&Checkpoint>,
    run_dir: Option<&Path>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if splits.train.is_empty() {
        return Err(TrainError::Data("training split is empty".into()));
    }
    if cfg.ar_enabled && direction == Direction::Qg && qa_model.is_none() {
        return Err(TrainError::InvalidConfig {
            field: "ar_enabled",
            reason: "reconstruction requires a pre-trained qa checkpoint",
        });
    }
    if cfg.cl_active() && cfg.cl_strategy == ClStrategy::ClS && model_cfg.dropout_rate == 0.0 {
        return Err(TrainError::InvalidConfig {
            field: "cl_strategy",
            reason: "dropout-view positives require dropout_rate > 0",
        });
    }

    // The generator adopts the reconstruction model's vocabulary so relaxed
    // questions index the same embedding rows; otherwise build from the
    // training split.
    let vocab = match qa_model {
        Some(ckpt) => ckpt.vocab.clone(),
        None => {
            let corpus: Vec<String> = splits
                .train
                .iter()
                .flat_map(|p| [p.question.clone(), p.answer.clone()])
                .collect();
            crate::data::build_vocab(&corpus, model_cfg.vocab_size)
                .map_err(|e| TrainError::Data(e.to_string()))?
        }
    };
    let mut effective_cfg = model_cfg.clone();
    effective_cfg.vocab_size = vocab.size();
    if let Some(ckpt) = qa_model {
        if effective_cfg.max_tgt_len > ckpt.model.cfg.max_src_len {
            return Err(TrainError::InvalidConfig {
                field: "max_tgt_len",
                reason: "generated questions would not fit the qa model's source length",
            });
        }
    }

    let mut init_rng = stream_rng(cfg.seed, Stream::Init);
    let mut shuffle_rng = stream_rng(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = stream_rng(cfg.seed, Stream::Dropout);
    let mut gumbel_rng = stream_rng(cfg.seed, Stream::Gumbel);

    let mut model = Seq2SeqModel::init(effective_cfg.clone(), &mut init_rng)?;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.values.len()).collect();
    let mut adam = AdamState::new(&sizes);

    let train_encoded: Vec<ExampleEncoding> = splits
        .train
        .iter()
        .map(|p| encode_example(p, &vocab, &effective_cfg, direction))
        .collect();

    if let Some(dir) = run_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        // A rerun into the same directory starts a fresh metrics trail.
        let metrics_path = dir.join("metrics.jsonl");
        if metrics_path.exists() {
            fs::remove_file(&metrics_path).map_err(io_err(&metrics_path))?;
        }
    }

    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut best: Option<Checkpoint> = None;
    let mut order: Vec<usize> = (0..train_encoded.len()).collect();

    for epoch in 1..=cfg.epochs {
        fisher_yates(&mut order, &mut shuffle_rng);
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if cfg.cl_active() && chunk.len() < 2 {
                // A single pair has no in-batch negatives; skip the stub.
                continue;
            }
            let batch: Vec<&ExampleEncoding> =
                chunk.iter().map(|&i| &train_encoded[i]).collect();

            let mut tape = Tape::new();
            let taped = TapedModel::register(&mut tape, &model, true);
            let qa_taped =
                qa_model.map(|ckpt| TapedModel::register(&mut tape, &ckpt.model, false));
            let mut ctx = ForwardCtx::train(&mut dropout_rng);
            let losses = build_joint_loss(
                &mut tape,
                &taped,
                qa_taped.as_ref(),
                &batch,
                cfg,
                GumbelNoise::Stream(&mut gumbel_rng),
                &mut ctx,
            )?;
            tape.backward(&losses.total)?;

            let grads: Vec<Vec<f64>> = taped
                .param_tensors()
                .iter()
                .map(|t| {
                    tape.grad(t).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; t.numel()])
                })
                .collect();
            let mut params = model.params_mut();
            let mut slices: Vec<&mut [f64]> =
                params.iter_mut().map(|p| p.values.as_mut_slice()).collect();
            adam_step(&mut slices, &grads, &mut adam, cfg.learning_rate);

            sums.0 += losses.l_qg.item();
            sums.1 += losses.l_cl.as_ref().map_or(0.0, Tensor::item);
            sums.2 += losses.l_ar.as_ref().map_or(0.0, Tensor::item);
            sums.3 += losses.total.item();
            batches += 1;
        }
        if batches == 0 {
            return Err(TrainError::Data(
                "no usable batches (training set too small for the batch rules)".into(),
            ));
        }

        let val_rouge_l = evaluate_rouge_l(&model, &vocab, &splits.val, direction)?;
        let n = batches as f64;
        let em = EpochMetrics {
            epoch,
            l_qg: sums.0 / n,
            l_cl: sums.1 / n,
            l_ar: sums.2 / n,
            total: sums.3 / n,
            val_rouge_l,
        };
        metrics.push(em.clone());

        let ckpt = Checkpoint {
            model: model.clone(),
            vocab: vocab.clone(),
            train_config: cfg.clone(),
            direction,
            epoch,
            val_rouge_l,
        };
        if let Some(dir) = run_dir {
            let path = dir.join(format!("epoch-{epoch}.ckpt"));
            ckpt.save(&path).map_err(io_err(&path))?;
            append_metrics_line(&dir.join("metrics.jsonl"), &em)?;
        }
        let improved = best.as_ref().is_none_or(|b| val_rouge_l > b.val_rouge_l);
        if improved {
            best = Some(ckpt);
        }
    }

    let best = best.expect("at least one epoch ran");
    if let Some(dir) = run_dir {
        let path = dir.join("best.ckpt");
        best.save(&path).map_err(io_err(&path))?;
    }
    Ok(TrainOutcome { best, metrics })
}

fn append_metrics_line(path: &Path, em: &EpochMetrics) -> Result<(), TrainError> {
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let line = serde_json::to_string(em).expect("serializable metrics");
    writeln!(file, "{line}").map_err(io_err(path))?;
    Ok(())
}

/// Greedy-decode every pair and return the corpus ROUGE-L F1 of generations
/// against references.
pub fn evaluate_rouge_l(
    model: &Seq2SeqModel,
    vocab: &Vocab,
    pairs: &[QAPair],
    direction: Direction,
) -> Result<f64, TrainError> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut scored = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let (src_text, ref_text) = match direction {
            Direction::Qg => (&pair.answer, &pair.question),
            Direction::Qa => (&pair.question, &pair.answer),
        };
        let generated = generate_text(model, vocab, src_text)?;
        scored.push((generated, ref_text.clone()));
    }
    Ok(corpus_rouge_l_f1(&scored))
}

/// Encode a source text and greedy-decode the model's output text.
pub fn generate_text(
    model: &Seq2SeqModel,
    vocab: &Vocab,
    src_text: &str,
) -> Result<String, TrainError> {
    let src = encode(src_text, vocab, model.cfg.max_src_len, EncodeMode::Answer);
    let src = TokenSequence { ids: src.trimmed().to_vec() };
    let enc = model.encode_eval(&src)?;
    let out = model.greedy_generate(&enc, model.cfg.max_tgt_len)?;
    Ok(decode(&out.ids, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn total_loss_weighted_sum() {
        let cfg = TrainConfig::default();
        assert!((total_loss(1.0, 2.0, 3.0, &cfg) - 1.5).abs() < 1e-15);
        assert_eq!(total_loss(0.0, 0.0, 0.0, &cfg), 0.0);

        let baseline = TrainConfig { lambda2: 0.0, lambda3: 0.0, ..TrainConfig::default() };
        assert_eq!(total_loss(0.7, 9.0, 9.0, &baseline), 0.7);
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut state = AdamState::new(&[3]);
        let grads = vec![vec![0.0; 3]];
        adam_step(&mut [p.as_mut_slice()], &grads, &mut state, 0.1);
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn adam_first_step_is_sign_scaled() {
        // For a scalar with gradient g: m̂ = g, v̂ = g², so the first update
        // is lr·g/(|g| + ε) ≈ lr·sign(g).
        let mut p = vec![0.5];
        let mut state = AdamState::new(&[1]);
        adam_step(&mut [p.as_mut_slice()], &[vec![2.0]], &mut state, 0.01);
        assert!((p[0] - (0.5 - 0.01)).abs() < 1e-8, "got {}", p[0]);

        let mut q = vec![0.5];
        let mut state = AdamState::new(&[1]);
        adam_step(&mut [q.as_mut_slice()], &[vec![-0.3]], &mut state, 0.01);
        assert!((q[0] - (0.5 + 0.01)).abs() < 1e-7, "got {}", q[0]);
    }

    #[test]
    fn adam_trajectories_are_deterministic() {
        let run = || {
            let mut p = vec![0.2, -0.4];
            let mut state = AdamState::new(&[2]);
            for step in 0..20 {
                let g = vec![(step as f64 * 0.1).sin(), (step as f64 * 0.2).cos()];
                adam_step(&mut [p.as_mut_slice()], &[g], &mut state, 0.05);
            }
            p
        };
        let a = run();
        let b = run();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn config_validation_names_fields() {
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        match cfg.validate() {
            Err(TrainError::InvalidConfig { field, .. }) => assert_eq!(field, "learning_rate"),
            other => panic!("expected invalid config, got {other:?}"),
        }
        let cfg = TrainConfig { lambda2: -0.1, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn gumbel_noise_stream_only_consumed_when_ar_active() {
        use rand::Rng;
        let mut a = stream_rng(3, Stream::Gumbel);
        let mut b = stream_rng(3, Stream::Gumbel);
        // Drawing zero matrices consumes nothing.
        let x: f64 = a.gen();
        let y: f64 = b.gen();
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
