//! Command implementations behind the binary: preprocess, train, generate,
//! synth, evaluate.
//!
//! Every command is deterministic given (inputs, config, seed). Training
//! writes a manifest with the resolved configuration and input digests
//! before touching the model, so a run can be reproduced exactly from its
//! run directory.
//!
//! Exit codes: 0 success, 2 usage/config error, 3 data error, 4 internal
//! invariant violation.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{Checkpoint, CheckpointError, Direction};
use crate::data::{self, DataError, FilterStats, QAPair};
use crate::model::ModelConfig;
use crate::rng::{stream_rng, Stream};
use crate::rouge::{corpus_rouge, score_pair, RougeSuite};
use crate::synth::{build_synthetic_corpus, SynthError, SynthReport};
use crate::trainer::{train_qa, train_qg, TrainConfig, TrainError, TrainOutcome};

/// Command failure carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable inputs, invalid or mismatched configuration.
    Usage(String),
    /// Inputs parsed but their content cannot be processed.
    Data(String),
    /// An internal invariant broke.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Usage(e.to_string()),
            DataError::MalformedLine { .. } | DataError::TooFewPairs(_) => {
                CliError::Data(e.to_string())
            }
            DataError::VocabTooSmall(_) | DataError::EmptyCorpus => CliError::Usage(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidConfig { .. } => CliError::Usage(e.to_string()),
            TrainError::Data(_) => CliError::Data(e.to_string()),
            TrainError::Io { .. } => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::EmptyInput => CliError::Data(e.to_string()),
            SynthError::Train(t) => t.into(),
        }
    }
}

fn io_usage(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Usage(format!("{}: {e}", path.display()))
}

// ── Config file ──────────────────────────────────────────────────────

/// On-disk run configuration. Every field is explicit; unknown or missing
/// fields are usage errors so no silent defaults creep into a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

pub fn read_config(path: &Path) -> Result<RunConfigFile, CliError> {
    let text = fs::read_to_string(path).map_err(io_usage(path))?;
    let cfg: RunConfigFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    cfg.model.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    cfg.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

// ── Manifest ─────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Everything needed to reproduce a training run, written before training
/// starts.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    tool_version: String,
    mode: String,
    seed: u64,
    config: RunConfigFile,
    inputs: Vec<InputDigest>,
}

fn sha256_hex(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io_usage(path))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

// ── preprocess ───────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct PreprocessReport {
    filter: FilterStats,
    train: usize,
    val: usize,
    test: usize,
}

/// Filter raw pairs, split 80/10/10, and write the three dataset files plus
/// a stats report.
pub fn cmd_preprocess(input: &Path, out_dir: &Path, seed: u64) -> Result<(), CliError> {
    let pairs = data::read_pairs(input)?;
    let (kept, stats) = data::filter_pairs(&pairs);
    if kept.is_empty() {
        return Err(CliError::Data("no data after filtering".into()));
    }
    let split = data::split_dataset(&kept, &mut stream_rng(seed, Stream::Shuffle))?;

    fs::create_dir_all(out_dir).map_err(io_usage(out_dir))?;
    let write = |name: &str, rows: &[QAPair]| -> Result<(), CliError> {
        let path = out_dir.join(name);
        data::write_jsonl(&path, rows).map_err(io_usage(&path))
    };
    write("train.jsonl", &split.train)?;
    write("val.jsonl", &split.val)?;
    write("test.jsonl", &split.test)?;

    let report = PreprocessReport {
        filter: stats,
        train: split.train.len(),
        val: split.val.len(),
        test: split.test.len(),
    };
    let report_path = out_dir.join("stats.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(io_usage(&report_path))?;
    println!(
        "kept {} of {} pairs; split {}/{}/{}",
        report.filter.kept, report.filter.input, report.train, report.val, report.test
    );
    Ok(())
}

// ── train ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    Qg,
    QgBaseline,
    Qa,
}

impl TrainMode {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "qg" => Ok(TrainMode::Qg),
            "qg-baseline" => Ok(TrainMode::QgBaseline),
            "qa" => Ok(TrainMode::Qa),
            other => Err(CliError::Usage(format!(
                "unknown train mode `{other}` (expected qg, qg-baseline, or qa)"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            TrainMode::Qg => "qg",
            TrainMode::QgBaseline => "qg-baseline",
            TrainMode::Qa => "qa",
        }
    }
}

/// Run a training mode over `data_dir/{train,val}.jsonl` into a run
/// directory, returning the best checkpoint.
pub fn cmd_train(
    mode: TrainMode,
    data_dir: &Path,
    config_path: &Path,
    out_dir: &Path,
    seed_override: Option<u64>,
    qa_checkpoint: Option<&Path>,
) -> Result<Checkpoint, CliError> {
    let mut cfg = read_config(config_path)?;
    if let Some(seed) = seed_override {
        cfg.train.seed = seed;
    }
    if mode == TrainMode::QgBaseline {
        // The baseline objective is the generation NLL alone.
        cfg.train.lambda2 = 0.0;
        cfg.train.lambda3 = 0.0;
    }

    let train_path = data_dir.join("train.jsonl");
    let val_path = data_dir.join("val.jsonl");
    let train_pairs = data::read_pairs(&train_path)?;
    let val_pairs = data::read_pairs(&val_path)?;
    let splits = data::DatasetSplit { train: train_pairs, val: val_pairs, test: Vec::new() };

    let qa = match (mode, qa_checkpoint) {
        (TrainMode::Qg, Some(path)) | (TrainMode::QgBaseline, Some(path)) => {
            Some(Checkpoint::load(path)?)
        }
        (TrainMode::Qg, None) if cfg.train.ar_enabled => {
            return Err(CliError::Usage(
                "mode qg with ar_enabled requires --qa-checkpoint".into(),
            ));
        }
        _ => None,
    };
    if let Some(ckpt) = &qa {
        if ckpt.direction != Direction::Qa {
            return Err(CliError::Usage(
                "--qa-checkpoint must point at a qa-direction checkpoint".into(),
            ));
        }
    }

    fs::create_dir_all(out_dir).map_err(io_usage(out_dir))?;
    let mut inputs = vec![
        InputDigest {
            path: train_path.display().to_string(),
            sha256: sha256_hex(&train_path)?,
        },
        InputDigest { path: val_path.display().to_string(), sha256: sha256_hex(&val_path)? },
    ];
    if let Some(path) = qa_checkpoint {
        inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        mode: mode.name().to_string(),
        seed: cfg.train.seed,
        config: cfg.clone(),
        inputs,
    };
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(io_usage(&manifest_path))?;

    let outcome: TrainOutcome = match mode {
        TrainMode::Qa => train_qa(&splits, &cfg.model, &cfg.train, Some(out_dir))?,
        TrainMode::Qg | TrainMode::QgBaseline => {
            train_qg(&splits, &cfg.model, &cfg.train, qa.as_ref(), Some(out_dir))?
        }
    };

    println!("epoch    l_qg     l_cl     l_ar     total    val_rouge_l");
    for m in &outcome.metrics {
        println!(
            "{:<8} {:<8.4} {:<8.4} {:<8.4} {:<8.4} {:.4}",
            m.epoch, m.l_qg, m.l_cl, m.l_ar, m.total, m.val_rouge_l
        );
    }
    println!(
        "best epoch {} with validation ROUGE-L {:.4}",
        outcome.best.epoch, outcome.best.val_rouge_l
    );
    Ok(outcome.best)
}

// ── generate ─────────────────────────────────────────────────────────

#[derive(Debug, Deserialize)]
struct GenerateInput {
    #[serde(default)]
    question: Option<String>,
    #[serde(default)]
    answer: Option<String>,
}

/// Generate the checkpoint's output side for each input record: questions
/// from answers for a qg checkpoint, answers from questions for qa.
pub fn cmd_generate(checkpoint: &Path, input: &Path, output: &Path) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let text = fs::read_to_string(input).map_err(io_usage(input))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: GenerateInput = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}:{}: malformed JSON record: {e}", input.display(), i + 1))
        })?;
        let source = match ckpt.direction {
            Direction::Qg => rec.answer,
            Direction::Qa => rec.question,
        };
        let field = match ckpt.direction {
            Direction::Qg => "answer",
            Direction::Qa => "question",
        };
        let source = source.ok_or_else(|| {
            CliError::Data(format!(
                "{}:{}: record is missing the `{field}` field",
                input.display(),
                i + 1
            ))
        })?;
        records.push(source);
    }

    let mut out_rows: Vec<QAPair> = Vec::with_capacity(records.len());
    for (i, source) in records.iter().enumerate() {
        if source.trim().is_empty() {
            eprintln!("warning: {}:{}: empty source text, record skipped", input.display(), i + 1);
            continue;
        }
        let generated = crate::trainer::generate_text(&ckpt.model, &ckpt.vocab, source)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let pair = match ckpt.direction {
            Direction::Qg => QAPair { question: generated, answer: source.clone() },
            Direction::Qa => QAPair { question: source.clone(), answer: generated },
        };
        out_rows.push(pair);
    }
    data::write_jsonl(output, &out_rows).map_err(io_usage(output))?;
    println!("generated {} records into {}", out_rows.len(), output.display());
    Ok(())
}

// ── synth ────────────────────────────────────────────────────────────

/// Expand a summaries file into synthetic QA pairs plus a sidecar report at
/// `<out>.report.json`.
pub fn cmd_synth(checkpoint: &Path, input: &Path, output: &Path) -> Result<SynthReport, CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    if ckpt.direction != Direction::Qg {
        return Err(CliError::Usage(
            "synth requires a qg-direction checkpoint (answers in, questions out)".into(),
        ));
    }
    let summaries = data::read_summaries(input)?;
    let (pairs, report) = build_synthetic_corpus(&summaries, &ckpt)?;
    data::write_jsonl(output, &pairs).map_err(io_usage(output))?;
    let report_path = report_path_for(output);
    fs::write(&report_path, serde_json::to_string_pretty(&report).unwrap())
        .map_err(io_usage(&report_path))?;
    println!(
        "emitted {} pairs from {} summaries ({} sentences, {} skipped)",
        report.pairs_emitted,
        report.input_summaries,
        report.sentences_extracted,
        report.sentences_skipped
    );
    Ok(report)
}

pub fn report_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_stem().unwrap_or_default().to_os_string();
    name.push(".report.json");
    output.with_file_name(name)
}

// ── evaluate ─────────────────────────────────────────────────────────

#[derive(Debug, Serialize)]
struct ExampleScores {
    index: usize,
    candidate: String,
    reference: String,
    rouge1_f1: f64,
    rouge2_f1: f64,
    rouge_l_f1: f64,
    rouge_lsum_f1: f64,
}

#[derive(Debug, Serialize)]
struct EvaluateReport {
    corpus: RougeSuite,
    examples: Vec<ExampleScores>,
}

fn read_text_field(path: &Path, field: &str) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(io_usage(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!("{}:{}: malformed JSON record: {e}", path.display(), i + 1))
        })?;
        let field_value = value.get(field).and_then(|v| v.as_str()).ok_or_else(|| {
            CliError::Data(format!(
                "{}:{}: record has no string field `{field}`",
                path.display(),
                i + 1
            ))
        })?;
        out.push(field_value.to_string());
    }
    Ok(out)
}

/// Score candidates against references with the full ROUGE suite and write
/// a JSON report with corpus means and per-example rows.
pub fn cmd_evaluate(
    candidates: &Path,
    references: &Path,
    candidate_field: &str,
    reference_field: &str,
    output: &Path,
) -> Result<RougeSuite, CliError> {
    let cands = read_text_field(candidates, candidate_field)?;
    let refs = read_text_field(references, reference_field)?;
    if cands.len() != refs.len() {
        return Err(CliError::Data(format!(
            "candidate/reference count mismatch: {} vs {}",
            cands.len(),
            refs.len()
        )));
    }
    if cands.is_empty() {
        return Err(CliError::Data("no examples to evaluate".into()));
    }
    let paired: Vec<(String, String)> = cands.into_iter().zip(refs).collect();
    let corpus = corpus_rouge(&paired);
    let examples = paired
        .iter()
        .enumerate()
        .map(|(index, (c, r))| {
            let s = score_pair(c, r);
            ExampleScores {
                index,
                candidate: c.clone(),
                reference: r.clone(),
                rouge1_f1: s.rouge1.f1,
                rouge2_f1: s.rouge2.f1,
                rouge_l_f1: s.rouge_l.f1,
                rouge_lsum_f1: s.rouge_lsum.f1,
            }
        })
        .collect();
    let report = EvaluateReport { corpus, examples };
    fs::write(output, serde_json::to_string_pretty(&report).unwrap()).map_err(io_usage(output))?;
    println!(
        "rouge1 {:.4}  rouge2 {:.4}  rougeL {:.4}  rougeLsum {:.4}  ({} examples)",
        corpus.rouge1.f1,
        corpus.rouge2.f1,
        corpus.rouge_l.f1,
        corpus.rouge_lsum.f1,
        report.examples.len()
    );
    Ok(corpus)
}
