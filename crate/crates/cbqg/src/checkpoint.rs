//! Model persistence.
//!
//! A checkpoint file is a small binary container: magic, format version, a
//! JSON header (configs, vocabulary, epoch, validation score), then the
//! parameter buffers as named flat little-endian f64 arrays in the model's
//! fixed traversal order. Loading verifies every name, shape, and byte
//! count and rejects truncated or oversized files, so a save → load round
//! trip reproduces the model bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Vocab;
use crate::model::{ModelConfig, Seq2SeqModel};
use crate::trainer::TrainConfig;

const MAGIC: &[u8; 8] = b"CBQGCKPT";
const FORMAT_VERSION: u32 = 1;

/// Which way the model maps text: answers → questions or questions →
/// answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Qg,
    Qa,
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt checkpoint header: {0}")]
    BadHeader(String),
    #[error("checkpoint does not match its config: {0}")]
    Mismatch(String),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has trailing bytes")]
    TrailingBytes,
}

/// A trained model with everything needed to run it standalone.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: Seq2SeqModel,
    pub vocab: Vocab,
    pub train_config: TrainConfig,
    pub direction: Direction,
    pub epoch: usize,
    pub val_rouge_l: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model_config: ModelConfig,
    train_config: TrainConfig,
    direction: Direction,
    epoch: usize,
    val_rouge_l: f64,
    vocab: Vec<String>,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let header = Header {
            model_config: self.model.cfg.clone(),
            train_config: self.train_config.clone(),
            direction: self.direction,
            epoch: self.epoch,
            val_rouge_l: self.val_rouge_l,
            vocab: self.vocab.tokens().to_vec(),
        };
        let header_bytes = serde_json::to_vec(&header).expect("serializable header");

        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_bytes);
        for param in self.model.params() {
            let name = param.name.as_bytes();
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(param.values.len() as u64).to_le_bytes());
            for v in &param.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(path, out)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let bytes = fs::read(path)?;
        let mut cursor = Reader { bytes: &bytes, pos: 0 };

        if cursor.take(8)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let header_len = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(cursor.take(header_len)?)
            .map_err(|e| CheckpointError::BadHeader(e.to_string()))?;

        let vocab = Vocab::from_tokens(header.vocab);
        if vocab.size() != header.model_config.vocab_size {
            return Err(CheckpointError::Mismatch(format!(
                "vocab has {} tokens but config says {}",
                vocab.size(),
                header.model_config.vocab_size
            )));
        }
        let mut model = Seq2SeqModel::zeroed(header.model_config)
            .map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
        for param in model.params_mut() {
            let name_len = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(cursor.take(name_len)?)
                .map_err(|_| CheckpointError::Mismatch("non-utf8 parameter name".into()))?;
            if name != param.name {
                return Err(CheckpointError::Mismatch(format!(
                    "expected parameter `{}`, found `{name}`",
                    param.name
                )));
            }
            let count = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap()) as usize;
            if count != param.values.len() {
                return Err(CheckpointError::Mismatch(format!(
                    "parameter `{name}` has {count} values, config implies {}",
                    param.values.len()
                )));
            }
            let raw = cursor.take(count * 8)?;
            for (i, chunk) in raw.chunks_exact(8).enumerate() {
                param.values[i] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        if cursor.pos != bytes.len() {
            return Err(CheckpointError::TrailingBytes);
        }
        Ok(Checkpoint {
            model,
            vocab,
            train_config: header.train_config,
            direction: header.direction,
            epoch: header.epoch,
            val_rouge_l: header.val_rouge_l,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }
}
