//! Shared fixtures for integration tests: a synthetic invertible task where
//! the question is a deterministic function of the answer (copy with a
//! question-word frame), plus config helpers.

#![allow(dead_code)]

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cbqg::data::QAPair;
use cbqg::model::ModelConfig;
use cbqg::trainer::TrainConfig;

/// Content words of the toy vocabulary (20 words; with the 5 specials plus
/// "what" and "?" the built vocabulary stays within 30 entries).
pub const TOY_WORDS: [&str; 20] = [
    "ka", "ko", "ki", "ta", "to", "ti", "ra", "ro", "ri", "ma", "mo", "mi", "sa", "so", "si",
    "na", "no", "ni", "la", "lo",
];

/// Deterministic invertible mapping: the question restates the answer with
/// a question-word frame.
pub fn question_for(answer: &str) -> String {
    format!("what {answer} ?")
}

/// Random toy pairs with answers of `min_len..=max_len` whitespace tokens.
pub fn toy_pairs(n: usize, min_len: usize, max_len: usize, seed: u64) -> Vec<QAPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.gen_range(min_len..=max_len);
        let words: Vec<&str> =
            (0..len).map(|_| TOY_WORDS[rng.gen_range(0..TOY_WORDS.len())]).collect();
        let answer = words.join(" ");
        out.push(QAPair { question: question_for(&answer), answer });
    }
    out
}

/// Model sizes for the toy task: big enough to learn the copy mapping,
/// small enough to train in seconds.
pub fn toy_model_config() -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        d_model: 32,
        num_heads: 4,
        ffn_dim: 64,
        vocab_size: 30,
        max_src_len: 16,
        max_tgt_len: 16,
        dropout_rate: 0.1,
    }
}

/// Optimization settings for quick toy runs; the learning rate is raised
/// from the full-scale default because the model trains from scratch.
pub fn toy_train_config(seed: u64, epochs: usize) -> TrainConfig {
    TrainConfig {
        lambda1: 1.0,
        lambda2: 0.1,
        lambda3: 0.1,
        learning_rate: 1e-3,
        epochs,
        batch_size: 16,
        tau_cl: 0.3,
        tau_gs: 1.0,
        cl_strategy: cbqg::contrastive::ClStrategy::ClT,
        ar_enabled: false,
        seed,
    }
}

/// Serialize a full run config file (model + train) to JSON.
pub fn write_config_file(path: &Path, model: &ModelConfig, train: &TrainConfig) {
    let json = serde_json::json!({ "model": model, "train": train });
    std::fs::write(path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
}
