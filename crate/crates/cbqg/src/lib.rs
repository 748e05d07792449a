//! Closed-book question generation.
//!
//! A desk-scale implementation of a question generator that works without any
//! supporting passage: a from-scratch transformer seq2seq trained jointly with
//! a generation NLL loss, an in-batch contrastive loss over [CLS] sentence
//! embeddings, and an answer-reconstruction loss coupled through a
//! straight-through Gumbel-Softmax into a frozen question-answering model.
//! Ships with the ROUGE evaluation suite, the dataset filtering/splitting
//! rules, and the synthetic QA-pair pipeline used to pre-train an
//! unsupervised QA model.

pub mod checkpoint;
pub mod cli;
pub mod contrastive;
pub mod data;
pub mod model;
pub mod reconstruction;
pub mod rng;
pub mod rouge;
pub mod synth;
pub mod tensor;
pub mod trainer;
