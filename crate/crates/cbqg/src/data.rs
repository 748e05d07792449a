//! Vocabulary construction, text ↔ token-id encoding, dataset filtering
//! rules, and deterministic 80/10/10 splitting.
//!
//! The tokenizer is a plain word tokenizer: lowercase, split on whitespace,
//! and split punctuation off as separate single-character tokens. Dataset
//! files are UTF-8 JSON lines.

use std::collections::HashMap;
use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::fisher_yates;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const CLS: usize = 3;
pub const UNK: usize = 4;

const SPECIAL_TOKENS: [&str; 5] = ["[PAD]", "[BOS]", "[EOS]", "[CLS]", "[UNK]"];

/// Question words accepted by the filtering rules, in source order.
pub const QUESTION_WORDS: [&str; 29] = [
    "how", "what", "can", "is", "do", "why", "are", "does", "where", "when", "should", "will",
    "did", "which", "who", "would", "if", "about", "for", "as", "could", "in", "after", "at",
    "while", "to", "am", "has", "any",
];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("vocabulary max_size must be at least 6 (got {0})")]
    VocabTooSmall(usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("need at least 10 pairs to split (got {0})")]
    TooFewPairs(usize),
    #[error("{path}:{line}: malformed JSON record: {source}")]
    MalformedLine { path: String, line: usize, source: serde_json::Error },
    #[error("failed to read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// One (question, answer) training record; the unit of every dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
}

/// A summary record for the synthetic QA pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub title: String,
    pub summary: String,
}

/// Lowercase + whitespace word tokenizer with punctuation split off as
/// separate single-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.to_lowercase().chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            current.push(ch);
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// The normalized text form a round-trip through the tokenizer preserves.
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

/// String ↔ token-id mapping with fixed special ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocab {
    /// Build from raw tokens with preassigned ids (specials must already
    /// occupy ids 0..5). Used by checkpoint loading.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        assert!(tokens.len() >= SPECIAL_TOKENS.len(), "vocab missing special tokens");
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(tokens[i], *s, "special token {i} must be {s}");
        }
        let token_to_id: HashMap<String, usize> = tokens.iter().cloned().zip(0..).collect();
        assert_eq!(token_to_id.len(), tokens.len(), "vocabulary contains duplicate tokens");
        Vocab { token_to_id, id_to_token: tokens }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// Build a vocabulary of the 5 specials plus up to `max_size - 5` most
/// frequent corpus tokens, frequency ties broken lexicographically.
pub fn build_vocab(corpus: &[String], max_size: usize) -> Result<Vocab, DataError> {
    if max_size < 6 {
        return Err(DataError::VocabTooSmall(max_size));
    }
    if corpus.is_empty() {
        return Err(DataError::EmptyCorpus);
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for text in corpus {
        for tok in tokenize(text) {
            *counts.entry(tok).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(ranked.into_iter().take(max_size - 5).map(|(t, _)| t));
    Ok(Vocab::from_tokens(tokens))
}

/// Framing applied by [`encode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodeMode {
    /// `[BOS] body [EOS]` — used for questions.
    Question,
    /// `[BOS] body [EOS]` — used for answers.
    Answer,
    /// `[CLS] [BOS] body [EOS]` — sentence-embedding input.
    ClsPrefixed,
}

/// A fixed-length id sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<usize>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn starts_with_cls(&self) -> bool {
        self.ids.first() == Some(&CLS)
    }

    /// Ids with trailing padding removed.
    pub fn trimmed(&self) -> &[usize] {
        let end = self.ids.iter().rposition(|&id| id != PAD).map_or(0, |p| p + 1);
        &self.ids[..end]
    }
}

/// Encode text as `[BOS] body [EOS]` (plus a leading `[CLS]` in
/// cls-prefixed mode), padded with `[PAD]` to exactly `max_len` ids. The
/// body is truncated so the framed length fits; unknown tokens map to
/// `[UNK]`.
pub fn encode(text: &str, vocab: &Vocab, max_len: usize, mode: EncodeMode) -> TokenSequence {
    let overhead = match mode {
        EncodeMode::ClsPrefixed => 3,
        _ => 2,
    };
    assert!(max_len >= overhead, "max_len {max_len} cannot hold sequence framing");
    let body_max = max_len - overhead;
    let mut ids = Vec::with_capacity(max_len);
    if mode == EncodeMode::ClsPrefixed {
        ids.push(CLS);
    }
    ids.push(BOS);
    for tok in tokenize(text).into_iter().take(body_max) {
        ids.push(vocab.id(&tok));
    }
    ids.push(EOS);
    ids.resize(max_len, PAD);
    TokenSequence { ids }
}

/// Decode ids back to normalized text, skipping specials other than `[UNK]`.
pub fn decode(ids: &[usize], vocab: &Vocab) -> String {
    let mut parts = Vec::new();
    for &id in ids {
        if id == PAD || id == BOS || id == EOS || id == CLS {
            continue;
        }
        parts.push(vocab.token(id));
    }
    parts.join(" ")
}

/// Filtering statistics for reporting.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct FilterStats {
    pub input: usize,
    pub kept: usize,
    pub dropped_question_word: usize,
    pub dropped_no_question_mark: usize,
    pub dropped_short_answer: usize,
    pub dropped_meaningless: usize,
    pub dropped_duplicate: usize,
}

enum DropReason {
    QuestionWord,
    NoQuestionMark,
    ShortAnswer,
    MeaninglessAnswer,
}

fn drop_reason(pair: &QAPair) -> Option<DropReason> {
    let q_tokens = tokenize(&pair.question);
    match q_tokens.first() {
        Some(first) if QUESTION_WORDS.contains(&first.as_str()) => {}
        _ => return Some(DropReason::QuestionWord),
    }
    if !pair.question.trim_end().ends_with('?') {
        return Some(DropReason::NoQuestionMark);
    }
    let answer_tokens = pair.answer.split_whitespace().count();
    if answer_tokens < 8 {
        return Some(DropReason::ShortAnswer);
    }
    let lower = pair.answer.to_lowercase();
    let url = lower.contains("http://") || lower.contains("https://");
    if lower.trim_start().starts_with("please refer to") || (url && answer_tokens < 12) {
        return Some(DropReason::MeaninglessAnswer);
    }
    None
}

/// Apply the dataset filtering rules: question starts with a question word,
/// ends with '?', answer has at least 8 whitespace tokens and is not a
/// boilerplate referral; exact (question, answer) duplicates keep their
/// first occurrence.
pub fn filter_pairs(pairs: &[QAPair]) -> (Vec<QAPair>, FilterStats) {
    let mut stats = FilterStats { input: pairs.len(), ..Default::default() };
    let mut seen: HashSet<QAPair> = HashSet::new();
    let mut kept = Vec::new();
    for pair in pairs {
        match drop_reason(pair) {
            Some(DropReason::QuestionWord) => stats.dropped_question_word += 1,
            Some(DropReason::NoQuestionMark) => stats.dropped_no_question_mark += 1,
            Some(DropReason::ShortAnswer) => stats.dropped_short_answer += 1,
            Some(DropReason::MeaninglessAnswer) => stats.dropped_meaningless += 1,
            None => {
                if seen.insert(pair.clone()) {
                    kept.push(pair.clone());
                } else {
                    stats.dropped_duplicate += 1;
                }
            }
        }
    }
    stats.kept = kept.len();
    (kept, stats)
}

/// Disjoint train/val/test partition of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<QAPair>,
    pub val: Vec<QAPair>,
    pub test: Vec<QAPair>,
}

/// Shuffle with the seeded generator, then cut so val and test each get
/// ⌊n/10⌋ pairs and train keeps the remainder.
pub fn split_dataset(pairs: &[QAPair], rng: &mut ChaCha8Rng) -> Result<DatasetSplit, DataError> {
    let n = pairs.len();
    if n < 10 {
        return Err(DataError::TooFewPairs(n));
    }
    let mut shuffled = pairs.to_vec();
    fisher_yates(&mut shuffled, rng);
    let tenth = n / 10;
    let train_len = n - 2 * tenth;
    let mut iter = shuffled.into_iter();
    let train: Vec<QAPair> = iter.by_ref().take(train_len).collect();
    let val: Vec<QAPair> = iter.by_ref().take(tenth).collect();
    let test: Vec<QAPair> = iter.collect();
    Ok(DatasetSplit { train, val, test })
}

// ── JSONL IO ──────────────────────────────────────────────────────────

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, DataError> {
    let text = fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.display().to_string(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| DataError::MalformedLine {
            path: path.display().to_string(),
            line: i + 1,
            source,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<QAPair>, DataError> {
    read_jsonl(path)
}

pub fn read_summaries(path: &Path) -> Result<Vec<SummaryRecord>, DataError> {
    read_jsonl(path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> std::io::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    fs::write(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn pair(q: &str, a: &str) -> QAPair {
        QAPair { question: q.to_string(), answer: a.to_string() }
    }

    const LONG_ANSWER: &str = "one two three four five six seven eight";

    #[test]
    fn tokenizer_splits_punctuation_and_lowercases() {
        assert_eq!(tokenize("How do I x?"), vec!["how", "do", "i", "x", "?"]);
        assert_eq!(tokenize("Dr. Smith's dog"), vec!["dr", ".", "smith", "'", "s", "dog"]);
        assert_eq!(tokenize("  a   b "), vec!["a", "b"]);
        assert_eq!(tokenize("v2 works"), vec!["v2", "works"]);
    }

    #[test]
    fn vocab_orders_by_frequency_then_lexicographic() {
        let corpus = vec!["a b".to_string(), "a".to_string()];
        let vocab = build_vocab(&corpus, 8).unwrap();
        assert_eq!(vocab.size(), 7);
        assert!(vocab.id("a") < vocab.id("b"));
        assert_eq!(vocab.id("a"), 5);

        // Equal frequencies break ties lexicographically.
        let corpus = vec!["y x".to_string()];
        let vocab = build_vocab(&corpus, 8).unwrap();
        assert!(vocab.id("x") < vocab.id("y"));
    }

    #[test]
    fn vocab_truncates_to_max_size() {
        let corpus = vec!["a b c".to_string()];
        let vocab = build_vocab(&corpus, 6).unwrap();
        assert_eq!(vocab.size(), 6);
        assert_eq!(vocab.id("a"), 5);
        assert_eq!(vocab.id("b"), UNK);
    }

    #[test]
    fn vocab_rejects_tiny_max_size() {
        assert!(matches!(build_vocab(&["a".to_string()], 5), Err(DataError::VocabTooSmall(5))));
    }

    #[test]
    fn encode_frames_and_pads() {
        let vocab = build_vocab(&["hello world".to_string()], 16).unwrap();
        let seq = encode("", &vocab, 6, EncodeMode::Question);
        assert_eq!(seq.ids, vec![BOS, EOS, PAD, PAD, PAD, PAD]);

        let seq = encode("hello unknownword", &vocab, 8, EncodeMode::Question);
        assert_eq!(seq.ids[0], BOS);
        assert_eq!(seq.ids[1], vocab.id("hello"));
        assert_eq!(seq.ids[2], UNK);
        assert_eq!(seq.ids[3], EOS);
        assert_eq!(seq.len(), 8);

        let seq = encode("hello", &vocab, 8, EncodeMode::ClsPrefixed);
        assert_eq!(seq.ids[0], CLS);
        assert_eq!(seq.ids[1], BOS);
        assert!(seq.starts_with_cls());
    }

    #[test]
    fn encode_truncates_but_keeps_eos() {
        let vocab = build_vocab(&["a b c d e f".to_string()], 16).unwrap();
        let seq = encode("a b c d e f", &vocab, 5, EncodeMode::Answer);
        assert_eq!(seq.len(), 5);
        assert_eq!(seq.ids[0], BOS);
        assert_eq!(*seq.ids.last().unwrap(), EOS);
        assert_eq!(seq.ids.iter().filter(|&&i| i == EOS).count(), 1);
        assert_eq!(seq.ids.iter().filter(|&&i| i == BOS).count(), 1);
    }

    #[test]
    fn decode_round_trips_in_vocab_text() {
        let vocab = build_vocab(&["how do i fix a door ?".to_string()], 32).unwrap();
        for text in ["How do I fix a door?", "fix a door", "door?"] {
            let seq = encode(text, &vocab, 32, EncodeMode::Question);
            assert_eq!(decode(&seq.ids, &vocab), normalize(text));
        }
    }

    #[test]
    fn filter_keeps_valid_question() {
        let (kept, stats) = filter_pairs(&[pair("How do I x?", LONG_ANSWER)]);
        assert_eq!(kept.len(), 1);
        assert_eq!(stats.kept, 1);
    }

    #[test]
    fn filter_drops_by_rule() {
        let (kept, stats) = filter_pairs(&[pair("Tell me about x.", LONG_ANSWER)]);
        assert!(kept.is_empty());
        assert_eq!(stats.dropped_question_word, 1);

        let (kept, stats) = filter_pairs(&[pair("How about x", LONG_ANSWER)]);
        assert!(kept.is_empty());
        assert_eq!(stats.dropped_no_question_mark, 1);

        // Seven-token answer violates the 8-token minimum.
        let (kept, stats) = filter_pairs(&[pair("Why?", "one two three four five six seven")]);
        assert!(kept.is_empty());
        assert_eq!(stats.dropped_short_answer, 1);

        // Referral answers and short URL answers are meaningless.
        let (kept, _) = filter_pairs(&[pair(
            "How do I x?",
            "Please refer to the article for all details here",
        )]);
        assert!(kept.is_empty());
        let (kept, _) = filter_pairs(&[pair(
            "How do I x?",
            "see https://example.com for details and more information",
        )]);
        assert!(kept.is_empty());
        // A long answer that merely mentions a URL stays.
        let (kept, _) = filter_pairs(&[pair(
            "How do I x?",
            "you can start at https://example.com but the main idea is to sand and repaint the door carefully",
        )]);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn filter_dedups_keeping_first() {
        let p = pair("How do I x?", LONG_ANSWER);
        let (kept, stats) = filter_pairs(&[p.clone(), p.clone(), p]);
        assert_eq!(kept.len(), 1);
        assert_eq!(stats.dropped_duplicate, 2);
    }

    #[test]
    fn filter_is_idempotent() {
        let pairs = vec![
            pair("How do I x?", LONG_ANSWER),
            pair("bad question", LONG_ANSWER),
            pair("Why is y?", LONG_ANSWER),
            pair("How do I x?", LONG_ANSWER),
        ];
        let (once, _) = filter_pairs(&pairs);
        let (twice, stats) = filter_pairs(&once);
        assert_eq!(once, twice);
        assert_eq!(stats.kept, once.len());
    }

    #[test]
    fn split_sizes_follow_tenth_rule() {
        let pairs: Vec<QAPair> = (0..10).map(|i| pair(&format!("How {i}?"), LONG_ANSWER)).collect();
        let split = split_dataset(&pairs, &mut stream_rng(1, Stream::Shuffle)).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (8, 1, 1));

        let pairs: Vec<QAPair> = (0..20202).map(|i| pair(&format!("How {i}?"), "a")).collect();
        let split = split_dataset(&pairs, &mut stream_rng(1, Stream::Shuffle)).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (16162, 2020, 2020));
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let pairs: Vec<QAPair> = (0..57).map(|i| pair(&format!("How {i}?"), "a")).collect();
        let s1 = split_dataset(&pairs, &mut stream_rng(9, Stream::Shuffle)).unwrap();
        let s2 = split_dataset(&pairs, &mut stream_rng(9, Stream::Shuffle)).unwrap();
        assert_eq!(s1.train, s2.train);
        assert_eq!(s1.val, s2.val);
        assert_eq!(s1.test, s2.test);

        let mut all: Vec<&QAPair> = s1.train.iter().chain(&s1.val).chain(&s1.test).collect();
        assert_eq!(all.len(), 57);
        all.sort_by(|a, b| a.question.cmp(&b.question));
        all.dedup();
        assert_eq!(all.len(), 57, "splits overlap");
    }

    #[test]
    fn split_rejects_tiny_input() {
        let pairs: Vec<QAPair> = (0..9).map(|i| pair(&format!("How {i}?"), "a")).collect();
        assert!(matches!(
            split_dataset(&pairs, &mut stream_rng(1, Stream::Shuffle)),
            Err(DataError::TooFewPairs(9))
        ));
    }

    #[test]
    fn jsonl_reports_malformed_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"question\":\"q?\",\"answer\":\"a\"}\nnot json\n").unwrap();
        match read_pairs(&path) {
            Err(DataError::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed line error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        let pairs = vec![pair("How?", "Because."), pair("What?", "That.")];
        write_jsonl(&path, &pairs).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), pairs);
    }
}
