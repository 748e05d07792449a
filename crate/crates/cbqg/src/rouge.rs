//! ROUGE-1/2/L/Lsum F1 scores.
//!
//! Tokenization is lowercase with splits on non-alphanumeric runs (digits
//! kept), no stemming, no stopword removal. These choices are frozen by the
//! golden test fixtures, so scores are stable across runs and relative
//! comparisons stay valid.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Precision/recall/F1 triple, each in [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(hits: f64, candidate_total: f64, reference_total: f64) -> Self {
        if candidate_total == 0.0 || reference_total == 0.0 {
            return RougeScore::default();
        }
        let precision = hits / candidate_total;
        let recall = hits / reference_total;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore { precision, recall, f1 }
    }
}

/// Metric tokenizer: lowercase, alphanumeric runs only.
pub fn metric_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap (multiset intersection) F1 for n ∈ {1, 2}.
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> RougeScore {
    assert!(n == 1 || n == 2, "rouge_n supports n = 1 or 2, got {n}");
    let cand = metric_tokens(candidate);
    let reference = metric_tokens(reference);
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&reference, n);
    let hits: usize = cand_counts
        .iter()
        .map(|(gram, c)| (*c).min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let cand_total = cand.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    RougeScore::from_counts(hits as f64, cand_total as f64, ref_total as f64)
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            row[j + 1] = if ai == bj { prev[j] + 1 } else { prev[j + 1].max(row[j]) };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// Indices in `a` that participate in one longest common subsequence of `a`
/// and `b` (the standard DP backtrace).
fn lcs_indices(a: &[String], b: &[String]) -> Vec<usize> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![0usize; (n + 1) * (m + 1)];
    for i in 1..=n {
        for j in 1..=m {
            table[i * (m + 1) + j] = if a[i - 1] == b[j - 1] {
                table[(i - 1) * (m + 1) + j - 1] + 1
            } else {
                table[(i - 1) * (m + 1) + j].max(table[i * (m + 1) + j - 1])
            };
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        if a[i - 1] == b[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if table[(i - 1) * (m + 1) + j] >= table[i * (m + 1) + j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

/// Sentence-level longest-common-subsequence F1.
pub fn rouge_l(candidate: &str, reference: &str) -> RougeScore {
    let cand = metric_tokens(candidate);
    let reference = metric_tokens(reference);
    let lcs = lcs_length(&cand, &reference);
    RougeScore::from_counts(lcs as f64, cand.len() as f64, reference.len() as f64)
}

/// Summary-level LCS: both texts are split on newlines, and for each
/// reference sentence the union of its LCS matches against every candidate
/// sentence is taken (each reference token counted at most once, hits
/// clipped by candidate token counts). Precision and recall are over total
/// token counts, so single-line inputs reduce to [`rouge_l`].
pub fn rouge_lsum(candidate: &str, reference: &str) -> RougeScore {
    let cand_sents: Vec<Vec<String>> =
        candidate.split('\n').map(metric_tokens).filter(|s| !s.is_empty()).collect();
    let ref_sents: Vec<Vec<String>> =
        reference.split('\n').map(metric_tokens).filter(|s| !s.is_empty()).collect();

    let cand_total: usize = cand_sents.iter().map(Vec::len).sum();
    let ref_total: usize = ref_sents.iter().map(Vec::len).sum();
    if cand_total == 0 || ref_total == 0 {
        return RougeScore::default();
    }

    let mut cand_counts: HashMap<&str, usize> = HashMap::new();
    for sent in &cand_sents {
        for tok in sent {
            *cand_counts.entry(tok).or_insert(0) += 1;
        }
    }

    let mut hits = 0usize;
    for ref_sent in &ref_sents {
        let mut in_union = vec![false; ref_sent.len()];
        for cand_sent in &cand_sents {
            for idx in lcs_indices(ref_sent, cand_sent) {
                in_union[idx] = true;
            }
        }
        for (idx, marked) in in_union.iter().enumerate() {
            if *marked {
                if let Some(c) = cand_counts.get_mut(ref_sent[idx].as_str()) {
                    if *c > 0 {
                        *c -= 1;
                        hits += 1;
                    }
                }
            }
        }
    }
    RougeScore::from_counts(hits as f64, cand_total as f64, ref_total as f64)
}

/// Corpus scores for the full metric suite.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RougeSuite {
    pub rouge1: RougeScore,
    pub rouge2: RougeScore,
    pub rouge_l: RougeScore,
    pub rouge_lsum: RougeScore,
}

/// Score one candidate/reference pair on all four metrics.
pub fn score_pair(candidate: &str, reference: &str) -> RougeSuite {
    RougeSuite {
        rouge1: rouge_n(candidate, reference, 1),
        rouge2: rouge_n(candidate, reference, 2),
        rouge_l: rouge_l(candidate, reference),
        rouge_lsum: rouge_lsum(candidate, reference),
    }
}

/// Unweighted mean of per-example scores over a corpus.
pub fn corpus_rouge(pairs: &[(String, String)]) -> RougeSuite {
    assert!(!pairs.is_empty(), "corpus_rouge needs at least one pair");
    let mut acc = RougeSuite::default();
    for (cand, reference) in pairs {
        let s = score_pair(cand, reference);
        for (total, part) in [
            (&mut acc.rouge1, s.rouge1),
            (&mut acc.rouge2, s.rouge2),
            (&mut acc.rouge_l, s.rouge_l),
            (&mut acc.rouge_lsum, s.rouge_lsum),
        ] {
            total.precision += part.precision;
            total.recall += part.recall;
            total.f1 += part.f1;
        }
    }
    let n = pairs.len() as f64;
    for m in [&mut acc.rouge1, &mut acc.rouge2, &mut acc.rouge_l, &mut acc.rouge_lsum] {
        m.precision /= n;
        m.recall /= n;
        m.f1 /= n;
    }
    acc
}

/// Mean ROUGE-L F1 over (candidate, reference) pairs; the model-selection
/// score.
pub fn corpus_rouge_l_f1(pairs: &[(String, String)]) -> f64 {
    corpus_rouge(pairs).rouge_l.f1
}
