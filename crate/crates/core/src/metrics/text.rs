//! Tokenization and the n-gram overlap scores (BLEU-4, ROUGE-1/2/L).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::porter;

/// Output of [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn stemmed(&self) -> TokenSequence {
        TokenSequence {
            tokens: self.tokens.iter().map(|t| porter::stem(t)).collect(),
        }
    }
}

/// Lowercase, split on runs of non-alphanumeric characters, drop empties.
pub fn tokenize(text: &str) -> TokenSequence {
    TokenSequence {
        tokens: text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect(),
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped overlap and total hypothesis n-grams.
fn clipped_overlap(reference: &[String], hypothesis: &[String], n: usize) -> (usize, usize) {
    let refs = ngram_counts(reference, n);
    let hyps = ngram_counts(hypothesis, n);
    let overlap = hyps
        .iter()
        .map(|(gram, c)| (*c).min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    (overlap, hyps.values().sum())
}

/// `k` in the method-4 smoothing recurrence.
pub const METHOD4_K: f64 = 5.0;

/// Sentence BLEU, orders 1–4, uniform weights, single reference.
///
/// Modified precision for order n is `m_n / max(1, t_n)` where `m_n` is the
/// clipped overlap and `t_n` the hypothesis n-gram count. Orders with
/// `m_n = 0` are replaced, in order of appearance, by
///
/// ```text
/// p_n = 1 / (2^c * K / ln(h)) / max(1, t_n)     c = 1, 2, ... ; K = 5
/// ```
///
/// for hypotheses longer than one token (Chen & Cherry smoothing method 4).
/// Brevity penalty is `exp(1 - r/h)` when `h < r`, else 1. An empty
/// hypothesis scores 0, as does any precision still zero after smoothing.
pub fn bleu4_smoothed(reference: &TokenSequence, hypothesis: &TokenSequence) -> f64 {
    let h = hypothesis.len();
    if h == 0 {
        return 0.0;
    }
    let r = reference.len();
    let mut smoothed = 1;
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (overlap, total) = clipped_overlap(&reference.tokens, &hypothesis.tokens, n);
        let denom = total.max(1) as f64;
        let p = if overlap > 0 {
            overlap as f64 / denom
        } else if h > 1 {
            let p = 1.0 / (2f64.powi(smoothed) * METHOD4_K / (h as f64).ln()) / denom;
            smoothed += 1;
            p
        } else {
            0.0
        };
        if p <= 0.0 {
            return 0.0;
        }
        log_sum += 0.25 * p.ln();
    }
    let bp = if h < r { (1.0 - r as f64 / h as f64).exp() } else { 1.0 };
    (bp * log_sum.exp()).clamp(0.0, 1.0)
}

fn f_measure(overlap: usize, ref_total: usize, hyp_total: usize) -> f64 {
    match (ref_total, hyp_total) {
        (0, 0) => 1.0,
        (0, _) | (_, 0) => 0.0,
        _ if overlap == 0 => 0.0,
        _ => {
            let p = overlap as f64 / hyp_total as f64;
            let r = overlap as f64 / ref_total as f64;
            2.0 * p * r / (p + r)
        }
    }
}

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0; b.len() + 1];
    let mut cur = vec![0; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

impl RougeScores {
    pub fn combined(&self) -> f64 {
        (self.rouge1 + self.rouge2 + self.rouge_l) / 3.0
    }
}

/// ROUGE-1, -2 and -L F-measures over Porter-stemmed tokens. A component
/// whose n-grams are empty on both sides scores 1, on one side 0.
pub fn rouge_scores(reference: &TokenSequence, hypothesis: &TokenSequence) -> RougeScores {
    let uniform = |v| RougeScores {
        rouge1: v,
        rouge2: v,
        rouge_l: v,
    };
    match (reference.is_empty(), hypothesis.is_empty()) {
        (true, true) => return uniform(1.0),
        (true, false) | (false, true) => return uniform(0.0),
        _ => {}
    }
    let r = reference.stemmed().tokens;
    let h = hypothesis.stemmed().tokens;
    let component = |n: usize| {
        let (overlap, hyp_total) = clipped_overlap(&r, &h, n);
        f_measure(overlap, r.len().saturating_sub(n - 1), hyp_total)
    };
    RougeScores {
        rouge1: component(1),
        rouge2: component(2),
        rouge_l: f_measure(lcs_len(&r, &h), r.len(), h.len()),
    }
}

/// Mean of ROUGE-1, ROUGE-2 and ROUGE-L F-measures.
pub fn rouge_combined(reference: &TokenSequence, hypothesis: &TokenSequence) -> f64 {
    rouge_scores(reference, hypothesis).combined()
}

/// ROUGE-1 recall over stemmed tokens.
pub fn rouge1_recall(reference: &TokenSequence, hypothesis: &TokenSequence) -> f64 {
    let r = reference.stemmed().tokens;
    let h = hypothesis.stemmed().tokens;
    if r.is_empty() {
        return 1.0;
    }
    clipped_overlap(&r, &h, 1).0 as f64 / r.len() as f64
}
