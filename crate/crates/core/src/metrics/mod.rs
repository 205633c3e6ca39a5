//! Per-sample scoring: field-level edit similarity (EM), embedding cosine
//! (semantic F1), smoothed BLEU-4, combined ROUGE and their mean.
//!
//! All text metrics read the same rendering of a record: its [`FlatView`]
//! as `path: value` lines, tokenized by [`tokenize`].

pub mod porter;
pub mod text;

use serde::{Deserialize, Serialize};

pub use text::{bleu4_smoothed, lcs_len, rouge_combined, rouge_scores, tokenize, RougeScores, TokenSequence};

use crate::error::GatewayError;
use crate::llm_gateway::{cosine, EmbeddingProvider};
use crate::schema::{FlatView, ResumeRecord};

/// Bumped whenever a metric definition changes; recorded in run manifests.
pub const METRIC_SUITE_VERSION: &str = "metrics-v1";

fn distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    // Field values are short; keep the row on the stack when it fits.
    let mut stack = [0usize; 64];
    let mut heap = Vec::new();
    let row: &mut [usize] = if b.len() < stack.len() {
        &mut stack[..=b.len()]
    } else {
        heap.resize(b.len() + 1, 0);
        &mut heap
    };
    for (j, cell) in row.iter_mut().enumerate() {
        *cell = j;
    }
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if ca == cb {
                diag
            } else {
                1 + diag.min(above).min(row[j])
            };
            diag = above;
        }
    }
    row[b.len()]
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a.is_ascii() && b.is_ascii() {
        return distance(a.as_bytes(), b.as_bytes());
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    distance(&a, &b)
}

fn char_len(s: &str) -> usize {
    if s.is_ascii() {
        s.len()
    } else {
        s.chars().count()
    }
}

/// `1 - d(a, b) / max(|a|, |b|)`; two empty strings score 1.
pub fn levenshtein_ratio(a: &str, b: &str) -> f64 {
    let longest = char_len(a).max(char_len(b));
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Mean Levenshtein ratio over the union of leaf paths. A path present on
/// one side only is compared against the empty string.
pub fn exact_match_views(reference: &FlatView, predicted: &FlatView) -> f64 {
    let mut total = 0.0;
    let mut fields = 0usize;
    for (path, value) in &reference.pairs {
        total += levenshtein_ratio(value, predicted.get(path).unwrap_or(""));
        fields += 1;
    }
    for (path, value) in &predicted.pairs {
        if reference.get(path).is_none() {
            total += levenshtein_ratio("", value);
            fields += 1;
        }
    }
    if fields == 0 {
        1.0
    } else {
        total / fields as f64
    }
}

pub fn exact_match(reference: &ResumeRecord, predicted: &ResumeRecord) -> f64 {
    exact_match_views(&FlatView::of(reference), &FlatView::of(predicted))
}

/// Cosine of the embedded renderings, clamped to `[0, 1]`.
pub fn semantic_f1(
    reference: &ResumeRecord,
    predicted: &ResumeRecord,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, GatewayError> {
    let r = provider.embed(&FlatView::of(reference).render())?;
    let p = provider.embed(&FlatView::of(predicted).render())?;
    let raw = cosine(&r, &p);
    log::debug!("semantic cosine {raw}");
    Ok(raw.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub em: f64,
    pub f1_sem: f64,
    pub bleu: f64,
    pub rouge: f64,
    pub overall: f64,
}

impl SampleScore {
    pub fn new(em: f64, f1_sem: f64, bleu: f64, rouge: f64) -> Self {
        Self {
            em,
            f1_sem,
            bleu,
            rouge,
            overall: overall_similarity(em, f1_sem, bleu, rouge),
        }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn components(&self) -> [f64; 5] {
        [self.em, self.f1_sem, self.bleu, self.rouge, self.overall]
    }
}

/// Unweighted mean of the four metrics.
pub fn overall_similarity(em: f64, f1_sem: f64, bleu: f64, rouge: f64) -> f64 {
    (em + f1_sem + bleu + rouge) / 4.0
}

pub fn score_sample(
    reference: &ResumeRecord,
    predicted: &ResumeRecord,
    provider: &dyn EmbeddingProvider,
) -> Result<SampleScore, GatewayError> {
    let rv = FlatView::of(reference);
    let pv = FlatView::of(predicted);
    let rt = tokenize(&rv.render());
    let pt = tokenize(&pv.render());
    Ok(SampleScore::new(
        exact_match_views(&rv, &pv),
        semantic_f1(reference, predicted, provider)?,
        bleu4_smoothed(&rt, &pt),
        rouge_combined(&rt, &pt),
    ))
}
