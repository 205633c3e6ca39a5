//! Embedding vectors, cosine similarity, and the offline trigram embedder.
//!
//! # Offline embedder
//!
//! The offline provider stands in for a sentence encoder in tests. It is
//! defined exactly so any reimplementation produces the same buckets:
//!
//! 1. Split the text into Unicode scalar values, without case folding.
//! 2. Take every window of three consecutive scalars. A non-empty text
//!    shorter than three scalars contributes itself as a single gram.
//! 3. Hash each gram's UTF-8 bytes with 64-bit FNV-1a
//!    (offset `0xcbf29ce484222325`, prime `0x100000001b3`).
//! 4. Add 1 to bucket `hash % d`.
//! 5. Divide by the L2 norm. The empty text maps to the zero vector.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::GatewayError;

pub const MIN_OFFLINE_DIMENSION: usize = 64;
pub const DEFAULT_OFFLINE_DIMENSION: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Cosine similarity; 0.0 when either side is the zero vector or the
/// dimensions differ.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    if a.dimension() != b.dimension() {
        return 0.0;
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError>;
    /// Recorded in run manifests.
    fn describe(&self) -> String;
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Multiset of character trigrams as the offline embedder sees them.
pub fn trigram_counts(text: &str) -> BTreeMap<String, usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut counts = BTreeMap::new();
    if chars.is_empty() {
        return counts;
    }
    if chars.len() < 3 {
        counts.insert(text.to_owned(), 1);
        return counts;
    }
    for w in chars.windows(3) {
        *counts.entry(w.iter().collect::<String>()).or_insert(0) += 1;
    }
    counts
}

pub fn bucket_of(gram: &str, dimension: usize) -> usize {
    (fnv1a64(gram.as_bytes()) % dimension as u64) as usize
}

/// Trigram hashing with L2 normalization.
pub fn offline_embed(text: &str, dimension: usize) -> EmbeddingVector {
    let mut values = vec![0.0; dimension];
    for (gram, count) in trigram_counts(text) {
        values[bucket_of(&gram, dimension)] += count as f64;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    EmbeddingVector { values }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfflineEmbedder {
    dimension: usize,
}

impl OfflineEmbedder {
    pub fn new(dimension: usize) -> Result<Self, GatewayError> {
        if dimension < MIN_OFFLINE_DIMENSION {
            return Err(GatewayError::Config(format!(
                "offline embedding dimension must be at least {MIN_OFFLINE_DIMENSION}, got {dimension}"
            )));
        }
        Ok(Self { dimension })
    }
}

impl Default for OfflineEmbedder {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_OFFLINE_DIMENSION,
        }
    }
}

impl EmbeddingProvider for OfflineEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        Ok(offline_embed(text, self.dimension))
    }

    fn describe(&self) -> String {
        format!("offline-trigram-fnv1a/{}", self.dimension)
    }
}
