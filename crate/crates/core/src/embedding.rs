//! Deterministic hashed bag-of-tokens embeddings.
//!
//! Text is lowercased and split on every non-alphanumeric character. Each
//! token adds `±1.0` at `fnv1a(token) mod D`; the sign comes from bit 0 of a
//! second FNV-1a round over the token bytes seeded with the first hash. The
//! result is L2-normalized unless it is the zero vector.

use std::fmt;

pub const DEFAULT_DIMENSION: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Numerical slack allowed around the `[-1, 1]` range of similarities.
pub const SIMILARITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    bytes.iter().fold(seed, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    fnv1a(bytes, FNV_OFFSET)
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dimension: usize) -> Self {
        EmbeddingVector(vec![0.0; dimension])
    }

    /// Returns `None` when any component is non-finite.
    pub fn from_values(values: Vec<f64>) -> Option<Self> {
        values
            .iter()
            .all(|v| v.is_finite())
            .then_some(EmbeddingVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EmbeddingVector(self.0.iter().map(|v| v * factor).collect())
    }
}

/// A cosine similarity, guaranteed finite and within `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);

    /// Clamps into `[-1, 1]`; NaN maps to zero.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            SimilarityScore(0.0)
        } else {
            SimilarityScore(value.clamp(-1.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for SimilarityScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

impl serde::Serialize for SimilarityScore {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

/// Seam for swapping the text embedding used by the reasoner.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> EmbeddingVector;
}

#[derive(Debug, Clone, Copy)]
pub struct HashedBagEmbedder {
    dimension: usize,
}

impl HashedBagEmbedder {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashedBagEmbedder { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
}

impl Default for HashedBagEmbedder {
    fn default() -> Self {
        HashedBagEmbedder::new(DEFAULT_DIMENSION)
    }
}

impl Embedder for HashedBagEmbedder {
    fn embed(&self, text: &str) -> EmbeddingVector {
        let mut values = vec![0.0; self.dimension];
        for token in tokenize(text) {
            let bytes = token.as_bytes();
            let first = fnv1a_64(bytes);
            let second = fnv1a(bytes, first);
            let sign = if second & 1 == 0 { 1.0 } else { -1.0 };
            values[(first % self.dimension as u64) as usize] += sign;
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut values {
                *v /= norm;
            }
        }
        EmbeddingVector(values)
    }
}

pub fn embed_text(text: &str) -> EmbeddingVector {
    HashedBagEmbedder::default().embed(text)
}

/// `dot(a, b) / (|a| |b|)`, or zero when either vector is zero.
pub fn cosine_similarity(
    a: &EmbeddingVector,
    b: &EmbeddingVector,
) -> Result<SimilarityScore, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Ok(SimilarityScore::ZERO);
    }
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    Ok(SimilarityScore::new(dot / (na * nb)))
}

pub fn semantic_similarity(a: &str, b: &str) -> SimilarityScore {
    similarity_with(&HashedBagEmbedder::default(), a, b)
}

pub fn similarity_with<E: Embedder + ?Sized>(embedder: &E, a: &str, b: &str) -> SimilarityScore {
    // One embedder always yields one dimension.
    cosine_similarity(&embedder.embed(a), &embedder.embed(b)).unwrap_or(SimilarityScore::ZERO)
}
