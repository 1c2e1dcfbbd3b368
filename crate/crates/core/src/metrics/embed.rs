use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{tokenize_13a, MetricError};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error("no embedding for text `{0}`")]
    Missing(String),
    #[error("text has no tokens")]
    EmptyText,
    #[error("embedding file: {0}")]
    File(String),
    #[error("embedding request failed: {0}")]
    Http(String),
}

/// Source of sentence and token embeddings.
pub trait EmbeddingProvider: Send + Sync {
    /// One vector for the whole text.
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError>;
    /// One vector per token of the text.
    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        (**self).embed_text(text)
    }
    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
        (**self).embed_tokens(text)
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn best_match_mean(from: &[Vec<f64>], to: &[Vec<f64>]) -> Result<f64, MetricError> {
    let mut sum = 0.0;
    for a in from {
        let mut best = f64::NEG_INFINITY;
        for b in to {
            best = best.max(cosine(a, b)?);
        }
        sum += best;
    }
    Ok(sum / from.len() as f64)
}

/// Greedy token matching: each token pairs with its most similar token on the
/// other side. Precision averages over hypothesis tokens, recall over
/// reference tokens. No frequency weighting.
pub fn embed_match_f1(hyp: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<MatchScore, MetricError> {
    if hyp.is_empty() || reference.is_empty() {
        return Err(MetricError::Empty);
    }
    let precision = best_match_mean(hyp, reference)?;
    let recall = best_match_mean(reference, hyp)?;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MatchScore { precision, recall, f1 })
}

/// Cosine similarity of the whole-text embeddings of two utterances.
pub fn coherence<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    generated: &str,
    previous: &str,
) -> Result<f64, MetricError> {
    if generated.trim().is_empty() || previous.trim().is_empty() {
        return Err(MetricError::Empty);
    }
    cosine(&provider.embed_text(generated)?, &provider.embed_text(previous)?)
}

/// Deterministic offline embeddings: every `13a` token maps to a fixed
/// pseudo-random vector seeded by its hash; a text embeds as the mean of its
/// token vectors.
#[derive(Clone, Copy, Debug)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: 64 }
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl HashEmbedder {
    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(token));
        (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        let toks = self.embed_tokens(text)?;
        let mut mean = vec![0.0; self.dim];
        for v in &toks {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        let n = toks.len() as f64;
        Ok(mean.into_iter().map(|m| m / n).collect())
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
        let toks = tokenize_13a(text);
        if toks.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        Ok(toks.iter().map(|t| self.token_vector(t)).collect())
    }
}

/// One line of a precomputed embedding file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub text: String,
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_vectors: Option<Vec<Vec<f64>>>,
}

/// Precomputed embeddings keyed by exact text, read from JSON lines with
/// fields `text`, `vector` and optionally `token_vectors`.
#[derive(Clone, Debug, Default)]
pub struct FileEmbedder {
    entries: HashMap<String, EmbeddingEntry>,
}

impl FileEmbedder {
    pub fn from_entries(entries: impl IntoIterator<Item = EmbeddingEntry>) -> Self {
        FileEmbedder {
            entries: entries.into_iter().map(|e| (e.text.clone(), e)).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let rows: Vec<EmbeddingEntry> = jsonl::read(path).map_err(|e| EmbedError::File(e.to_string()))?;
        Ok(Self::from_entries(rows))
    }
}

impl EmbeddingProvider for FileEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        self.entries
            .get(text)
            .map(|e| e.vector.clone())
            .ok_or_else(|| EmbedError::Missing(text.to_string()))
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
        self.entries
            .get(text)
            .and_then(|e| e.token_vectors.clone())
            .ok_or_else(|| EmbedError::Missing(text.to_string()))
    }
}

/// OpenAI-compatible `POST {base}/embeddings`. Token vectors are obtained by
/// embedding each `13a` token as a separate input.
pub struct HttpEmbedder {
    base_url: String,
    api_key: Option<String>,
    model: String,
    timeout: Duration,
    client: OnceLock<reqwest::blocking::Client>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    index: usize,
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        HttpEmbedder {
            base_url: base_url.into(),
            api_key,
            model: model.into(),
            timeout: Duration::from_secs(60),
            client: OnceLock::new(),
        }
    }

    fn request(&self, inputs: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let client = self.client.get_or_init(|| {
            reqwest::blocking::Client::builder()
                .timeout(self.timeout)
                .build()
                .expect("http client")
        });
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let mut req = client
            .post(url)
            .json(&serde_json::json!({ "model": self.model, "input": inputs }));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| EmbedError::Http(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let body = resp.text().unwrap_or_default();
            return Err(EmbedError::Http(format!("status {status}: {body}")));
        }
        let mut parsed: EmbeddingResponse = resp.json().map_err(|e| EmbedError::Http(e.to_string()))?;
        if parsed.data.len() != inputs.len() {
            return Err(EmbedError::Http(format!(
                "expected {} embeddings, got {}",
                inputs.len(),
                parsed.data.len()
            )));
        }
        parsed.data.sort_by_key(|d| d.index);
        Ok(parsed.data.into_iter().map(|d| d.embedding).collect())
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, EmbedError> {
        Ok(self.request(&[text.to_string()])?.remove(0))
    }

    fn embed_tokens(&self, text: &str) -> Result<Vec<Vec<f64>>, EmbedError> {
        let toks = tokenize_13a(text);
        if toks.is_empty() {
            return Err(EmbedError::EmptyText);
        }
        self.request(&toks)
    }
}
