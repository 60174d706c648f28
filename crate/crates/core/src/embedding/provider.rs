use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::EmbeddingError;
use crate::transport::{post_json, ProviderError};

pub const MOCK_DIM: usize = 256;
pub const DEFAULT_EMBEDDING_MODEL: &str = "all-mpnet-base-v2";

/// Unit-length vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// Scales to unit length. A zero (or empty) input becomes the first basis
    /// vector of the same dimension.
    pub fn normalized(values: Vec<f64>) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            Self {
                values: values.into_iter().map(|v| v / norm).collect(),
            }
        } else {
            Self::basis(values.len().max(1), 0)
        }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut values = vec![0.0; dim];
        values[index] = 1.0;
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Dot product of two unit vectors, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(dot.clamp(-1.0, 1.0))
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError>;

    fn dim(&self) -> usize;

    /// Written into vector-file headers; must not contain whitespace.
    fn id(&self) -> String;

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Offline bag-of-tokens encoder: lowercase alphanumeric tokens hashed with
/// FNV-1a into `dim` buckets.
#[derive(Debug, Clone)]
pub struct HashBagEmbedder {
    dim: usize,
}

impl Default for HashBagEmbedder {
    fn default() -> Self {
        Self { dim: MOCK_DIM }
    }
}

impl HashBagEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

impl EmbeddingProvider for HashBagEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        let mut values = vec![0.0; self.dim];
        for token in Self::tokens(text) {
            values[self.bucket(&token)] += 1.0;
        }
        Ok(EmbeddingVector::normalized(values))
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        format!("hashbag-{}", self.dim)
    }
}

/// Remote encoder speaking the common embeddings schema
/// (`{"model", "input": [...]}` → `data[i].embedding`).
#[derive(Debug, Clone)]
pub struct HttpEmbedder {
    pub endpoint: String,
    pub model: String,
    pub dim: usize,
    pub batch_size: usize,
    api_key: Option<String>,
    pub timeout: Duration,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            batch_size: 32,
            api_key: None,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    fn request(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let body = json!({ "model": self.model, "input": texts });
        let response = post_json(&self.endpoint, self.api_key.as_deref(), &body, self.timeout)?;
        let data = response
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::BadResponse("missing `data` array".into()))?;
        if data.len() != texts.len() {
            return Err(ProviderError::BadResponse(format!(
                "expected {} embeddings, got {}",
                texts.len(),
                data.len()
            )));
        }
        data.iter()
            .map(|item| {
                let values: Vec<f64> = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ProviderError::BadResponse("missing `embedding`".into()))?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| ProviderError::BadResponse("non-numeric embedding".into())))
                    .collect::<Result<_, _>>()?;
                if values.len() != self.dim {
                    return Err(ProviderError::BadResponse(format!(
                        "expected dimension {}, got {}",
                        self.dim,
                        values.len()
                    )));
                }
                Ok(EmbeddingVector::normalized(values))
            })
            .collect()
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, ProviderError> {
        if text.trim().is_empty() {
            return Ok(EmbeddingVector::basis(self.dim, 0));
        }
        Ok(self.request(&[text.to_string()])?.remove(0))
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn id(&self) -> String {
        self.model.split_whitespace().collect::<Vec<_>>().join("_")
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size) {
            let live: Vec<String> = chunk.iter().filter(|t| !t.trim().is_empty()).cloned().collect();
            let mut fetched = if live.is_empty() {
                Vec::new()
            } else {
                self.request(&live)?
            }
            .into_iter();
            for t in chunk {
                if t.trim().is_empty() {
                    out.push(EmbeddingVector::basis(self.dim, 0));
                } else {
                    out.push(fetched.next().expect("one embedding per live text"));
                }
            }
        }
        Ok(out)
    }
}

/// Header line `<dim> <provider_id>`, then little-endian f32 values.
pub fn write_vectors(
    path: &Path,
    provider_id: &str,
    vectors: &[EmbeddingVector],
) -> Result<(), EmbeddingError> {
    let dim = vectors.first().map_or(0, EmbeddingVector::dim);
    if let Some(bad) = vectors.iter().find(|v| v.dim() != dim) {
        return Err(EmbeddingError::DimensionMismatch {
            left: dim,
            right: bad.dim(),
        });
    }
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{dim} {provider_id}")?;
    for v in vectors {
        for x in &v.values {
            f.write_all(&(*x as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_vectors(path: &Path) -> Result<(String, Vec<EmbeddingVector>), EmbeddingError> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let mut fields = header.split_whitespace();
    let dim: usize = fields
        .next()
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| EmbeddingError::Format(format!("bad header {:?}", header.trim_end())))?;
    let provider_id = fields.next().unwrap_or_default().to_string();
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if dim == 0 {
        return if bytes.is_empty() {
            Ok((provider_id, Vec::new()))
        } else {
            Err(EmbeddingError::Format("data after zero-dimension header".into()))
        };
    }
    if bytes.len() % (4 * dim) != 0 {
        return Err(EmbeddingError::Format(format!(
            "{} data bytes is not a multiple of {}",
            bytes.len(),
            4 * dim
        )));
    }
    let vectors = bytes
        .chunks_exact(4 * dim)
        .map(|chunk| {
            EmbeddingVector::normalized(
                chunk
                    .chunks_exact(4)
                    .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
                    .collect(),
            )
        })
        .collect();
    Ok((provider_id, vectors))
}
