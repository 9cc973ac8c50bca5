//! Sentence-embedding backends and the binary feature file.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::NodeAnnotation;
use crate::matrix::Matrix;
use crate::util::stable_hash;

/// Joins description and reasoning before embedding.
pub const TEXT_SEPARATOR: &str = "\n";

pub const ENV_EMBED_ENDPOINT: &str = "GHGRL_EMBED_ENDPOINT";

const FEATURE_MAGIC: &[u8; 4] = b"GHGF";
const FEATURE_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("embedder transport error: {0}")]
    Transport(String),
    #[error("embedder protocol error: {0}")]
    Protocol(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding contains non-finite values")]
    NonFinite,
    #[error("feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Embedder: Send + Sync {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError>;

    /// Output width, when known before the first call.
    fn dim(&self) -> Option<usize> {
        None
    }
}

/// Offline embedder: lower-cased alphanumeric tokens are hashed into `dim`
/// buckets and the count vector is L2-normalized.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { dim }
    }

    pub fn embed_text(&self, text: &str) -> Vec<f32> {
        let mut counts = vec![0.0f64; self.dim];
        let mut any = false;
        for token in text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = stable_hash(b"hash-embedder", token.to_lowercase().as_bytes());
            counts[(h % self.dim as u64) as usize] += 1.0;
            any = true;
        }
        if !any {
            let h = stable_hash(b"hash-embedder", text.as_bytes());
            counts[(h % self.dim as u64) as usize] = 1.0;
        }
        let norm = counts.iter().map(|x| x * x).sum::<f64>().sqrt();
        counts.iter().map(|x| (x / norm) as f32).collect()
    }
}

impl Embedder for HashEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        Ok(texts.iter().map(|t| self.embed_text(t)).collect())
    }

    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }
}

/// Client for a `POST {endpoint}/embed` service taking `{"texts": [...]}` and
/// answering `{"embeddings": [[...], ...]}`.
pub struct RemoteEmbedder {
    url: String,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f32>>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(Self {
            url: format!("{}/embed", endpoint.trim_end_matches('/')),
            client,
        })
    }

    pub fn from_env(timeout: Duration) -> Result<Self, EmbedError> {
        let endpoint = std::env::var(ENV_EMBED_ENDPOINT)
            .map_err(|_| EmbedError::Transport(format!("{ENV_EMBED_ENDPOINT} is not set")))?;
        Self::new(&endpoint, timeout)
    }
}

impl Embedder for RemoteEmbedder {
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, EmbedError> {
        let resp = self
            .client
            .post(&self.url)
            .json(&json!({ "texts": texts }))
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(EmbedError::Transport(format!("HTTP {}", status.as_u16())));
        }
        let parsed: EmbedResponse = resp.json().map_err(|e| EmbedError::Protocol(e.to_string()))?;
        if parsed.embeddings.len() != texts.len() {
            return Err(EmbedError::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                parsed.embeddings.len()
            )));
        }
        Ok(parsed.embeddings)
    }
}

fn check_vector(v: &[f32], expected: Option<usize>) -> Result<(), EmbedError> {
    if v.is_empty() {
        return Err(EmbedError::Protocol("empty embedding".into()));
    }
    if let Some(expected) = expected {
        if v.len() != expected {
            return Err(EmbedError::DimensionMismatch { expected, got: v.len() });
        }
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(())
}

/// Embeds `description ‖ separator ‖ reasoning`.
pub fn embed_annotation(annotation: &NodeAnnotation, embedder: &dyn Embedder) -> Result<Vec<f32>, EmbedError> {
    let mut out = embedder.embed_batch(&[annotation.embedding_text()])?;
    let v = out
        .pop()
        .ok_or_else(|| EmbedError::Protocol("embedder returned no vector".into()))?;
    check_vector(&v, embedder.dim())?;
    Ok(v)
}

/// Node feature matrix, one row per node, stored as 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self, EmbedError> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            check_vector(r, Some(dim))?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            dim,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(self.rows, self.dim, self.data.iter().map(|&x| f64::from(x)).collect())
    }

    /// Binary layout: `"GHGF"`, u32 version, u64 rows, u32 dim, then
    /// row-major little-endian f32 values.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), EmbedError> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&FEATURE_VERSION.to_le_bytes())?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, EmbedError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FEATURE_MAGIC {
            return Err(EmbedError::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FEATURE_VERSION {
            return Err(EmbedError::Format(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b8)?;
        let rows = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        let len = rows
            .checked_mul(dim)
            .ok_or_else(|| EmbedError::Format("size overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != len * 4 {
            return Err(EmbedError::Format(format!(
                "expected {} payload bytes, found {}",
                len * 4,
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
            .collect();
        if !data.iter().all(|x| x.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self { rows, dim, data })
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Embeds every annotation in order, `batch_size` texts per embedder call.
pub fn build_feature_matrix(
    annotations: &[NodeAnnotation],
    embedder: &dyn Embedder,
    batch_size: usize,
) -> Result<FeatureMatrix, EmbedError> {
    let mut rows = Vec::with_capacity(annotations.len());
    let mut expected = embedder.dim();
    for chunk in annotations.chunks(batch_size.max(1)) {
        let texts: Vec<String> = chunk.iter().map(NodeAnnotation::embedding_text).collect();
        let vectors = embedder.embed_batch(&texts)?;
        if vectors.len() != texts.len() {
            return Err(EmbedError::Protocol(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                vectors.len()
            )));
        }
        for v in vectors {
            check_vector(&v, expected)?;
            expected = Some(v.len());
            rows.push(v);
        }
    }
    FeatureMatrix::from_rows(rows)
}
