//! Filename embeddings built from character n-grams.
//!
//! A filename is treated as a single token, wrapped in `<`/`>` boundary
//! markers and decomposed into character n-grams; the token vector is the
//! mean of its n-gram vectors. Two providers implement the lookup:
//!
//! - [`HashedProvider`]: every n-gram is hashed into a bucket whose vector is
//!   generated on the fly from a counter-based generator. Fully
//!   deterministic, no model file needed. This is the default.
//! - [`TextVectorProvider`]: tokens found in a textual `.vec` file use the
//!   stored vector; everything else falls back to the hashed provider.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{CamoError, Result};
use crate::geometry::{l2_normalize, Embedding};
use crate::rng::{counter_unit, fnv1a64};

/// Character n-gram extraction and hashing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramConfig {
    pub min_n: usize,
    pub max_n: usize,
    /// Embedding dimension d.
    pub dim: usize,
    /// Hash table size for the hashed provider.
    pub bucket_count: u64,
    pub seed: u64,
}

impl Default for NgramConfig {
    fn default() -> Self {
        NgramConfig {
            min_n: 3,
            max_n: 6,
            dim: 100,
            bucket_count: 2_000_000,
            seed: 42,
        }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_n < 1 || self.min_n > self.max_n || self.max_n > 16 {
            return Err(CamoError::Config(format!(
                "n-gram lengths must satisfy 1 <= min_n <= max_n <= 16, got [{}, {}]",
                self.min_n, self.max_n
            )));
        }
        if self.dim < 2 {
            return Err(CamoError::Config("dim must be >= 2".into()));
        }
        if self.bucket_count < 1 {
            return Err(CamoError::Config("bucket_count must be >= 1".into()));
        }
        Ok(())
    }
}

/// Anything that maps a token string to a unit vector.
///
/// Providers are immutable after construction; `embed` must be total over
/// non-empty strings and deterministic within one instance.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, token: &str) -> Result<Embedding>;
    fn dim(&self) -> usize;
    /// Identifier recorded in scoring contexts so reports can name the
    /// provider that produced them.
    fn provider_id(&self) -> String;
}

/// All character n-grams of the boundary-wrapped token, shortest length
/// first, left to right within each length, plus the whole wrapped token
/// when its length falls outside [min_n, max_n]. Duplicates are retained.
pub fn extract_ngrams(token: &str, cfg: &NgramConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    let token = token.trim();
    if token.is_empty() {
        return Err(CamoError::InvalidInput("empty token".into()));
    }
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(token.chars())
        .chain(std::iter::once('>'))
        .collect();
    let len = wrapped.len();
    let mut grams = Vec::new();
    for n in cfg.min_n..=cfg.max_n {
        if n > len {
            break;
        }
        for start in 0..=(len - n) {
            grams.push(wrapped[start..start + n].iter().collect());
        }
    }
    // whole wrapped token, unless the loop above already produced it
    if len > cfg.max_n || len < cfg.min_n {
        grams.push(wrapped.iter().collect());
    }
    Ok(grams)
}

fn bucket_of(gram: &str, cfg: &NgramConfig) -> u64 {
    (fnv1a64(gram.as_bytes()) ^ cfg.seed) % cfg.bucket_count
}

/// Mean of the hashed n-gram bucket vectors, L2-normalized.
pub fn hashed_embed(token: &str, cfg: &NgramConfig) -> Result<Embedding> {
    let grams = extract_ngrams(token, cfg)?;
    let mut acc = vec![0.0; cfg.dim];
    for gram in &grams {
        let bucket = bucket_of(gram, cfg);
        for (coord, slot) in acc.iter_mut().enumerate() {
            *slot += counter_unit(cfg.seed, bucket, coord as u64);
        }
    }
    let inv = 1.0 / grams.len() as f64;
    for slot in acc.iter_mut() {
        *slot *= inv;
    }
    l2_normalize(&acc)
}

/// Default deterministic provider backed by [`hashed_embed`].
#[derive(Debug, Clone)]
pub struct HashedProvider {
    cfg: NgramConfig,
}

impl HashedProvider {
    pub fn new(cfg: NgramConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(HashedProvider { cfg })
    }

    pub fn config(&self) -> &NgramConfig {
        &self.cfg
    }
}

impl EmbeddingProvider for HashedProvider {
    fn embed(&self, token: &str) -> Result<Embedding> {
        hashed_embed(token, &self.cfg)
    }

    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn provider_id(&self) -> String {
        format!(
            "hashed(n={}..{},dim={},buckets={},seed={})",
            self.cfg.min_n, self.cfg.max_n, self.cfg.dim, self.cfg.bucket_count, self.cfg.seed
        )
    }
}

/// Provider backed by a whitespace-separated textual vector file, with
/// hashed fallback for out-of-vocabulary tokens.
pub struct TextVectorProvider {
    table: HashMap<String, Embedding>,
    fallback: HashedProvider,
    source: String,
}

impl TextVectorProvider {
    pub fn vocab_len(&self) -> usize {
        self.table.len()
    }
}

/// Parse a `.vec`-style file: header `<vocab_size> <dim>`, then one
/// `<token> <f1> ... <f_dim>` line per token. Stored vectors are
/// L2-normalized on load.
pub fn load_text_vectors(path: &Path, cfg: &NgramConfig) -> Result<TextVectorProvider> {
    cfg.validate()?;
    let file = File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| CamoError::Parse {
            line: 1,
            msg: "missing header".into(),
        })?
        .map_err(CamoError::Io)?;
    let mut parts = header.split_whitespace();
    let vocab: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CamoError::Parse {
            line: 1,
            msg: "header must be '<vocab_size> <dim>'".into(),
        })?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CamoError::Parse {
            line: 1,
            msg: "header must be '<vocab_size> <dim>'".into(),
        })?;
    if dim != cfg.dim {
        return Err(CamoError::Config(format!(
            "vector file dim {} does not match configured dim {}",
            dim, cfg.dim
        )));
    }
    let mut table = HashMap::with_capacity(vocab);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(CamoError::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| CamoError::Parse {
                line: line_no,
                msg: "missing token".into(),
            })?
            .to_string();
        let values: std::result::Result<Vec<f64>, _> = fields.map(|f| f.parse::<f64>()).collect();
        let values = values.map_err(|e| CamoError::Parse {
            line: line_no,
            msg: format!("bad float: {e}"),
        })?;
        if values.len() != dim {
            return Err(CamoError::Parse {
                line: line_no,
                msg: format!("expected {} components, got {}", dim, values.len()),
            });
        }
        let unit = l2_normalize(&values).map_err(|_| CamoError::Parse {
            line: line_no,
            msg: "zero-norm vector".into(),
        })?;
        table.insert(token, unit);
    }
    Ok(TextVectorProvider {
        table,
        fallback: HashedProvider::new(cfg.clone())?,
        source: path.display().to_string(),
    })
}

impl EmbeddingProvider for TextVectorProvider {
    fn embed(&self, token: &str) -> Result<Embedding> {
        match self.table.get(token.trim()) {
            Some(v) => Ok(v.clone()),
            None => self.fallback.embed(token),
        }
    }

    fn dim(&self) -> usize {
        self.fallback.dim()
    }

    fn provider_id(&self) -> String {
        format!("vec({}) + {}", self.source, self.fallback.provider_id())
    }
}
