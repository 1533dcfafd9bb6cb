//! Persistent embedding cache: append-only JSON-lines, one record per
//! embedding, keyed by sha256(backend_id ‖ 0x00 ‖ text). The index is
//! rebuilt on open; a truncated trailing line (interrupted write) is
//! skipped with a warning.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cache serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRecord {
    key: String,
    backend_id: String,
    text_hash: String,
    dim: usize,
    vector: Vec<f64>,
}

/// One-writer persistent cache of text embeddings.
pub struct EmbeddingCache {
    path: PathBuf,
    index: HashMap<String, Vec<f64>>,
    writer: BufWriter<File>,
    skipped_lines: usize,
}

impl EmbeddingCache {
    /// Opens (or creates) the cache file and rebuilds the in-memory index.
    pub fn open(path: &Path) -> Result<Self, CacheError> {
        let io_err = |source| CacheError::Io {
            path: path.to_path_buf(),
            source,
        };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(io_err)?;
            }
        }

        let mut index = HashMap::new();
        let mut skipped_lines = 0usize;
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io_err)?);
            for line in reader.lines() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<CacheRecord>(&line) {
                    Ok(record) => {
                        index.insert(record.key, record.vector);
                    }
                    Err(_) => skipped_lines += 1,
                }
            }
            if skipped_lines > 0 {
                log::warn!(
                    "cache {}: skipped {skipped_lines} unparseable line(s)",
                    path.display()
                );
            }
        }

        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err)?;

        Ok(Self {
            path: path.to_path_buf(),
            index,
            writer: BufWriter::new(file),
            skipped_lines,
        })
    }

    /// sha256(backend_id ‖ 0x00 ‖ text), hex-encoded.
    pub fn cache_key(backend_id: &str, text: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(backend_id.as_bytes());
        hasher.update([0u8]);
        hasher.update(text.as_bytes());
        hex::encode(hasher.finalize())
    }

    pub fn get(&self, backend_id: &str, text: &str) -> Option<&[f64]> {
        self.index
            .get(&Self::cache_key(backend_id, text))
            .map(Vec::as_slice)
    }

    /// Appends one record and flushes so a crash loses at most the record
    /// being written.
    pub fn put(&mut self, backend_id: &str, text: &str, vector: &[f64]) -> Result<(), CacheError> {
        let key = Self::cache_key(backend_id, text);
        if self.index.contains_key(&key) {
            return Ok(());
        }
        let record = CacheRecord {
            key: key.clone(),
            backend_id: backend_id.to_string(),
            text_hash: hex::encode(Sha256::digest(text.as_bytes())),
            dim: vector.len(),
            vector: vector.to_vec(),
        };
        let line = serde_json::to_string(&record)?;
        let io_err = |source| CacheError::Io {
            path: self.path.clone(),
            source,
        };
        self.writer.write_all(line.as_bytes()).map_err(io_err)?;
        self.writer.write_all(b"\n").map_err(io_err)?;
        self.writer.flush().map_err(io_err)?;
        self.index.insert(key, vector.to_vec());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Lines that failed to parse on open.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
