//! Turning concept streams into embedding-space trajectories.
//!
//! A stream is expanded into per-step texts ([`build_prefixes`]) and each
//! text is mapped to a vector, either by a remote embedding API behind a
//! persistent cache, or by a local static word-vector table.

mod cache;
mod remote;
mod vector_table;

pub use cache::{CacheError, EmbeddingCache};
pub use remote::{RemoteBackend, RemoteBackendConfig, RetryPolicy};
pub use vector_table::{
    lookup_static, parse_vector_table, TableWarning, VectorTable, VectorTableLoad,
};

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{ConceptStream, StreamKey};
use crate::scalar::Scalar;

/// How per-step texts are built from the stream's items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrefixMode {
    /// Step `t` embeds items 1..=t joined by single spaces.
    Cumulative,
    /// Step `t` embeds item `t` alone.
    NonCumulative,
}

impl PrefixMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PrefixMode::Cumulative => "cumulative",
            PrefixMode::NonCumulative => "non_cumulative",
        }
    }
}

impl std::fmt::Display for PrefixMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrefixMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cumulative" => Ok(PrefixMode::Cumulative),
            "non_cumulative" | "non-cumulative" => Ok(PrefixMode::NonCumulative),
            other => Err(format!("unknown prefix mode `{other}`")),
        }
    }
}

/// Time-ordered embedding vectors for one stream. `points[t]` is `None`
/// where the embedding is flagged missing (e.g. a fully out-of-vocabulary
/// item under a static table); present vectors all share `dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedTrajectory<T> {
    pub key: StreamKey,
    pub backend_id: String,
    pub prefix_mode: PrefixMode,
    pub dimension: usize,
    pub points: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> EmbeddedTrajectory<T> {
    pub fn n_items(&self) -> usize {
        self.points.len()
    }

    pub fn n_present(&self) -> usize {
        self.points.iter().filter(|p| p.is_some()).count()
    }

    /// Checks the dimension and finiteness invariants.
    pub fn validate(&self) -> Result<(), EmbedError> {
        for point in self.points.iter().flatten() {
            if point.len() != self.dimension {
                return Err(EmbedError::DimensionMismatch {
                    backend: self.backend_id.clone(),
                    expected: self.dimension,
                    found: point.len(),
                });
            }
            if point.iter().any(|c| !c.is_finite()) {
                return Err(EmbedError::BadResponse {
                    backend: self.backend_id.clone(),
                    detail: "non-finite embedding component".into(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("bad vector-table header at line {line}: `{content}`")]
    BadHeader { line: u64, content: String },
    #[error("vector-table line {line}: expected {expected} components, found {found}")]
    BadVectorArity {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("vector-table line {line}: non-numeric component `{token}`")]
    NonNumericComponent { line: u64, token: String },
    #[error("all tokens of `{text}` are out of vocabulary")]
    AllTokensOutOfVocabulary { text: String },
    #[error("empty text cannot be embedded")]
    EmptyText,
    #[error("backend `{backend}` returned dimension {found}, expected {expected}")]
    DimensionMismatch {
        backend: String,
        expected: usize,
        found: usize,
    },
    #[error("backend `{backend}` unavailable after {attempts} attempt(s): {last_error}")]
    BackendUnavailable {
        backend: String,
        attempts: u32,
        last_error: String,
    },
    #[error("backend `{backend}` requires environment variable `{env_var}` (not set)")]
    AuthMissing { backend: String, env_var: String },
    #[error("backend `{backend}`: bad response: {detail}")]
    BadResponse { backend: String, detail: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A remote embedding endpoint: maps a batch of texts to vectors of a
/// fixed dimension. Implementations are expected to be safe to call from
/// several threads at once, up to [`TextEmbedder::parallelism`] requests.
pub trait TextEmbedder: Send + Sync {
    fn backend_id(&self) -> &str;
    fn dimension(&self) -> usize;
    /// Maximum number of texts per request.
    fn batch_limit(&self) -> usize {
        usize::MAX
    }
    /// Bound on concurrent in-flight requests.
    fn parallelism(&self) -> usize {
        1
    }
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Declares one backend in the pipeline configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendDecl {
    RemoteApi(RemoteBackendConfig),
    StaticTable {
        backend_id: String,
        path: std::path::PathBuf,
        /// Optional check against the table header.
        #[serde(default)]
        dimension: Option<usize>,
    },
}

impl BackendDecl {
    pub fn backend_id(&self) -> &str {
        match self {
            BackendDecl::RemoteApi(cfg) => &cfg.backend_id,
            BackendDecl::StaticTable { backend_id, .. } => backend_id,
        }
    }
}

/// Build the per-step texts for a stream.
///
/// Cumulative: element `t` is items 1..=t joined by single spaces, so the
/// second element of `["cat", "dog"]` is `"cat dog"`. Non-cumulative:
/// element `t` is item `t` alone.
pub fn build_prefixes(stream: &ConceptStream, mode: PrefixMode) -> Vec<String> {
    match mode {
        PrefixMode::Cumulative => {
            let mut out = Vec::with_capacity(stream.items.len());
            let mut acc = String::new();
            for item in &stream.items {
                if !acc.is_empty() {
                    acc.push(' ');
                }
                acc.push_str(item);
                out.push(acc.clone());
            }
            out
        }
        PrefixMode::NonCumulative => stream.items.clone(),
    }
}

/// Counters reported by [`embed_texts`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmbedReport {
    /// Input texts answered from the cache.
    pub cache_hits: usize,
    /// Distinct texts fetched from the backend.
    pub fetched: usize,
    /// Requests issued to the backend.
    pub requests: usize,
}

/// Embed texts through the cache: cached vectors are returned as-is,
/// misses are fetched in batches of `batch_limit` (duplicates fetched
/// once) with up to `parallelism` requests in flight, persisted, and
/// returned. Output order matches input order.
pub fn embed_texts(
    embedder: &dyn TextEmbedder,
    texts: &[String],
    cache: &mut EmbeddingCache,
) -> Result<(Vec<Vec<f64>>, EmbedReport), EmbedError> {
    if texts.iter().any(|t| t.trim().is_empty()) {
        return Err(EmbedError::EmptyText);
    }

    let backend_id = embedder.backend_id();
    let mut report = EmbedReport::default();

    let mut missing: Vec<String> = Vec::new();
    let mut seen: HashMap<&str, ()> = HashMap::new();
    for text in texts {
        if cache.get(backend_id, text).is_some() {
            report.cache_hits += 1;
        } else if seen.insert(text.as_str(), ()).is_none() {
            missing.push(text.clone());
        }
    }

    if !missing.is_empty() {
        let batch_limit = embedder.batch_limit().max(1);
        let batches: Vec<&[String]> = missing.chunks(batch_limit).collect();
        report.requests = batches.len();
        report.fetched = missing.len();

        let fetched = fetch_batches(embedder, &batches)?;
        for (batch, vectors) in batches.iter().zip(&fetched) {
            if vectors.len() != batch.len() {
                return Err(EmbedError::BadResponse {
                    backend: backend_id.to_string(),
                    detail: format!(
                        "batch of {} texts yielded {} vectors",
                        batch.len(),
                        vectors.len()
                    ),
                });
            }
            for (text, vector) in batch.iter().zip(vectors) {
                check_vector(backend_id, embedder.dimension(), vector)?;
                cache.put(backend_id, text, vector)?;
            }
        }
    }

    let mut out = Vec::with_capacity(texts.len());
    for text in texts {
        let vector = cache.get(backend_id, text).expect("vector cached above");
        out.push(vector.to_vec());
    }
    Ok((out, report))
}

fn check_vector(backend: &str, expected: usize, vector: &[f64]) -> Result<(), EmbedError> {
    if vector.len() != expected {
        return Err(EmbedError::DimensionMismatch {
            backend: backend.to_string(),
            expected,
            found: vector.len(),
        });
    }
    if vector.iter().any(|c| !c.is_finite()) {
        return Err(EmbedError::BadResponse {
            backend: backend.to_string(),
            detail: "non-finite embedding component".into(),
        });
    }
    Ok(())
}

/// Run the batches with at most `embedder.parallelism()` in flight,
/// preserving batch order in the result.
fn fetch_batches(
    embedder: &dyn TextEmbedder,
    batches: &[&[String]],
) -> Result<Vec<Vec<Vec<f64>>>, EmbedError> {
    let workers = embedder.parallelism().max(1).min(batches.len());
    if workers <= 1 {
        return batches
            .iter()
            .map(|batch| embedder.embed_batch(batch))
            .collect();
    }

    let next: Mutex<usize> = Mutex::new(0);
    let results: Mutex<Vec<Option<Result<Vec<Vec<f64>>, EmbedError>>>> =
        Mutex::new((0..batches.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= batches.len() {
                        return;
                    }
                    let idx = *guard;
                    *guard += 1;
                    idx
                };
                let result = embedder.embed_batch(batches[idx]);
                results.lock().unwrap()[idx] = Some(result);
            });
        }
    });

    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every batch processed"))
        .collect()
}

/// Backend handle for [`embed_stream`].
pub enum BackendRef<'a> {
    Api(&'a dyn TextEmbedder),
    Static {
        backend_id: &'a str,
        table: &'a VectorTable<f64>,
    },
}

impl BackendRef<'_> {
    pub fn backend_id(&self) -> &str {
        match self {
            BackendRef::Api(e) => e.backend_id(),
            BackendRef::Static { backend_id, .. } => backend_id,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            BackendRef::Api(e) => e.dimension(),
            BackendRef::Static { table, .. } => table.dimension(),
        }
    }
}

/// Embed one stream: build prefixes, then embed them.
///
/// Remote backends go through the cache and fail hard on backend errors.
/// Static tables are looked up directly (no cache; lookups are local) and
/// a fully out-of-vocabulary step becomes a flagged gap instead of an
/// error.
pub fn embed_stream(
    stream: &ConceptStream,
    backend: &BackendRef<'_>,
    mode: PrefixMode,
    cache: &mut EmbeddingCache,
) -> Result<EmbeddedTrajectory<f64>, EmbedError> {
    let texts = build_prefixes(stream, mode);
    let points: Vec<Option<Vec<f64>>> = match backend {
        BackendRef::Api(embedder) => {
            let (vectors, _) = embed_texts(*embedder, &texts, cache)?;
            vectors.into_iter().map(Some).collect()
        }
        BackendRef::Static { table, .. } => texts
            .iter()
            .map(|text| match lookup_static(table, text) {
                Ok(vector) => Ok(Some(vector)),
                Err(EmbedError::AllTokensOutOfVocabulary { .. }) => Ok(None),
                Err(other) => Err(other),
            })
            .collect::<Result<_, EmbedError>>()?,
    };

    let trajectory = EmbeddedTrajectory {
        key: stream.key.clone(),
        backend_id: backend.backend_id().to_string(),
        prefix_mode: mode,
        dimension: backend.dimension(),
        points,
    };
    trajectory.validate()?;
    Ok(trajectory)
}
