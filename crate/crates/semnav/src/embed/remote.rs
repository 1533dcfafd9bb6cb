//! Generic HTTP JSON embedding client. Provider differences (URL, auth
//! header, request/response field paths, batch size) are configuration,
//! not code.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{EmbedError, TextEmbedder};

/// Exponential backoff for transient failures (network errors, HTTP 429
/// and 5xx).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 1000,
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms as f64 * self.factor.powi(attempt as i32);
        Duration::from_millis(ms.min(60_000.0) as u64)
    }
}

/// Configuration for one remote embedding backend.
///
/// `texts_field` is a dot path into the request body where the batch of
/// texts goes; `vectors_path` is a dot path into the response, with `*`
/// standing for "each element of this array". Defaults fit the common
/// `{"input": [...]}` / `{"data": [{"embedding": [...]}]}` contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteBackendConfig {
    pub backend_id: String,
    pub dimension: usize,
    pub url: String,
    /// Environment variable holding the API key; never the key itself.
    #[serde(default)]
    pub auth_env_var: Option<String>,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_texts_field")]
    pub texts_field: String,
    #[serde(default = "default_vectors_path")]
    pub vectors_path: String,
    /// Constant fields merged into every request body (e.g. the model name).
    #[serde(default)]
    pub extra_body: Map<String, Value>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_auth_header() -> String {
    "Authorization".into()
}
fn default_auth_prefix() -> String {
    "Bearer ".into()
}
fn default_batch_size() -> usize {
    100
}
fn default_texts_field() -> String {
    "input".into()
}
fn default_vectors_path() -> String {
    "data.*.embedding".into()
}
fn default_parallelism() -> usize {
    4
}
fn default_timeout_secs() -> u64 {
    60
}

/// HTTP client for one configured backend.
#[derive(Debug)]
pub struct RemoteBackend {
    config: RemoteBackendConfig,
    auth_value: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    /// Builds the client, resolving the API key from the configured
    /// environment variable.
    pub fn new(config: RemoteBackendConfig) -> Result<Self, EmbedError> {
        let auth_value = match &config.auth_env_var {
            Some(var) => match std::env::var(var) {
                Ok(key) if !key.is_empty() => Some(format!("{}{}", config.auth_prefix, key)),
                _ => {
                    return Err(EmbedError::AuthMissing {
                        backend: config.backend_id.clone(),
                        env_var: var.clone(),
                    })
                }
            },
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| EmbedError::BackendUnavailable {
                backend: config.backend_id.clone(),
                attempts: 0,
                last_error: e.to_string(),
            })?;
        Ok(Self {
            config,
            auth_value,
            client,
        })
    }

    pub fn config(&self) -> &RemoteBackendConfig {
        &self.config
    }

    fn request_body(&self, texts: &[String]) -> Result<Value, EmbedError> {
        let mut body = Value::Object(self.config.extra_body.clone());
        let texts_value = Value::Array(texts.iter().map(|t| Value::String(t.clone())).collect());
        insert_at_path(&mut body, &self.config.texts_field, texts_value).map_err(|detail| {
            EmbedError::BadResponse {
                backend: self.config.backend_id.clone(),
                detail: format!("bad texts_field path: {detail}"),
            }
        })?;
        Ok(body)
    }

    fn send_once(&self, body: &Value) -> Result<Value, TransientOrFatal> {
        let mut request = self.client.post(&self.config.url).json(body);
        if let Some(auth) = &self.auth_value {
            request = request.header(self.config.auth_header.as_str(), auth.as_str());
        }
        let response = request
            .send()
            .map_err(|e| TransientOrFatal::Transient(e.to_string()))?;

        let status = response.status();
        if status.is_success() {
            response
                .json::<Value>()
                .map_err(|e| TransientOrFatal::Fatal(format!("invalid JSON response: {e}")))
        } else if status.as_u16() == 429 || status.is_server_error() {
            Err(TransientOrFatal::Transient(format!("HTTP {status}")))
        } else {
            let text = response.text().unwrap_or_default();
            Err(TransientOrFatal::Fatal(format!(
                "HTTP {status}: {}",
                text.chars().take(200).collect::<String>()
            )))
        }
    }
}

enum TransientOrFatal {
    Transient(String),
    Fatal(String),
}

impl TextEmbedder for RemoteBackend {
    fn backend_id(&self) -> &str {
        &self.config.backend_id
    }

    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn batch_limit(&self) -> usize {
        self.config.batch_size.max(1)
    }

    fn parallelism(&self) -> usize {
        self.config.parallelism.max(1)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = self.request_body(texts)?;
        let max_attempts = self.config.retry.max_attempts.max(1);
        let mut last_error = String::new();

        for attempt in 0..max_attempts {
            if attempt > 0 {
                std::thread::sleep(self.config.retry.delay(attempt - 1));
            }
            match self.send_once(&body) {
                Ok(json) => {
                    let vectors = extract_vectors(&json, &self.config.vectors_path).map_err(
                        |detail| EmbedError::BadResponse {
                            backend: self.config.backend_id.clone(),
                            detail,
                        },
                    )?;
                    if vectors.len() != texts.len() {
                        return Err(EmbedError::BadResponse {
                            backend: self.config.backend_id.clone(),
                            detail: format!(
                                "{} texts sent, {} vectors returned",
                                texts.len(),
                                vectors.len()
                            ),
                        });
                    }
                    return Ok(vectors);
                }
                Err(TransientOrFatal::Transient(msg)) => {
                    log::warn!(
                        "backend {}: attempt {}/{} failed: {msg}",
                        self.config.backend_id,
                        attempt + 1,
                        max_attempts
                    );
                    last_error = msg;
                }
                Err(TransientOrFatal::Fatal(msg)) => {
                    return Err(EmbedError::BackendUnavailable {
                        backend: self.config.backend_id.clone(),
                        attempts: attempt + 1,
                        last_error: msg,
                    })
                }
            }
        }

        Err(EmbedError::BackendUnavailable {
            backend: self.config.backend_id.clone(),
            attempts: max_attempts,
            last_error,
        })
    }
}

/// Insert `value` at a dot path, creating intermediate objects.
fn insert_at_path(target: &mut Value, path: &str, value: Value) -> Result<(), String> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty() || *s == "*") {
        return Err(format!("invalid request path `{path}`"));
    }
    let mut current = target;
    for segment in &segments[..segments.len() - 1] {
        let map = current
            .as_object_mut()
            .ok_or_else(|| format!("`{segment}` is not an object"))?;
        current = map
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    let map = current
        .as_object_mut()
        .ok_or_else(|| "request body is not an object".to_string())?;
    map.insert(segments[segments.len() - 1].to_string(), value);
    Ok(())
}

/// Extract one vector per response item at a dot path; `*` maps over an
/// array. Without `*`, the terminal value must be an array of arrays.
fn extract_vectors(response: &Value, path: &str) -> Result<Vec<Vec<f64>>, String> {
    fn walk<'v>(value: &'v Value, segments: &[&str], out: &mut Vec<&'v Value>) -> Result<(), String> {
        match segments.split_first() {
            None => {
                out.push(value);
                Ok(())
            }
            Some((&"*", rest)) => {
                let array = value
                    .as_array()
                    .ok_or_else(|| "`*` applied to a non-array".to_string())?;
                for element in array {
                    walk(element, rest, out)?;
                }
                Ok(())
            }
            Some((segment, rest)) => {
                let next = value
                    .get(*segment)
                    .ok_or_else(|| format!("missing field `{segment}` in response"))?;
                walk(next, rest, out)
            }
        }
    }

    fn as_vector(value: &Value) -> Result<Vec<f64>, String> {
        let array = value
            .as_array()
            .ok_or_else(|| "vector value is not an array".to_string())?;
        array
            .iter()
            .map(|c| c.as_f64().ok_or_else(|| "non-numeric vector component".to_string()))
            .collect()
    }

    let segments: Vec<&str> = path.split('.').filter(|s| !s.is_empty()).collect();
    let mut terminals = Vec::new();
    walk(response, &segments, &mut terminals)?;

    if path.split('.').any(|s| s == "*") {
        terminals.iter().map(|v| as_vector(v)).collect()
    } else {
        // single terminal: an array of vectors
        let only = terminals
            .first()
            .ok_or_else(|| "empty response".to_string())?;
        let array = only
            .as_array()
            .ok_or_else(|| "terminal value is not an array of vectors".to_string())?;
        array.iter().map(as_vector).collect()
    }
}
