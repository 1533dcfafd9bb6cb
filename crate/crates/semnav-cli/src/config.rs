//! Pipeline configuration: one JSON file declaring datasets, backends,
//! prefix modes, and analysis options. The run directory is keyed by the
//! hash of the canonicalized configuration, so a given configuration
//! always maps to the same run.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semnav::datamodel::ColumnSchema;
use semnav::embed::{BackendDecl, PrefixMode};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub datasets: Vec<DatasetDecl>,
    pub backends: Vec<BackendDecl>,
    pub prefix_modes: Vec<PrefixMode>,
    pub cache_path: PathBuf,
    pub runs_root: PathBuf,
    pub alpha: f64,
    pub whitening: WhiteningOptions,
    /// Report the binarized entropy divided by the valid-step count.
    pub entropy_per_step: bool,
    /// Use non-cumulative embeddings for the centroid metric.
    pub centroid_standalone: bool,
    /// Also compute approximate entropy (m = 2, r = 0.2·SD).
    pub apen: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            datasets: Vec::new(),
            backends: Vec::new(),
            prefix_modes: vec![PrefixMode::Cumulative],
            cache_path: PathBuf::from("cache/embeddings.jsonl"),
            runs_root: PathBuf::from("runs"),
            alpha: 1.0,
            whitening: WhiteningOptions::default(),
            entropy_per_step: false,
            centroid_standalone: false,
            apen: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WhiteningOptions {
    pub eps: f64,
}

impl Default for WhiteningOptions {
    fn default() -> Self {
        Self { eps: 1e-5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDecl {
    pub id: String,
    pub path: PathBuf,
    /// Column mapping for this export; canonical names when omitted.
    #[serde(default)]
    pub schema: Option<ColumnSchema>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let config: Config = serde_json::from_str(&text)
            .with_context(|| format!("invalid config file {}", path.display()))?;
        Ok(config)
    }

    /// Hash of the canonical serialized configuration; identifies the run.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    /// The run directory for this configuration under `runs_root`, unless
    /// overridden.
    pub fn run_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(dir) => dir.to_path_buf(),
            None => self.runs_root.join(self.short_hash()),
        }
    }

    pub fn backend(&self, id: &str) -> Option<&BackendDecl> {
        self.backends.iter().find(|b| b.backend_id() == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = Config::default();
        let b = Config::default();
        assert_eq!(a.hash(), b.hash());

        let mut c = Config::default();
        c.alpha = 2.0;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn config_parses_minimal_json() {
        let json = r#"{
            "datasets": [{"id": "toy", "path": "toy.csv"}],
            "backends": [
                {"kind": "static_table", "backend_id": "static:vec", "path": "vec.txt"}
            ]
        }"#;
        let config: Config = serde_json::from_str(json).unwrap();
        assert_eq!(config.datasets.len(), 1);
        assert_eq!(config.prefix_modes, vec![PrefixMode::Cumulative]);
        assert_eq!(config.backend("static:vec").map(|b| b.backend_id()), Some("static:vec"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let json = r#"{"no_such_option": true}"#;
        assert!(serde_json::from_str::<Config>(json).is_err());
    }
}
