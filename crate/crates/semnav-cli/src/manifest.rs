//! Run manifest: provenance record living at the root of every run
//! directory. Output files reference the manifest's config hash.

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use semnav::whiten::IsotropyDiagnostics;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub created_at: String,
    pub updated_at: String,
    pub datasets: BTreeSet<String>,
    pub backends: BTreeSet<String>,
    pub prefix_modes: BTreeSet<String>,
    #[serde(default)]
    pub whitening: Option<WhiteningSection>,
    #[serde(default)]
    pub commands: Vec<CommandRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WhiteningSection {
    pub eps: f64,
    pub scopes: Vec<IsotropyRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsotropyRecord {
    pub dataset: String,
    pub backend: String,
    pub mode: String,
    pub diagnostics: IsotropyDiagnostics<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRecord {
    pub command: String,
    pub at: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl RunManifest {
    pub fn path(run_dir: &Path) -> std::path::PathBuf {
        run_dir.join("manifest.json")
    }

    /// Load the manifest of a run directory, or create a fresh one for
    /// the given config hash. A hash mismatch (run dir reused for a
    /// different config) is an error.
    pub fn load_or_create(run_dir: &Path, config_hash: &str, tool_version: &str) -> Result<Self> {
        let path = Self::path(run_dir);
        if path.exists() {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let manifest: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("invalid manifest {}", path.display()))?;
            if manifest.config_hash != config_hash {
                anyhow::bail!(
                    "run directory {} belongs to config {} (current config is {})",
                    run_dir.display(),
                    &manifest.config_hash[..12.min(manifest.config_hash.len())],
                    &config_hash[..12]
                );
            }
            return Ok(manifest);
        }
        Ok(RunManifest {
            config_hash: config_hash.to_string(),
            tool_version: tool_version.to_string(),
            created_at: now(),
            updated_at: now(),
            datasets: BTreeSet::new(),
            backends: BTreeSet::new(),
            prefix_modes: BTreeSet::new(),
            whitening: None,
            commands: Vec::new(),
        })
    }

    pub fn record_command(&mut self, command: &str) {
        self.commands.push(CommandRecord {
            command: command.to_string(),
            at: now(),
        });
        self.updated_at = now();
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(run_dir)
            .with_context(|| format!("cannot create {}", run_dir.display()))?;
        let path = Self::path(run_dir);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
