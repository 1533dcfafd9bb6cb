//! Run-directory layout and the tabular/file formats the pipeline emits.
//!
//! Layout under `runs/<config-hash>/`:
//!   datasets/<id>.csv             canonical validated streams
//!   dataset_stats.{csv,json}      descriptive statistics
//!   trajectories/<scope>.jsonl    one trajectory record per line
//!   whitening/<scope>.json        fitted ZCA transforms
//!   metrics.{csv,json}            per-trajectory scalar summaries
//!   metrics_steps.csv             optional long-format per-step values
//!   comparisons.{csv,json}        Welch pairwise tests
//!   comparison_summary.{csv,json} Table-style significance counts
//!   correlations.json             cross-backend correlation matrices
//!   correlations_<dataset>.csv    one matrix per dataset
//!   manifest.json                 run provenance

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use semnav::datamodel::{DatasetStats, StreamKey};
use semnav::embed::{EmbeddedTrajectory, PrefixMode};
use semnav::metrics::TrajectoryMetrics;

pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dataset_csv(&self, dataset_id: &str) -> PathBuf {
        self.root
            .join("datasets")
            .join(format!("{}.csv", sanitize(dataset_id)))
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn trajectories_dir(&self) -> PathBuf {
        self.root.join("trajectories")
    }

    pub fn trajectory_file(&self, dataset: &str, backend: &str, mode: PrefixMode) -> PathBuf {
        self.trajectories_dir().join(format!(
            "{}__{}__{}.jsonl",
            sanitize(dataset),
            sanitize(backend),
            mode.as_str()
        ))
    }

    pub fn whitening_file(&self, dataset: &str, backend: &str, mode: PrefixMode) -> PathBuf {
        self.root.join("whitening").join(format!(
            "{}__{}__{}.json",
            sanitize(dataset),
            sanitize(backend),
            mode.as_str()
        ))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

/// Filesystem-safe scope names; record fields stay authoritative.
pub fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// One stored trajectory: the embedded points plus the item texts, so
/// downstream stages need no join against the dataset files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub dataset: String,
    pub participant: String,
    pub group: String,
    pub concept: String,
    pub backend: String,
    pub mode: PrefixMode,
    pub dim: usize,
    pub items: Vec<String>,
    pub points: Vec<Option<Vec<f64>>>,
}

impl TrajectoryRecord {
    pub fn from_trajectory(trajectory: &EmbeddedTrajectory<f64>, items: &[String]) -> Self {
        Self {
            dataset: trajectory.key.dataset.clone(),
            participant: trajectory.key.participant.clone(),
            group: trajectory.key.group.clone(),
            concept: trajectory.key.concept.clone(),
            backend: trajectory.backend_id.clone(),
            mode: trajectory.prefix_mode,
            dim: trajectory.dimension,
            items: items.to_vec(),
            points: trajectory.points.clone(),
        }
    }

    pub fn key(&self) -> StreamKey {
        StreamKey {
            dataset: self.dataset.clone(),
            participant: self.participant.clone(),
            group: self.group.clone(),
            concept: self.concept.clone(),
        }
    }

    pub fn to_trajectory(&self) -> EmbeddedTrajectory<f64> {
        EmbeddedTrajectory {
            key: self.key(),
            backend_id: self.backend.clone(),
            prefix_mode: self.mode,
            dimension: self.dim,
            points: self.points.clone(),
        }
    }
}

pub fn write_trajectories(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    );
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_trajectories(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    );
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrajectoryRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}: bad record at line {}", path.display(), idx + 1))?;
        records.push(record);
    }
    Ok(records)
}

/// All trajectory records in the run, sorted by (dataset, backend, mode,
/// participant, concept).
pub fn read_all_trajectories(store: &RunStore) -> Result<Vec<TrajectoryRecord>> {
    let dir = store.trajectories_dir();
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    let mut records = Vec::new();
    for path in paths {
        records.extend(read_trajectories(&path)?);
    }
    records.sort_by(|a, b| {
        (
            &a.dataset,
            &a.backend,
            a.mode.as_str(),
            &a.participant,
            &a.concept,
        )
            .cmp(&(
                &b.dataset,
                &b.backend,
                b.mode.as_str(),
                &b.participant,
                &b.concept,
            ))
    });
    Ok(records)
}

/// Dataset statistics row as emitted to dataset_stats.{csv,json}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetStatsRow {
    pub dataset: String,
    pub n_streams: usize,
    pub n_participants: usize,
    pub n_groups: usize,
    pub properties_mean: f64,
    pub properties_sd: f64,
    pub words_mean: f64,
    pub words_sd: f64,
    pub sd_degenerate: bool,
    pub config_hash: String,
}

impl DatasetStatsRow {
    pub fn new(stats: &DatasetStats, config_hash: &str) -> Self {
        Self {
            dataset: stats.dataset_id.clone(),
            n_streams: stats.n_streams,
            n_participants: stats.n_participants,
            n_groups: stats.n_groups,
            properties_mean: stats.properties_mean,
            properties_sd: stats.properties_sd,
            words_mean: stats.words_mean,
            words_sd: stats.words_sd,
            sd_degenerate: stats.sd_degenerate,
            config_hash: config_hash.to_string(),
        }
    }
}

/// Per-trajectory scalar summaries as emitted to metrics.{csv,json}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub participant: String,
    pub group: String,
    pub concept: String,
    pub backend: String,
    pub mode: String,
    pub n_items: usize,
    pub n_present: usize,
    pub alpha: f64,
    pub dist_next_mean: Option<f64>,
    pub entropy: Option<f64>,
    pub velocity_mean: Option<f64>,
    pub accel_mean: Option<f64>,
    pub dist_centroid_mean: Option<f64>,
    pub apen: Option<f64>,
    pub config_hash: String,
}

impl MetricsRow {
    pub fn new(metrics: &TrajectoryMetrics<f64>, config_hash: &str) -> Self {
        Self {
            dataset: metrics.key.dataset.clone(),
            participant: metrics.key.participant.clone(),
            group: metrics.key.group.clone(),
            concept: metrics.key.concept.clone(),
            backend: metrics.backend_id.clone(),
            mode: metrics.prefix_mode.as_str().to_string(),
            n_items: metrics.n_items,
            n_present: metrics.n_present,
            alpha: metrics.alpha,
            dist_next_mean: metrics.dist_next_mean,
            entropy: metrics.entropy,
            velocity_mean: metrics.velocity_mean,
            accel_mean: metrics.accel_mean,
            dist_centroid_mean: metrics.dist_centroid_mean,
            apen: metrics.approx_entropy,
            config_hash: config_hash.to_string(),
        }
    }
}

/// Long-format per-step export row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRow {
    pub dataset: String,
    pub participant: String,
    pub group: String,
    pub concept: String,
    pub backend: String,
    pub mode: String,
    pub metric: String,
    /// 1-based step (or item, for dist_centroid) index.
    pub index: usize,
    pub value: Option<f64>,
    pub valid: bool,
    pub config_hash: String,
}

/// One Welch comparison as emitted to comparisons.{csv,json}. `method`
/// stamps the departure from the source analysis (Welch + Holm instead
/// of a mixed-effects model with Tukey HSD).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub backend: String,
    pub mode: String,
    pub metric: String,
    pub group_a: String,
    pub group_b: String,
    pub n_a: usize,
    pub n_b: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub cohens_d: Option<f64>,
    pub weight: u8,
    pub n_dropped_a: usize,
    pub n_dropped_b: usize,
    pub method: String,
    pub config_hash: String,
}

/// Table-style summary per (dataset, backend, mode).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub backend: String,
    pub mode: String,
    pub n_pairs: usize,
    pub n_significant_pairs: usize,
    pub weighted_count: u32,
    pub mean_abs_d: Option<f64>,
    pub n_d_undefined: usize,
    pub method: String,
    pub config_hash: String,
}

pub const METHOD_STAMP: &str = "welch_t+holm (departure: GLMM+TukeyHSD in the source analysis)";

pub fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<S: DeserializeOwned>(path: &Path) -> Result<Vec<S>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}
