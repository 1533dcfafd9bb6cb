//! Concept-production datasets: parsing, validation, descriptive statistics.
//!
//! The canonical input is UTF-8, comma-delimited CSV with a header row and
//! columns `dataset,participant_id,group,concept,position,item`. Source
//! exports with other column names are mapped through a [`ColumnSchema`].

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{mean, sample_sd};

/// Identity of one concept stream: (dataset, participant, concept) is
/// unique; the group label rides along for downstream statistics.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StreamKey {
    pub dataset: String,
    pub participant: String,
    pub group: String,
    pub concept: String,
}

impl StreamKey {
    /// Identity without the group label, used for joins across backends.
    pub fn stream_id(&self) -> String {
        format!("{}\u{1f}{}\u{1f}{}", self.dataset, self.participant, self.concept)
    }
}

impl std::fmt::Display for StreamKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.dataset, self.participant, self.concept)
    }
}

/// One participant × concept ordered item list with its group label.
///
/// Items are position-indexed from 1 in input files; here `items[t]` is
/// the item at position `t + 1`. Item text is preserved verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptStream {
    pub key: StreamKey,
    pub items: Vec<String>,
}

impl ConceptStream {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total whitespace-token count over all items.
    pub fn word_count(&self) -> usize {
        self.items.iter().map(|i| i.split_whitespace().count()).sum()
    }
}

/// Maps the logical fields to the column names of a source export.
/// `dataset: None` means the file has no dataset column and the caller
/// supplies a constant dataset id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnSchema {
    pub dataset: Option<String>,
    pub participant: String,
    pub group: String,
    pub concept: String,
    pub position: String,
    pub item: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            dataset: Some("dataset".into()),
            participant: "participant_id".into(),
            group: "group".into(),
            concept: "concept".into(),
            position: "position".into(),
            item: "item".into(),
        }
    }
}

/// Per-dataset descriptive statistics: items ("properties") and
/// whitespace-token counts per (concept, participant) pair, as mean and
/// sample standard deviation (n−1 denominator).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub dataset_id: String,
    pub n_streams: usize,
    pub n_participants: usize,
    pub n_groups: usize,
    pub properties_mean: f64,
    pub properties_sd: f64,
    pub words_mean: f64,
    pub words_sd: f64,
    /// True when only one stream exists and the SDs default to 0.
    pub sd_degenerate: bool,
}

#[derive(Debug, Error)]
pub enum DatamodelError {
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("no dataset column in schema and no dataset id supplied")]
    MissingDatasetId,
    #[error("stream {stream}: positions not contiguous (expected {expected}, found {found})")]
    NonContiguousPositions {
        stream: String,
        expected: u64,
        found: u64,
    },
    #[error("stream {stream}: duplicate position {position} (line {line})")]
    DuplicatePosition {
        stream: String,
        position: u64,
        line: u64,
    },
    #[error("stream {stream}: empty item at line {line}")]
    EmptyItem { stream: String, line: u64 },
    #[error("invalid position `{value}` at line {line}")]
    InvalidPosition { value: String, line: u64 },
    #[error("stream {stream}: conflicting group labels `{a}` vs `{b}` (line {line})")]
    ConflictingGroup {
        stream: String,
        a: String,
        b: String,
        line: u64,
    },
    #[error("empty input: no data rows")]
    EmptyInput,
    #[error("streams span multiple datasets: `{a}` vs `{b}`")]
    MixedDatasets { a: String, b: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Parse a CSV export into validated concept streams.
///
/// Rows are grouped by (dataset, participant, concept) and sorted by
/// position; positions must be 1..N contiguous. Input row order is
/// irrelevant. Output is sorted by stream key.
pub fn parse_dataset<R: Read>(
    source: R,
    schema: &ColumnSchema,
    default_dataset: Option<&str>,
) -> Result<Vec<ConceptStream>, DatamodelError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(source);

    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, DatamodelError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatamodelError::MissingColumn(name.to_string()))
    };

    let dataset_col = match &schema.dataset {
        Some(name) => Some(col(name)?),
        None => {
            if default_dataset.is_none() {
                return Err(DatamodelError::MissingDatasetId);
            }
            None
        }
    };
    let participant_col = col(&schema.participant)?;
    let group_col = col(&schema.group)?;
    let concept_col = col(&schema.concept)?;
    let position_col = col(&schema.position)?;
    let item_col = col(&schema.item)?;

    // (dataset, participant, concept) -> (group, first line, rows)
    let mut groups: BTreeMap<(String, String, String), (String, u64, Vec<(u64, String, u64)>)> =
        BTreeMap::new();
    let mut saw_rows = false;

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        saw_rows = true;

        let field = |idx: usize| record.get(idx).unwrap_or("").to_string();
        let dataset = match dataset_col {
            Some(idx) => field(idx),
            None => default_dataset.unwrap_or("").to_string(),
        };
        let participant = field(participant_col);
        let group = field(group_col);
        let concept = field(concept_col);
        let item = field(item_col);
        let position_raw = field(position_col);

        let position: u64 =
            position_raw
                .trim()
                .parse()
                .map_err(|_| DatamodelError::InvalidPosition {
                    value: position_raw.clone(),
                    line,
                })?;

        let stream_name = format!("{dataset}/{participant}/{concept}");
        if item.trim().is_empty() {
            return Err(DatamodelError::EmptyItem {
                stream: stream_name,
                line,
            });
        }

        match groups.entry((dataset, participant, concept)) {
            Entry::Vacant(v) => {
                v.insert((group, line, vec![(position, item, line)]));
            }
            Entry::Occupied(mut o) => {
                let (existing_group, _, rows) = o.get_mut();
                if *existing_group != group {
                    return Err(DatamodelError::ConflictingGroup {
                        stream: stream_name,
                        a: existing_group.clone(),
                        b: group,
                        line,
                    });
                }
                rows.push((position, item, line));
            }
        }
    }

    if !saw_rows {
        return Err(DatamodelError::EmptyInput);
    }

    let mut streams = Vec::with_capacity(groups.len());
    for ((dataset, participant, concept), (group, _, mut rows)) in groups {
        let stream_name = format!("{dataset}/{participant}/{concept}");
        rows.sort_by_key(|(pos, _, _)| *pos);
        let mut items = Vec::with_capacity(rows.len());
        for (idx, (position, item, line)) in rows.into_iter().enumerate() {
            let expected = idx as u64 + 1;
            // after the sort a duplicate sits exactly one short of its slot
            if idx > 0 && position == expected - 1 {
                return Err(DatamodelError::DuplicatePosition {
                    stream: stream_name,
                    position,
                    line,
                });
            }
            if position != expected {
                return Err(DatamodelError::NonContiguousPositions {
                    stream: stream_name,
                    expected,
                    found: position,
                });
            }
            items.push(item);
        }
        streams.push(ConceptStream {
            key: StreamKey {
                dataset,
                participant,
                group,
                concept,
            },
            items,
        });
    }

    Ok(streams)
}

/// Descriptive statistics over the streams of one dataset.
///
/// Properties = items per stream; words = whitespace tokens per stream.
/// A single stream yields SDs of 0 with `sd_degenerate` set.
pub fn descriptive_stats(streams: &[ConceptStream]) -> Result<DatasetStats, DatamodelError> {
    if streams.is_empty() {
        return Err(DatamodelError::EmptyInput);
    }
    let dataset_id = streams[0].key.dataset.clone();
    if let Some(other) = streams.iter().find(|s| s.key.dataset != dataset_id) {
        return Err(DatamodelError::MixedDatasets {
            a: dataset_id,
            b: other.key.dataset.clone(),
        });
    }

    let properties: Vec<f64> = streams.iter().map(|s| s.len() as f64).collect();
    let words: Vec<f64> = streams.iter().map(|s| s.word_count() as f64).collect();
    let participants: BTreeSet<&str> =
        streams.iter().map(|s| s.key.participant.as_str()).collect();
    let groups: BTreeSet<&str> = streams.iter().map(|s| s.key.group.as_str()).collect();

    let degenerate = streams.len() < 2;
    Ok(DatasetStats {
        dataset_id,
        n_streams: streams.len(),
        n_participants: participants.len(),
        n_groups: groups.len(),
        properties_mean: mean(&properties).unwrap_or(0.0),
        properties_sd: sample_sd(&properties).unwrap_or(0.0),
        words_mean: mean(&words).unwrap_or(0.0),
        words_sd: sample_sd(&words).unwrap_or(0.0),
        sd_degenerate: degenerate,
    })
}

/// Write streams as canonical CSV (`dataset,participant_id,group,concept,position,item`).
pub fn write_canonical_csv<W: Write>(
    streams: &[ConceptStream],
    writer: W,
) -> Result<(), DatamodelError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dataset", "participant_id", "group", "concept", "position", "item"])?;
    for stream in streams {
        for (idx, item) in stream.items.iter().enumerate() {
            w.write_record([
                stream.key.dataset.as_str(),
                stream.key.participant.as_str(),
                stream.key.group.as_str(),
                stream.key.concept.as_str(),
                &(idx + 1).to_string(),
                item,
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Read canonical CSV written by [`write_canonical_csv`].
pub fn read_canonical_csv<R: Read>(source: R) -> Result<Vec<ConceptStream>, DatamodelError> {
    parse_dataset(source, &ColumnSchema::default(), None)
}
