//! `semnav ingest`: parse and validate exports, store canonical CSVs,
//! and report per-dataset descriptive statistics.

use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use semnav::datamodel::{
    descriptive_stats, parse_dataset, read_canonical_csv, write_canonical_csv, ColumnSchema,
    ConceptStream, DatasetStats,
};

use crate::store::{write_csv, write_json, DatasetStatsRow};
use crate::{Classify, CliError, CliResult, Ctx, IngestArgs};

struct Target {
    id: String,
    path: PathBuf,
    schema: ColumnSchema,
}

pub fn run(ctx: &mut Ctx, args: &IngestArgs) -> CliResult<()> {
    let mut targets = Vec::new();

    for decl in &ctx.config.datasets {
        if let Some(filter) = &args.dataset {
            if &decl.id != filter {
                continue;
            }
        }
        targets.push(Target {
            id: decl.id.clone(),
            path: decl.path.clone(),
            schema: decl.schema.clone().unwrap_or_default(),
        });
    }
    if let Some(filter) = &args.dataset {
        if targets.is_empty() {
            return Err(CliError::Usage(anyhow!(
                "dataset `{filter}` is not declared in the config"
            )));
        }
    }

    let adhoc_schema = match &args.schema {
        Some(path) => load_schema(path)?,
        None => ColumnSchema::default(),
    };
    for file in &args.files {
        let id = match &args.dataset_id {
            Some(id) => id.clone(),
            None => file
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .ok_or_else(|| CliError::Usage(anyhow!("cannot derive a dataset id from {}", file.display())))?,
        };
        targets.push(Target {
            id,
            path: file.clone(),
            schema: adhoc_schema.clone(),
        });
    }

    if targets.is_empty() {
        return Err(CliError::Usage(anyhow!(
            "nothing to ingest: no datasets configured and no files given"
        )));
    }

    for target in &targets {
        let file = File::open(&target.path)
            .with_context(|| format!("cannot open dataset file {}", target.path.display()))
            .data_err()?;
        let streams = parse_dataset(file, &target.schema, Some(&target.id))
            .with_context(|| format!("dataset `{}` ({})", target.id, target.path.display()))
            .data_err()?;

        let out = ctx.store.dataset_csv(&target.id);
        std::fs::create_dir_all(ctx.store.dataset_dir()).data_err()?;
        let writer = File::create(&out)
            .with_context(|| format!("cannot create {}", out.display()))
            .data_err()?;
        write_canonical_csv(&streams, writer).data_err()?;
        ctx.manifest.datasets.insert(target.id.clone());
        log::info!(
            "ingested dataset `{}`: {} streams -> {}",
            target.id,
            streams.len(),
            out.display()
        );
    }

    // rebuild statistics over every dataset stored in the run
    let all_stats = stats_for_store(ctx)?;
    let rows: Vec<DatasetStatsRow> = all_stats
        .iter()
        .map(|s| DatasetStatsRow::new(s, &ctx.config_hash))
        .collect();
    write_csv(&ctx.store.file("dataset_stats.csv"), &rows).data_err()?;
    write_json(&ctx.store.file("dataset_stats.json"), &rows).data_err()?;

    print_stats_table(&all_stats);
    Ok(())
}

fn load_schema(path: &Path) -> CliResult<ColumnSchema> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read schema file {}", path.display()))
        .usage_err()?;
    serde_json::from_str(&text)
        .with_context(|| format!("invalid schema file {}", path.display()))
        .usage_err()
}

fn stats_for_store(ctx: &Ctx) -> CliResult<Vec<DatasetStats>> {
    let dir = ctx.store.dataset_dir();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .with_context(|| format!("cannot list {}", dir.display()))
        .data_err()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();

    let mut stats = Vec::new();
    for path in paths {
        let file = File::open(&path).data_err()?;
        let streams: Vec<ConceptStream> = read_canonical_csv(file)
            .with_context(|| format!("stored dataset {}", path.display()))
            .data_err()?;
        stats.push(descriptive_stats(&streams).data_err()?);
    }
    Ok(stats)
}

fn print_stats_table(stats: &[DatasetStats]) {
    println!(
        "{:<20} {:>8} {:>13} {:>7} {:>18} {:>18}",
        "dataset", "streams", "participants", "groups", "properties", "words"
    );
    for s in stats {
        println!(
            "{:<20} {:>8} {:>13} {:>7} {:>10.2} ± {:<5.2} {:>10.2} ± {:<5.2}",
            s.dataset_id,
            s.n_streams,
            s.n_participants,
            s.n_groups,
            s.properties_mean,
            s.properties_sd,
            s.words_mean,
            s.words_sd,
        );
    }
}
