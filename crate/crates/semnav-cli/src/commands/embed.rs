//! `semnav embed`: map stored datasets to embedded trajectories through
//! the configured backends and the persistent cache.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context};

use semnav::datamodel::{read_canonical_csv, ConceptStream};
use semnav::embed::{
    build_prefixes, embed_stream, embed_texts, parse_vector_table, BackendDecl, BackendRef,
    EmbedReport, EmbeddedTrajectory, EmbeddingCache, PrefixMode, RemoteBackend, TextEmbedder,
};
use semnav::VectorTable64;

use crate::store::{write_trajectories, TrajectoryRecord};
use crate::{Classify, CliError, CliResult, Ctx, EmbedArgs};

enum LoadedBackend {
    Remote(Box<RemoteBackend>),
    Static { id: String, table: VectorTable64 },
}

impl LoadedBackend {
    fn id(&self) -> &str {
        match self {
            LoadedBackend::Remote(b) => b.backend_id(),
            LoadedBackend::Static { id, .. } => id,
        }
    }
}

pub fn run(ctx: &mut Ctx, args: &EmbedArgs) -> CliResult<()> {
    let datasets = select_datasets(ctx, args.dataset.as_deref())?;
    let decls = select_backends(ctx, args.backend.as_deref())?;
    let modes: Vec<PrefixMode> = match &args.mode {
        Some(text) => vec![PrefixMode::from_str(text).map_err(|e| CliError::Usage(anyhow!(e)))?],
        None => ctx.config.prefix_modes.clone(),
    };

    let mut cache = EmbeddingCache::open(&ctx.config.cache_path).data_err()?;
    let backends: Vec<LoadedBackend> = decls
        .iter()
        .map(|decl| load_backend(decl))
        .collect::<CliResult<_>>()?;

    for (dataset_id, streams) in &datasets {
        for backend in &backends {
            for mode in &modes {
                let (records, report, gaps) =
                    embed_scope(streams, backend, *mode, &mut cache).data_err()?;
                let out = ctx.store.trajectory_file(dataset_id, backend.id(), *mode);
                write_trajectories(&out, &records).data_err()?;
                ctx.manifest.backends.insert(backend.id().to_string());
                ctx.manifest.prefix_modes.insert(mode.as_str().to_string());
                log::info!(
                    "embedded {}/{}/{}: {} trajectories, {} cache hits, {} fetched, {} requests, {} missing steps",
                    dataset_id,
                    backend.id(),
                    mode,
                    records.len(),
                    report.cache_hits,
                    report.fetched,
                    report.requests,
                    gaps
                );
            }
        }
    }
    Ok(())
}

fn select_datasets(
    ctx: &Ctx,
    filter: Option<&str>,
) -> CliResult<Vec<(String, Vec<ConceptStream>)>> {
    let dir = ctx.store.dataset_dir();
    if !dir.exists() {
        return Err(CliError::Data(anyhow!(
            "no datasets stored in {}; run `semnav ingest` first",
            ctx.store.root().display()
        )));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .data_err()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();

    let mut datasets = Vec::new();
    for path in paths {
        let file = File::open(&path).data_err()?;
        let streams = read_canonical_csv(file)
            .with_context(|| format!("stored dataset {}", path.display()))
            .data_err()?;
        let id = streams[0].key.dataset.clone();
        if filter.is_none_or(|f| f == id) {
            datasets.push((id, streams));
        }
    }
    if datasets.is_empty() {
        return Err(CliError::Data(anyhow!(
            "dataset `{}` is not stored in this run; run `semnav ingest` first",
            filter.unwrap_or("<any>")
        )));
    }
    Ok(datasets)
}

fn select_backends(ctx: &Ctx, flag: Option<&str>) -> CliResult<Vec<BackendDecl>> {
    match flag {
        Some(spec) => {
            if let Some(path) = spec.strip_prefix("static:") {
                return Ok(vec![BackendDecl::StaticTable {
                    backend_id: spec.to_string(),
                    path: PathBuf::from(path),
                    dimension: None,
                }]);
            }
            match ctx.config.backend(spec) {
                Some(decl) => Ok(vec![decl.clone()]),
                None => Err(CliError::Usage(anyhow!(
                    "unknown backend id `{spec}` (not declared in the config)"
                ))),
            }
        }
        None => {
            if ctx.config.backends.is_empty() {
                return Err(CliError::Usage(anyhow!(
                    "no backends configured; declare them in the config or pass --backend"
                )));
            }
            Ok(ctx.config.backends.clone())
        }
    }
}

fn load_backend(decl: &BackendDecl) -> CliResult<LoadedBackend> {
    match decl {
        BackendDecl::RemoteApi(config) => {
            let backend = RemoteBackend::new(config.clone()).usage_err()?;
            Ok(LoadedBackend::Remote(Box::new(backend)))
        }
        BackendDecl::StaticTable {
            backend_id,
            path,
            dimension,
        } => {
            let table = load_table(path)?;
            if let Some(expected) = dimension {
                if table.dimension() != *expected {
                    return Err(CliError::Usage(anyhow!(
                        "backend `{backend_id}`: config declares dimension {expected}, table {} has {}",
                        path.display(),
                        table.dimension()
                    )));
                }
            }
            Ok(LoadedBackend::Static {
                id: backend_id.clone(),
                table,
            })
        }
    }
}

fn load_table(path: &Path) -> CliResult<VectorTable64> {
    let file = File::open(path)
        .with_context(|| format!("cannot open vector table {}", path.display()))
        .data_err()?;
    let load = parse_vector_table(file)
        .with_context(|| format!("vector table {}", path.display()))
        .data_err()?;
    for warning in &load.warnings {
        log::warn!("{}: {}", path.display(), warning);
    }
    Ok(load.table)
}

/// Embed every stream of a dataset under one backend and mode. Remote
/// texts are gathered across streams so batching spans the whole scope.
fn embed_scope(
    streams: &[ConceptStream],
    backend: &LoadedBackend,
    mode: PrefixMode,
    cache: &mut EmbeddingCache,
) -> anyhow::Result<(Vec<TrajectoryRecord>, EmbedReport, usize)> {
    let mut records = Vec::with_capacity(streams.len());
    let mut report = EmbedReport::default();
    let mut gaps = 0usize;

    match backend {
        LoadedBackend::Remote(embedder) => {
            let per_stream: Vec<Vec<String>> = streams
                .iter()
                .map(|s| build_prefixes(s, mode))
                .collect();
            let all_texts: Vec<String> = per_stream.iter().flatten().cloned().collect();
            let (vectors, scope_report) = embed_texts(embedder.as_ref(), &all_texts, cache)?;
            report = scope_report;

            let mut cursor = 0usize;
            for (stream, texts) in streams.iter().zip(&per_stream) {
                let points: Vec<Option<Vec<f64>>> = vectors[cursor..cursor + texts.len()]
                    .iter()
                    .cloned()
                    .map(Some)
                    .collect();
                cursor += texts.len();
                let trajectory = EmbeddedTrajectory {
                    key: stream.key.clone(),
                    backend_id: embedder.backend_id().to_string(),
                    prefix_mode: mode,
                    dimension: embedder.dimension(),
                    points,
                };
                trajectory.validate()?;
                records.push(TrajectoryRecord::from_trajectory(&trajectory, &stream.items));
            }
        }
        LoadedBackend::Static { id, table } => {
            for stream in streams {
                let trajectory = embed_stream(
                    stream,
                    &BackendRef::Static {
                        backend_id: id,
                        table,
                    },
                    mode,
                    cache,
                )?;
                gaps += trajectory.n_items() - trajectory.n_present();
                records.push(TrajectoryRecord::from_trajectory(&trajectory, &stream.items));
            }
        }
    }

    Ok((records, report, gaps))
}
