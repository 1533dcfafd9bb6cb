//! `semnav metrics`: compute the five metrics for every stored
//! trajectory and emit the summary tables.

use std::collections::HashMap;

use anyhow::anyhow;

use semnav::embed::PrefixMode;
use semnav::metrics::{summarize, EntropyNormalization, MetricsConfig, MetricsError};

use crate::store::{
    read_all_trajectories, write_csv, write_json, MetricsRow, StepRow, TrajectoryRecord,
};
use crate::{Classify, CliError, CliResult, Ctx, MetricsArgs};

pub fn run(ctx: &mut Ctx, args: &MetricsArgs) -> CliResult<()> {
    let records = read_all_trajectories(&ctx.store).data_err()?;
    if records.is_empty() {
        return Err(CliError::Data(anyhow!(
            "no trajectories in {}; run `semnav embed` first",
            ctx.store.root().display()
        )));
    }

    let centroid_standalone = args.centroid_standalone || ctx.config.centroid_standalone;
    let nc_index: HashMap<(String, String, String, String), &TrajectoryRecord> = records
        .iter()
        .filter(|r| r.mode == PrefixMode::NonCumulative)
        .map(|r| {
            (
                (
                    r.dataset.clone(),
                    r.backend.clone(),
                    r.participant.clone(),
                    r.concept.clone(),
                ),
                r,
            )
        })
        .collect();

    let metrics_config = MetricsConfig {
        alpha: args.alpha.unwrap_or(ctx.config.alpha),
        entropy_normalization: if args.entropy_per_step || ctx.config.entropy_per_step {
            EntropyNormalization::PerValidStep
        } else {
            EntropyNormalization::Raw
        },
        apen_m: 2,
        apen_enabled: args.apen || ctx.config.apen,
    };

    let mut rows = Vec::with_capacity(records.len());
    let mut step_rows = Vec::new();
    let mut skipped = 0usize;

    for record in &records {
        let trajectory = record.to_trajectory();

        let centroid_source = if centroid_standalone && record.mode == PrefixMode::Cumulative {
            let key = (
                record.dataset.clone(),
                record.backend.clone(),
                record.participant.clone(),
                record.concept.clone(),
            );
            match nc_index.get(&key) {
                Some(nc) => Some(nc.to_trajectory()),
                None => {
                    return Err(CliError::Data(anyhow!(
                        "centroid_standalone: no non-cumulative trajectory for {}/{}/{}/{} \
                         (embed with --mode non-cumulative first)",
                        record.dataset,
                        record.backend,
                        record.participant,
                        record.concept
                    )))
                }
            }
        } else {
            None
        };

        match summarize(
            &trajectory,
            &record.items,
            centroid_source.as_ref(),
            &metrics_config,
        ) {
            Ok(metrics) => {
                if args.per_step {
                    push_step_rows(&mut step_rows, record, &metrics, &ctx.config_hash);
                }
                rows.push(MetricsRow::new(&metrics, &ctx.config_hash));
            }
            Err(MetricsError::EmptySet) => {
                log::warn!(
                    "skipping {}/{}/{}/{}: no embedded items (all out of vocabulary)",
                    record.dataset,
                    record.backend,
                    record.participant,
                    record.concept
                );
                skipped += 1;
            }
            Err(other) => {
                return Err(CliError::Data(anyhow!(
                    "metrics failed for {}/{}/{}/{}: {other}",
                    record.dataset,
                    record.backend,
                    record.participant,
                    record.concept
                )))
            }
        }
    }

    write_csv(&ctx.store.file("metrics.csv"), &rows).data_err()?;
    write_json(&ctx.store.file("metrics.json"), &rows).data_err()?;
    if args.per_step {
        write_csv(&ctx.store.file("metrics_steps.csv"), &step_rows).data_err()?;
    }

    println!(
        "metrics: {} trajectories summarized ({} skipped) -> {}",
        rows.len(),
        skipped,
        ctx.store.file("metrics.csv").display()
    );
    Ok(())
}

fn push_step_rows(
    out: &mut Vec<StepRow>,
    record: &TrajectoryRecord,
    metrics: &semnav::TrajectoryMetrics64,
    config_hash: &str,
) {
    let mut push = |metric: &str, values: &[f64], valid: &[bool]| {
        for (idx, (value, ok)) in values.iter().zip(valid).enumerate() {
            out.push(StepRow {
                dataset: record.dataset.clone(),
                participant: record.participant.clone(),
                group: record.group.clone(),
                concept: record.concept.clone(),
                backend: record.backend.clone(),
                mode: record.mode.as_str().to_string(),
                metric: metric.to_string(),
                index: idx + 1,
                value: ok.then_some(*value),
                valid: *ok,
                config_hash: config_hash.to_string(),
            });
        }
    };
    push("dist_next", &metrics.dist_next.values, &metrics.dist_next.valid);
    push(
        "velocity",
        &metrics.velocity_mag.values,
        &metrics.velocity_mag.valid,
    );
    push(
        "acceleration",
        &metrics.accel_mag.values,
        &metrics.accel_mag.valid,
    );
    push(
        "dist_centroid",
        &metrics.dist_centroid.values,
        &metrics.dist_centroid.valid,
    );
}
