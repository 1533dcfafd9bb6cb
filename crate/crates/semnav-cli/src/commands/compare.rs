//! `semnav compare`: Welch pairwise tests per (dataset, backend, mode,
//! metric) over the trajectory summaries, Holm-adjusted per metric, and
//! Table-style significance-count summaries per (dataset, backend, mode).

use std::collections::BTreeMap;

use anyhow::anyhow;

use semnav::stats::{
    comparison_summary, welch_pairwise_with_missing, ComparisonResult, StatsError, METRIC_NAMES,
};

use crate::store::{read_csv, write_csv, write_json, ComparisonRow, MetricsRow, SummaryRow, METHOD_STAMP};
use crate::{Classify, CliError, CliResult, CompareArgs, Ctx};

pub fn run(ctx: &mut Ctx, args: &CompareArgs) -> CliResult<()> {
    let metrics_path = ctx.store.file("metrics.csv");
    if !metrics_path.exists() {
        return Err(CliError::Data(anyhow!(
            "{} not found; run `semnav metrics` first",
            metrics_path.display()
        )));
    }
    let rows: Vec<MetricsRow> = read_csv(&metrics_path).data_err()?;
    let rows: Vec<&MetricsRow> = rows
        .iter()
        .filter(|r| args.dataset.as_deref().is_none_or(|d| d == r.dataset))
        .collect();
    if rows.is_empty() {
        return Err(CliError::Data(anyhow!("no metric rows to compare")));
    }

    let mut scopes: BTreeMap<(String, String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for row in rows {
        scopes
            .entry((row.dataset.clone(), row.backend.clone(), row.mode.clone()))
            .or_default()
            .push(row);
    }

    let mut comparison_rows: Vec<ComparisonRow> = Vec::new();
    let mut summary_rows: Vec<SummaryRow> = Vec::new();

    for ((dataset, backend, mode), scope_rows) in &scopes {
        let mut scope_results: Vec<ComparisonResult<f64>> = Vec::new();

        for metric in METRIC_NAMES {
            let mut groups: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
            for row in scope_rows {
                groups
                    .entry(row.group.clone())
                    .or_default()
                    .push(metric_value(row, metric));
            }
            match welch_pairwise_with_missing(metric, &groups) {
                Ok(results) => scope_results.extend(results),
                Err(StatsError::NotEnoughGroups { found }) => {
                    log::warn!(
                        "{dataset}/{backend}/{mode}: only {found} group(s); skipping comparisons"
                    );
                    break;
                }
                Err(StatsError::DegenerateGroup { group, n }) => {
                    log::warn!(
                        "{dataset}/{backend}/{mode}/{metric}: group `{group}` has {n} usable value(s); skipped"
                    );
                }
                Err(other) => return Err(CliError::Data(anyhow!(other))),
            }
        }

        if scope_results.is_empty() {
            continue;
        }

        let summary = comparison_summary(&scope_results).data_err()?;
        summary_rows.push(SummaryRow {
            dataset: dataset.clone(),
            backend: backend.clone(),
            mode: mode.clone(),
            n_pairs: summary.n_pairs,
            n_significant_pairs: summary.n_significant,
            weighted_count: summary.weighted_count,
            mean_abs_d: summary.mean_abs_d,
            n_d_undefined: summary.n_d_undefined,
            method: METHOD_STAMP.to_string(),
            config_hash: ctx.config_hash.clone(),
        });

        for result in scope_results {
            comparison_rows.push(ComparisonRow {
                dataset: dataset.clone(),
                backend: backend.clone(),
                mode: mode.clone(),
                metric: result.metric,
                group_a: result.group_a,
                group_b: result.group_b,
                n_a: result.n_a,
                n_b: result.n_b,
                mean_a: result.mean_a,
                mean_b: result.mean_b,
                t_statistic: result.t_statistic,
                degrees_of_freedom: result.degrees_of_freedom,
                p_raw: result.p_raw,
                p_adjusted: result.p_adjusted,
                cohens_d: result.cohens_d,
                weight: result.weight,
                n_dropped_a: result.n_dropped_a,
                n_dropped_b: result.n_dropped_b,
                method: METHOD_STAMP.to_string(),
                config_hash: ctx.config_hash.clone(),
            });
        }
    }

    if comparison_rows.is_empty() {
        return Err(CliError::Data(anyhow!(
            "no comparable scope: need at least 2 groups with 2 usable values each"
        )));
    }

    write_csv(&ctx.store.file("comparisons.csv"), &comparison_rows).data_err()?;
    write_json(&ctx.store.file("comparisons.json"), &comparison_rows).data_err()?;
    write_csv(&ctx.store.file("comparison_summary.csv"), &summary_rows).data_err()?;
    write_json(&ctx.store.file("comparison_summary.json"), &summary_rows).data_err()?;

    println!(
        "{:<16} {:<24} {:<15} {:>7} {:>9} {:>8}",
        "dataset", "backend", "mode", "pairs", "weighted", "mean|d|"
    );
    for s in &summary_rows {
        println!(
            "{:<16} {:<24} {:<15} {:>7} {:>9} {:>8}",
            s.dataset,
            s.backend,
            s.mode,
            format!("{}/{}", s.n_significant_pairs, s.n_pairs),
            s.weighted_count,
            s.mean_abs_d
                .map(|d| format!("{d:.3}"))
                .unwrap_or_else(|| "-".into()),
        );
    }
    Ok(())
}

fn metric_value(row: &MetricsRow, metric: &str) -> Option<f64> {
    match metric {
        "dist_next" => row.dist_next_mean,
        "entropy" => row.entropy,
        "velocity" => row.velocity_mean,
        "acceleration" => row.accel_mean,
        "dist_centroid" => row.dist_centroid_mean,
        _ => None,
    }
}
