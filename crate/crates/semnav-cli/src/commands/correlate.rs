//! `semnav correlate`: per-dataset Pearson matrices across (metric,
//! backend) axes, aligned on (participant, concept) stream keys.

use std::collections::BTreeMap;

use anyhow::anyhow;
use serde::Serialize;

use semnav::stats::{cross_model_matrix, CorrelationMatrix, SummaryPoint};

use crate::store::{read_csv, write_json, MetricsRow};
use crate::{Classify, CliError, CliResult, CorrelateArgs, Ctx};

#[derive(Serialize)]
struct CorrelationsFile {
    config_hash: String,
    method: &'static str,
    datasets: Vec<DatasetMatrix>,
}

#[derive(Serialize)]
struct DatasetMatrix {
    dataset: String,
    #[serde(flatten)]
    matrix: CorrelationMatrix<f64>,
}

pub fn run(ctx: &mut Ctx, args: &CorrelateArgs) -> CliResult<()> {
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
        return Err(CliError::Data(anyhow!("no metric rows to correlate")));
    }

    // backend axis: one per (backend, mode); non-cumulative variants are
    // suffixed like the source tables
    let axis_of = |row: &MetricsRow| -> String {
        if row.mode == "non_cumulative" {
            format!("{} (nc)", row.backend)
        } else {
            row.backend.clone()
        }
    };

    if !args.backends.is_empty() {
        for wanted in &args.backends {
            if !rows.iter().any(|r| &r.backend == wanted) {
                return Err(CliError::Data(anyhow!(
                    "insufficient overlap: backend `{wanted}` has no metric rows in this run"
                )));
            }
        }
    }

    let keep = |row: &MetricsRow| -> bool {
        args.backends.is_empty() || args.backends.iter().any(|b| b == &row.backend)
    };

    let mut datasets: BTreeMap<String, BTreeMap<String, BTreeMap<String, SummaryPoint<f64>>>> =
        BTreeMap::new();
    for row in rows.iter().filter(|r| keep(r)) {
        let stream_id = format!("{}\u{1f}{}", row.participant, row.concept);
        datasets
            .entry(row.dataset.clone())
            .or_default()
            .entry(axis_of(row))
            .or_default()
            .insert(
                stream_id,
                SummaryPoint {
                    dist_next: row.dist_next_mean,
                    entropy: row.entropy,
                    velocity: row.velocity_mean,
                    acceleration: row.accel_mean,
                    dist_centroid: row.dist_centroid_mean,
                },
            );
    }

    let mut output = CorrelationsFile {
        config_hash: ctx.config_hash.clone(),
        method: "pearson (listwise deletion per cell)",
        datasets: Vec::new(),
    };

    for (dataset, by_backend) in &datasets {
        let matrix = cross_model_matrix(by_backend)
            .map_err(|e| CliError::Data(anyhow!("dataset `{dataset}`: {e}")))?;
        write_matrix_csv(
            &ctx.store
                .file(&format!("correlations_{}.csv", crate::store::sanitize(dataset))),
            &matrix,
        )?;
        output.datasets.push(DatasetMatrix {
            dataset: dataset.clone(),
            matrix,
        });
    }

    write_json(&ctx.store.file("correlations.json"), &output).data_err()?;
    println!(
        "correlations: {} dataset matrix/matrices -> {}",
        output.datasets.len(),
        ctx.store.file("correlations.json").display()
    );
    Ok(())
}

fn write_matrix_csv(path: &std::path::Path, matrix: &CorrelationMatrix<f64>) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path).data_err()?;
    let labels: Vec<String> = matrix
        .labels
        .iter()
        .map(|l| format!("{}|{}", l.metric, l.backend))
        .collect();

    let mut header = vec!["label".to_string()];
    header.extend(labels.iter().cloned());
    writer.write_record(&header).data_err()?;

    for (i, label) in labels.iter().enumerate() {
        let mut record = vec![label.clone()];
        for j in 0..labels.len() {
            record.push(match matrix.r[i][j] {
                Some(r) => format!("{r}"),
                None => String::new(),
            });
        }
        writer.write_record(&record).data_err()?;
    }
    writer.flush().data_err()?;
    Ok(())
}
