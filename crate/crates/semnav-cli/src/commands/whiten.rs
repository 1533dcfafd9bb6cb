//! `semnav whiten`: fit ZCA per (dataset, backend, mode) over all
//! trajectory embeddings in the scope, store whitened trajectories under
//! `<backend>+zca`, and record isotropy diagnostics in the manifest.

use std::collections::BTreeMap;

use anyhow::{anyhow, Context};

use semnav::embed::PrefixMode;
use semnav::whiten::{apply_one, fit_zca, verify_isotropy};

use crate::manifest::{IsotropyRecord, WhiteningSection};
use crate::store::{read_all_trajectories, write_json, write_trajectories, TrajectoryRecord};
use crate::{Classify, CliError, CliResult, Ctx, WhitenArgs};

const ZCA_SUFFIX: &str = "+zca";

pub fn run(ctx: &mut Ctx, args: &WhitenArgs) -> CliResult<()> {
    let eps = args.eps.unwrap_or(ctx.config.whitening.eps);
    if eps < 0.0 {
        return Err(CliError::Usage(anyhow!("--eps must be non-negative")));
    }

    let records = read_all_trajectories(&ctx.store).data_err()?;
    let raw: Vec<&TrajectoryRecord> = records
        .iter()
        .filter(|r| !r.backend.ends_with(ZCA_SUFFIX))
        .collect();
    if raw.is_empty() {
        return Err(CliError::Data(anyhow!(
            "no trajectories in {}; run `semnav embed` first",
            ctx.store.root().display()
        )));
    }

    let mut scopes: BTreeMap<(String, String, PrefixMode), Vec<&TrajectoryRecord>> =
        BTreeMap::new();
    for record in raw {
        scopes
            .entry((record.dataset.clone(), record.backend.clone(), record.mode))
            .or_default()
            .push(record);
    }

    let mut isotropy = Vec::new();
    for ((dataset, backend, mode), scope_records) in &scopes {
        let samples: Vec<Vec<f64>> = scope_records
            .iter()
            .flat_map(|r| r.points.iter().flatten().cloned())
            .collect();
        if samples.len() < 2 {
            log::warn!(
                "skipping {dataset}/{backend}/{mode}: {} embedded point(s), need 2",
                samples.len()
            );
            continue;
        }

        let transform = fit_zca(&samples, eps)
            .with_context(|| format!("whitening {dataset}/{backend}/{mode}"))
            .data_err()?;

        let whitened_backend = format!("{backend}{ZCA_SUFFIX}");
        let mut whitened_records = Vec::with_capacity(scope_records.len());
        for record in scope_records {
            let points: Vec<Option<Vec<f64>>> = record
                .points
                .iter()
                .map(|p| {
                    p.as_ref()
                        .map(|v| apply_one(&transform, v))
                        .transpose()
                })
                .collect::<Result<_, _>>()
                .data_err()?;
            whitened_records.push(TrajectoryRecord {
                backend: whitened_backend.clone(),
                points,
                ..(*record).clone()
            });
        }

        let whitened_samples: Vec<Vec<f64>> = whitened_records
            .iter()
            .flat_map(|r| r.points.iter().flatten().cloned())
            .collect();
        let diagnostics = verify_isotropy(&whitened_samples).data_err()?;
        log::info!(
            "whitened {dataset}/{backend}/{mode}: n={}, max |offdiag| = {:.3e}, max |diag-1| = {:.3e}{}",
            diagnostics.n_samples,
            diagnostics.max_abs_offdiag,
            diagnostics.max_abs_diag_minus_one,
            if diagnostics.rank_warning { " (rank-deficient: n <= d)" } else { "" }
        );

        let out = ctx
            .store
            .trajectory_file(dataset, &whitened_backend, *mode);
        write_trajectories(&out, &whitened_records).data_err()?;
        write_json(
            &ctx.store.whitening_file(dataset, backend, *mode),
            &transform,
        )
        .data_err()?;

        ctx.manifest.backends.insert(whitened_backend);
        isotropy.push(IsotropyRecord {
            dataset: dataset.clone(),
            backend: backend.clone(),
            mode: mode.as_str().to_string(),
            diagnostics,
        });
    }

    if isotropy.is_empty() {
        return Err(CliError::Data(anyhow!(
            "no scope had enough embedded points to whiten"
        )));
    }
    ctx.manifest.whitening = Some(WhiteningSection {
        eps,
        scopes: isotropy,
    });
    Ok(())
}
