//! `socnav evaluate`: encounter protocol analysis plus navigation metrics
//! over a set of trajectory logs.

use crate::config::{require, write_atomic, CliError};
use crate::io::{load_grid, load_logs};
use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;
use socnav_core::encounters::{analyze_log, encounter_metrics, Encounter, EncounterParams};
use socnav_core::navmetrics::{aggregate, episode_metrics, metrics_to_csv, MeanStd, MetricsSummary};
use socnav_core::simcore::TrajectoryLog;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EvaluateOpts {
    /// Map file the logs were recorded on.
    #[arg(long)]
    pub map: Option<String>,
    /// Log directory (all `.jsonl` files) or a single log file.
    #[arg(long)]
    pub logs: Option<String>,
    /// Output directory for the report and metric files.
    #[arg(long)]
    pub out: Option<String>,
    /// Encounter protocol thresholds; config-file key only.
    #[arg(skip)]
    pub encounter: Option<EncounterParams>,
}

fn zeroed_summary() -> MetricsSummary {
    let zero = MeanStd { mean: 0.0, std: 0.0 };
    MetricsSummary {
        success_pct: zero,
        spl: zero,
        spl_pct: zero,
        h_collision_pct: zero,
        timeout_pct: zero,
        n_runs: 0,
        n_episodes: 0,
    }
}

pub fn run(opts: EvaluateOpts) -> Result<(), CliError> {
    let grid = load_grid(Path::new(&require(opts.map.clone(), "map")?))?;
    let logs = load_logs(Path::new(&require(opts.logs.clone(), "logs")?))?;
    let out = PathBuf::from(require(opts.out.clone(), "out")?);
    let params = opts.encounter.unwrap_or_default();

    let encounters: Vec<Vec<Encounter>> = logs
        .iter()
        .map(|log| analyze_log(log, &grid, params))
        .collect();
    let items: Vec<(&TrajectoryLog, &[Encounter])> = logs
        .iter()
        .zip(&encounters)
        .map(|(log, enc)| (log, enc.as_slice()))
        .collect();
    let report = encounter_metrics(&items, &params);

    let metrics = logs
        .iter()
        .map(|log| {
            episode_metrics(log, &grid)
                .map_err(|e| CliError::Runtime(format!("metric computation failed: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = if metrics.is_empty() {
        zeroed_summary()
    } else {
        aggregate(&[metrics.clone()])
    };

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let envelope = json!({ "config": opts, "summary": summary });
    write_atomic(&out.join("report.json"), &report.to_json())?;
    write_atomic(&out.join("report.csv"), &report.to_csv())?;
    write_atomic(&out.join("metrics.csv"), &metrics_to_csv(&metrics))?;
    write_atomic(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&envelope).expect("summary serializes"),
    )?;

    print!("{}", report.table());
    println!();
    print!("{}", summary.table());
    Ok(())
}
