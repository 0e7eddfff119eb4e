//! `socnav train`: actor-critic training with auxiliary losses, periodic
//! checkpoints, and CSV logging. Re-running with the same output directory
//! resumes from the last checkpoint and appends to the log.

use crate::config::{require, write_atomic, CliError};
use crate::io::{load_episodes, load_grid};
use clap::Args;
use serde::{Deserialize, Serialize};
use socnav_core::policy::{train, training_log_csv, PolicyConfig, PolicyNet, TrainConfig};
use socnav_core::simcore::SimConfig;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TrainOpts {
    /// Map file (text occupancy grid).
    #[arg(long)]
    pub map: Option<String>,
    /// Episode file from `generate`.
    #[arg(long)]
    pub episodes: Option<String>,
    /// Output directory: checkpoint.json + training_log.csv.
    #[arg(long)]
    pub out: Option<String>,
    /// Optimizer updates to run in this invocation.
    #[arg(long)]
    pub updates: Option<usize>,
    /// n-step return segment length.
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the small toy network instead of the full-size one.
    #[arg(long)]
    pub toy: Option<bool>,
    /// Write a checkpoint every this many updates.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Physics and termination parameters; config-file key only.
    #[arg(skip)]
    pub sim: Option<SimConfig>,
}

pub fn run(opts: TrainOpts) -> Result<(), CliError> {
    let grid = load_grid(Path::new(&require(opts.map.clone(), "map")?))?;
    let episodes = load_episodes(Path::new(&require(opts.episodes.clone(), "episodes")?))?;
    if episodes.is_empty() {
        return Err(CliError::Config("episode file is empty".into()));
    }
    let out = PathBuf::from(require(opts.out.clone(), "out")?);
    let updates = require(opts.updates, "updates")?;
    let seed = opts.seed.unwrap_or(0);
    let sim_cfg = opts.sim.clone().unwrap_or_default();
    let every = opts.checkpoint_every.unwrap_or(10).max(1);

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    write_atomic(
        &out.join("config.json"),
        &serde_json::to_string_pretty(&opts).expect("options serialize"),
    )?;

    let ckpt_path = out.join("checkpoint.json");
    let csv_path = out.join("training_log.csv");
    let (mut net, mut done, mut csv) = if ckpt_path.exists() {
        let net = PolicyNet::from_checkpoint_json(&crate::config::read_to_string(&ckpt_path)?)
            .map_err(|e| CliError::Config(format!("bad checkpoint: {e}")))?;
        let csv = if csv_path.exists() {
            crate::config::read_to_string(&csv_path)?
        } else {
            training_log_csv(&[])
        };
        let done = csv.lines().count().saturating_sub(1);
        println!("resuming from {} at update {done}", ckpt_path.display());
        (net, done, csv)
    } else {
        let cfg = if opts.toy.unwrap_or(true) {
            PolicyConfig::toy()
        } else {
            PolicyConfig::default()
        };
        (PolicyNet::new(cfg, seed), 0, training_log_csv(&[]))
    };

    let mut remaining = updates;
    while remaining > 0 {
        let chunk = remaining.min(every);
        let tcfg = TrainConfig {
            updates: chunk,
            n_steps: opts.n_steps.unwrap_or(16),
            lr: opts.lr.unwrap_or(1e-3),
            gamma: opts.gamma.unwrap_or(0.99),
            seed: seed.wrapping_add(done as u64),
            ..TrainConfig::default()
        };
        let mut rows = train(&mut net, &grid, &episodes, &sim_cfg, &tcfg)
            .map_err(|e| CliError::Runtime(format!("training failed: {e}")))?;
        for row in &mut rows {
            row.update += done;
        }
        for line in training_log_csv(&rows).lines().skip(1) {
            csv.push_str(line);
            csv.push('\n');
        }
        done += chunk;
        remaining -= chunk;
        write_atomic(&ckpt_path, &net.checkpoint_json())?;
        write_atomic(&csv_path, &csv)?;
    }

    println!("trained {updates} updates; {done} total in {}", csv_path.display());
    Ok(())
}
