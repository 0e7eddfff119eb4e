//! `socnav simulate`: batch rollouts, one trajectory log file per episode.

use crate::config::{require, write_atomic, CliError};
use crate::io::{load_episodes, load_grid, PolicySpec};
use clap::Args;
use serde::{Deserialize, Serialize};
use socnav_core::simcore::{run_episode, SimConfig};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateOpts {
    /// Map file (text occupancy grid).
    #[arg(long)]
    pub map: Option<String>,
    /// Episode file from `generate`.
    #[arg(long)]
    pub episodes: Option<String>,
    /// Policy: greedy, social, or learned.
    #[arg(long)]
    pub policy: Option<String>,
    /// Checkpoint path for the learned policy.
    #[arg(long)]
    pub checkpoint: Option<String>,
    /// Output directory; one `episode_NNNN.jsonl` per episode.
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads for episode-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Physics and termination parameters; config-file key only.
    #[arg(skip)]
    pub sim: Option<SimConfig>,
}

pub fn run(opts: SimulateOpts) -> Result<(), CliError> {
    let grid = load_grid(Path::new(&require(opts.map.clone(), "map")?))?;
    let episodes = load_episodes(Path::new(&require(opts.episodes.clone(), "episodes")?))?;
    let out = PathBuf::from(require(opts.out.clone(), "out")?);
    let spec = PolicySpec::parse(
        opts.policy.as_deref().unwrap_or("greedy"),
        opts.checkpoint.as_deref().map(Path::new),
    )?;
    let sim_cfg = opts.sim.clone().unwrap_or_default();
    let jobs = opts.jobs.unwrap_or(1).max(1);

    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    write_atomic(
        &out.join("config.json"),
        &serde_json::to_string_pretty(&opts).expect("options serialize"),
    )?;

    let failures: Mutex<Vec<String>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for worker in 0..jobs {
            let (grid, spec, sim_cfg, out, episodes, failures) =
                (&grid, &spec, &sim_cfg, &out, &episodes, &failures);
            scope.spawn(move || {
                for (i, episode) in episodes.iter().enumerate().skip(worker).step_by(jobs) {
                    let mut policy = spec.build();
                    let result = run_episode(grid, episode, policy.as_mut(), sim_cfg)
                        .map_err(|e| format!("episode {i}: {e}"))
                        .and_then(|log| {
                            write_atomic(&out.join(format!("episode_{i:04}.jsonl")), &log.to_jsonl())
                                .map_err(|e| format!("episode {i}: {e}"))
                        });
                    if let Err(msg) = result {
                        failures.lock().unwrap().push(msg);
                    }
                }
            });
        }
    });

    let mut failures = failures.into_inner().unwrap();
    failures.sort();
    if failures.is_empty() {
        println!("simulated {} episodes into {}", episodes.len(), out.display());
        Ok(())
    } else {
        Err(CliError::Runtime(failures.join("\n")))
    }
}
