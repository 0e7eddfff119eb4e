//! Shared file-format helpers: text maps, episode files, trajectory logs,
//! and policy construction.

use crate::config::{read_to_string, CliError};
use serde_json::Value;
use socnav_core::policy::{GreedyPolicy, LearnedPolicy, PolicyNet, SocialPolicy};
use socnav_core::simcore::{Episode, Policy, TrajectoryLog};
use socnav_core::world::OccupancyGrid;
use std::path::Path;

pub fn load_grid(path: &Path) -> Result<OccupancyGrid, CliError> {
    let text = read_to_string(path)?;
    OccupancyGrid::parse(&text)
        .map_err(|e| CliError::Config(format!("invalid map {}: {e}", path.display())))
}

/// Reads an episode file: either a bare JSON array or the self-describing
/// envelope written by `generate` (object with an `episodes` key).
pub fn load_episodes(path: &Path) -> Result<Vec<Episode>, CliError> {
    let text = read_to_string(path)?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid episode file {}: {e}", path.display())))?;
    let episodes = match &value {
        Value::Object(map) => map.get("episodes").cloned().ok_or_else(|| {
            CliError::Config(format!("{}: no `episodes` key", path.display()))
        })?,
        _ => value,
    };
    serde_json::from_value(episodes)
        .map_err(|e| CliError::Config(format!("invalid episodes in {}: {e}", path.display())))
}

pub fn load_log(path: &Path) -> Result<TrajectoryLog, CliError> {
    let text = read_to_string(path)?;
    TrajectoryLog::from_jsonl(&text)
        .map_err(|e| CliError::Config(format!("invalid log {}: {e}", path.display())))
}

/// All `.jsonl` logs under a directory (sorted by file name), or the single
/// log if the path is a file.
pub fn load_logs(path: &Path) -> Result<Vec<TrajectoryLog>, CliError> {
    if path.is_file() {
        return Ok(vec![load_log(path)?]);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("jsonl"))
        .collect();
    files.sort();
    files.iter().map(|p| load_log(p)).collect()
}

/// A cloneable policy description, instantiated fresh per episode (and per
/// worker thread).
#[derive(Clone)]
pub enum PolicySpec {
    Greedy,
    Social,
    Learned(PolicyNet),
}

impl PolicySpec {
    pub fn parse(name: &str, checkpoint: Option<&Path>) -> Result<Self, CliError> {
        match name {
            "greedy" => Ok(PolicySpec::Greedy),
            "social" => Ok(PolicySpec::Social),
            "learned" => {
                let path = checkpoint.ok_or_else(|| {
                    CliError::Config("policy `learned` needs a `checkpoint` path".into())
                })?;
                let net = PolicyNet::from_checkpoint_json(&read_to_string(path)?)
                    .map_err(|e| CliError::Config(format!("bad checkpoint: {e}")))?;
                Ok(PolicySpec::Learned(net))
            }
            other => Err(CliError::Config(format!(
                "unknown policy `{other}` (expected greedy, social, or learned)"
            ))),
        }
    }

    pub fn build(&self) -> Box<dyn Policy> {
        match self {
            PolicySpec::Greedy => Box::new(GreedyPolicy::default()),
            PolicySpec::Social => Box::new(SocialPolicy::default()),
            PolicySpec::Learned(net) => Box::new(LearnedPolicy::deterministic(net.clone())),
        }
    }
}
