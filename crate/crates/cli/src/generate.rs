//! `socnav generate`: procedural map plus a batch of seeded episodes.

use crate::config::{require, write_atomic, CliError};
use crate::io::load_grid;
use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use socnav_core::simcore::{generate_episode, SimConfig};
use socnav_core::world::generate_map;
use std::path::Path;

#[derive(Debug, Clone, Args, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GenerateOpts {
    /// Map file; read if it exists, generated and written when --width and
    /// --height are given.
    #[arg(long)]
    pub map: Option<String>,
    /// Generate the map with this width, in cells.
    #[arg(long)]
    pub width: Option<usize>,
    /// Generate the map with this height, in cells.
    #[arg(long)]
    pub height: Option<usize>,
    /// Cell size in meters (generated maps only).
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Number of rectangular obstacles (generated maps only).
    #[arg(long)]
    pub obstacles: Option<usize>,
    /// Number of episodes to generate.
    #[arg(long)]
    pub n: Option<usize>,
    /// RNG seed for the map and every episode.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Patrolling pedestrians per episode.
    #[arg(long)]
    pub n_peds: Option<usize>,
    /// Output episode file (JSON).
    #[arg(long)]
    pub out: Option<String>,
}

pub fn run(opts: GenerateOpts) -> Result<(), CliError> {
    let map_path = require(opts.map.clone(), "map")?;
    let out = require(opts.out.clone(), "out")?;
    let n = require(opts.n, "n")?;
    let seed = opts.seed.unwrap_or(0);
    let n_peds = opts.n_peds.unwrap_or(0);
    let sim_cfg = SimConfig::default();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = match (opts.width, opts.height) {
        (Some(w), Some(h)) => {
            let grid = generate_map(
                w,
                h,
                opts.resolution.unwrap_or(0.1),
                opts.obstacles.unwrap_or(5),
                &mut rng,
            );
            write_atomic(Path::new(&map_path), &grid.write())?;
            grid
        }
        (None, None) => load_grid(Path::new(&map_path))?,
        _ => {
            return Err(CliError::Config(
                "--width and --height must be given together".into(),
            ))
        }
    };

    let map_id = Path::new(&map_path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("map");
    let mut episodes = Vec::with_capacity(n);
    for _ in 0..n {
        episodes.push(
            generate_episode(&grid, &mut rng, n_peds, map_id, &sim_cfg)
                .map_err(|e| CliError::Runtime(format!("episode generation failed: {e}")))?,
        );
    }

    let envelope = json!({ "config": opts, "episodes": episodes });
    write_atomic(
        Path::new(&out),
        &serde_json::to_string_pretty(&envelope).expect("episodes serialize"),
    )?;
    println!("wrote {n} episodes to {out}");
    Ok(())
}
