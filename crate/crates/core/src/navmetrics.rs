//! Episode-level navigation metrics (success, SPL, human collisions) and
//! run aggregation.

use crate::simcore::{EpisodeStatus, SimError, TrajectoryLog};
use crate::world::{euclidean_distance, geodesic_distance, OccupancyGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success: bool,
    /// Success weighted by path length, in [0, 1]. Zero on any failure.
    pub spl: f64,
    pub human_collision: bool,
    /// Realized agent path length, meters.
    pub path_length: f64,
    /// Geodesic start-to-goal distance, meters.
    pub shortest_length: f64,
}

pub fn episode_metrics(
    log: &TrajectoryLog,
    grid: &OccupancyGrid,
) -> Result<EpisodeMetrics, SimError> {
    let path_length: f64 = log
        .records
        .windows(2)
        .map(|w| euclidean_distance(w[0].agent.position(), w[1].agent.position()))
        .sum();
    let shortest_length =
        geodesic_distance(grid, log.episode.agent_start.position(), log.episode.goal)?
            .unwrap_or(f64::INFINITY);
    let success = log.status == EpisodeStatus::Success;
    let spl = if success && shortest_length.is_finite() {
        shortest_length / path_length.max(shortest_length)
    } else {
        0.0
    };
    Ok(EpisodeMetrics {
        success,
        spl,
        human_collision: log.status == EpisodeStatus::HumanCollision,
        path_length,
        shortest_length,
    })
}

/// Mean and population standard deviation of one metric across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// Cross-run summary. Per-run values are means over that run's episodes
/// (percentages for the boolean metrics); the spread is the population
/// standard deviation across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub success_pct: MeanStd,
    /// Mean SPL in [0, 1].
    pub spl: MeanStd,
    /// SPL scaled to [0, 100].
    pub spl_pct: MeanStd,
    pub h_collision_pct: MeanStd,
    pub timeout_pct: MeanStd,
    pub n_runs: usize,
    pub n_episodes: usize,
}

/// Aggregates per-run metric sets. Every run must be non-empty.
pub fn aggregate(runs: &[Vec<EpisodeMetrics>]) -> MetricsSummary {
    assert!(!runs.is_empty() && runs.iter().all(|r| !r.is_empty()));
    let per_run = |f: &dyn Fn(&EpisodeMetrics) -> f64| -> Vec<f64> {
        runs.iter()
            .map(|r| r.iter().map(|m| f(m)).sum::<f64>() / r.len() as f64)
            .collect()
    };
    let success = per_run(&|m| 100.0 * m.success as u8 as f64);
    let spl = per_run(&|m| m.spl);
    let coll = per_run(&|m| 100.0 * m.human_collision as u8 as f64);
    let timeout = per_run(&|m| 100.0 * (!m.success && !m.human_collision) as u8 as f64);
    MetricsSummary {
        success_pct: mean_std(&success),
        spl: mean_std(&spl),
        spl_pct: mean_std(&spl.iter().map(|v| 100.0 * v).collect::<Vec<_>>()),
        h_collision_pct: mean_std(&coll),
        timeout_pct: mean_std(&timeout),
        n_runs: runs.len(),
        n_episodes: runs.iter().map(Vec::len).sum(),
    }
}

impl MetricsSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    /// Table-style two-decimal rendering, mean ± population std.
    pub fn table(&self) -> String {
        let row = |name: &str, m: MeanStd| format!("{name:<16} {:>8.2} ± {:.2}\n", m.mean, m.std);
        let mut out = String::new();
        out.push_str(&row("Success %", self.success_pct));
        out.push_str(&row("SPL", self.spl));
        out.push_str(&row("SPL %", self.spl_pct));
        out.push_str(&row("H-Collision %", self.h_collision_pct));
        out.push_str(&row("Timeout %", self.timeout_pct));
        out.push_str(&format!(
            "runs: {}, episodes: {}\n",
            self.n_runs, self.n_episodes
        ));
        out
    }
}

/// Row-per-episode CSV export.
pub fn metrics_to_csv(metrics: &[EpisodeMetrics]) -> String {
    let mut out = String::from("success,spl,human_collision,path_length,shortest_length\n");
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            m.success as u8, m.spl, m.human_collision as u8, m.path_length, m.shortest_length
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::SimConfig;
    use crate::world::{Point, Pose};
    use approx::assert_relative_eq;

    fn straight_log(xs: &[f64], status: EpisodeStatus, goal_x: f64) -> TrajectoryLog {
        let agent: Vec<Pose> = xs.iter().map(|&x| Pose::new(x, 0.55, 0.0)).collect();
        TrajectoryLog::synthetic(
            "m",
            SimConfig::default(),
            agent,
            vec![],
            vec![],
            status,
            Point::new(goal_x, 0.55),
        )
    }

    #[test]
    fn perfect_run_has_unit_spl() {
        let grid = OccupancyGrid::empty(30, 30, 0.1);
        // straight east along a row of cell centers: path equals geodesic
        let xs: Vec<f64> = (0..11).map(|i| 0.55 + 0.1 * i as f64).collect();
        let log = straight_log(&xs, EpisodeStatus::Success, 1.55);
        let m = episode_metrics(&log, &grid).unwrap();
        assert!(m.success);
        assert_relative_eq!(m.shortest_length, 1.0);
        assert_relative_eq!(m.path_length, 1.0, epsilon = 1e-9);
        assert_relative_eq!(m.spl, 1.0);
    }

    #[test]
    fn failure_zeroes_spl() {
        let grid = OccupancyGrid::empty(30, 30, 0.1);
        let xs: Vec<f64> = (0..11).map(|i| 0.55 + 0.1 * i as f64).collect();
        for status in [EpisodeStatus::HumanCollision, EpisodeStatus::Timeout] {
            let m = episode_metrics(&straight_log(&xs, status, 1.55), &grid).unwrap();
            assert!(!m.success);
            assert_eq!(m.spl, 0.0);
            assert_eq!(m.human_collision, status == EpisodeStatus::HumanCollision);
        }
    }

    #[test]
    fn doubled_path_halves_spl() {
        let grid = OccupancyGrid::empty(30, 30, 0.1);
        // wander east then back then east again: 2 m walked for a 1 m goal
        let mut xs: Vec<f64> = (0..11).map(|i| 0.55 + 0.1 * i as f64).collect();
        xs.extend((1..=5).map(|i| 1.55 - 0.1 * i as f64));
        xs.extend((1..=5).map(|i| 1.05 + 0.1 * i as f64));
        let log = straight_log(&xs, EpisodeStatus::Success, 1.55);
        let m = episode_metrics(&log, &grid).unwrap();
        assert_relative_eq!(m.path_length, 2.0, epsilon = 1e-9);
        assert_relative_eq!(m.spl, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn shorter_path_than_geodesic_caps_spl_at_one() {
        let grid = OccupancyGrid::empty(30, 30, 0.1);
        // cell-center discretization can make the geodesic slightly longer
        // than the realized straight line; SPL must still stay in [0, 1]
        let log = straight_log(&[0.50, 1.02, 1.52], EpisodeStatus::Success, 1.52);
        let m = episode_metrics(&log, &grid).unwrap();
        assert!(m.spl <= 1.0 && m.spl > 0.0);
    }

    #[test]
    fn two_run_aggregate_matches_hand_numbers() {
        let m = |success: bool| EpisodeMetrics {
            success,
            spl: if success { 0.8 } else { 0.0 },
            human_collision: !success,
            path_length: 1.0,
            shortest_length: 0.8,
        };
        // runs with 70% and 80% success
        let run1: Vec<_> = (0..10).map(|i| m(i < 7)).collect();
        let run2: Vec<_> = (0..10).map(|i| m(i < 8)).collect();
        let s = aggregate(&[run1, run2]);
        assert_relative_eq!(s.success_pct.mean, 75.0);
        assert_relative_eq!(s.success_pct.std, 5.0);
        assert_relative_eq!(s.h_collision_pct.mean, 25.0);
        assert_eq!(s.n_runs, 2);
        assert_eq!(s.n_episodes, 20);
    }

    #[test]
    fn single_run_has_zero_std() {
        let run = vec![EpisodeMetrics {
            success: true,
            spl: 0.9,
            human_collision: false,
            path_length: 1.0,
            shortest_length: 0.9,
        }];
        let s = aggregate(&[run]);
        assert_eq!(s.success_pct.std, 0.0);
        assert_eq!(s.spl.std, 0.0);
        assert_relative_eq!(s.spl_pct.mean, 90.0);
    }

    #[test]
    fn aggregate_matches_independent_summation_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let runs: Vec<Vec<EpisodeMetrics>> = (0..5)
            .map(|_| {
                (0..rng.gen_range(5..40))
                    .map(|_| {
                        let success = rng.gen_bool(0.6);
                        EpisodeMetrics {
                            success,
                            spl: if success { rng.gen_range(0.1..1.0) } else { 0.0 },
                            human_collision: !success && rng.gen_bool(0.5),
                            path_length: rng.gen_range(1.0..5.0),
                            shortest_length: 1.0,
                        }
                    })
                    .collect()
            })
            .collect();
        let s = aggregate(&runs);

        // oracle: accumulate per-run success percentages longhand, then
        // two-pass mean/variance
        let mut per_run = Vec::new();
        for run in &runs {
            let mut hits = 0usize;
            for m in run {
                if m.success {
                    hits += 1;
                }
            }
            per_run.push(100.0 * hits as f64 / run.len() as f64);
        }
        let mean: f64 = per_run.iter().sum::<f64>() / per_run.len() as f64;
        let var: f64 =
            per_run.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / per_run.len() as f64;
        assert_relative_eq!(s.success_pct.mean, mean, epsilon = 1e-12);
        assert_relative_eq!(s.success_pct.std, var.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn status_percentages_sum_to_hundred() {
        let grid = OccupancyGrid::empty(30, 30, 0.1);
        let xs: Vec<f64> = (0..11).map(|i| 0.55 + 0.1 * i as f64).collect();
        let statuses = [
            EpisodeStatus::Success,
            EpisodeStatus::HumanCollision,
            EpisodeStatus::Timeout,
            EpisodeStatus::Success,
            EpisodeStatus::Timeout,
        ];
        let run: Vec<EpisodeMetrics> = statuses
            .iter()
            .map(|&st| episode_metrics(&straight_log(&xs, st, 1.55), &grid).unwrap())
            .collect();
        let s = aggregate(&[run]);
        assert_relative_eq!(
            s.success_pct.mean + s.h_collision_pct.mean + s.timeout_pct.mean,
            100.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn exports_roundtrip() {
        let run = vec![EpisodeMetrics {
            success: true,
            spl: 0.5,
            human_collision: false,
            path_length: 2.0,
            shortest_length: 1.0,
        }];
        let s = aggregate(&[run.clone()]);
        let parsed: MetricsSummary = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(parsed, s);
        let csv = metrics_to_csv(&run);
        assert_eq!(csv.lines().count(), 2);
        assert!(s.table().contains("H-Collision"));
    }
}
