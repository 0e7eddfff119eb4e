use super::geometry::{general_direction, paths_intersect};
use super::{EncounterClass, EncounterParams};
use crate::simcore::{EpisodeStatus, TrajectoryLog};
use crate::world::{
    euclidean_distance, line_of_sight, wrap_angle, GeodesicField, OccupancyGrid, Point,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// An unclassified encounter interval for one pedestrian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncounterSpan {
    pub pedestrian_id: usize,
    pub t1: u32,
    pub t2: u32,
}

/// A classified encounter, the minimal unit of human-robot spatial
/// interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encounter {
    pub pedestrian_id: usize,
    pub t1: u32,
    pub t2: u32,
    pub class: EncounterClass,
    /// A human collision with this pedestrian occurred within `[t1, t2]`.
    pub collided: bool,
}

/// One trajectory log plus the per-timestep geodesic fields needed by the
/// protocol. Fields are computed from the agent position at each step, so
/// all pedestrian distances at a step share one Dijkstra pass.
pub struct LogAnalysis<'a> {
    pub log: &'a TrajectoryLog,
    pub grid: &'a OccupancyGrid,
    pub params: EncounterParams,
    /// `geodesic[t][i]`: agent-to-pedestrian-i geodesic distance at step t.
    geodesic: Vec<Vec<Option<f64>>>,
}

impl<'a> LogAnalysis<'a> {
    pub fn new(
        log: &'a TrajectoryLog,
        grid: &'a OccupancyGrid,
        params: EncounterParams,
    ) -> Self {
        let geodesic = log
            .records
            .iter()
            .map(|rec| {
                let field = GeodesicField::new(grid, rec.agent.position()).ok();
                rec.pedestrians
                    .iter()
                    .map(|p| {
                        field
                            .as_ref()
                            .and_then(|f| f.distance(p.position()).ok().flatten())
                    })
                    .collect()
            })
            .collect();
        LogAnalysis {
            log,
            grid,
            params,
            geodesic,
        }
    }

    fn agent_pos(&self, t: u32) -> Point {
        self.log.records[t as usize].agent.position()
    }

    fn ped_pos(&self, t: u32, id: usize) -> Point {
        self.log.records[t as usize].pedestrians[id].position()
    }

    pub fn geodesic_at(&self, t: u32, id: usize) -> Option<f64> {
        self.geodesic[t as usize][id]
    }

    fn agent_track(&self, t1: u32, t2: u32) -> Vec<Point> {
        (t1..=t2).map(|t| self.agent_pos(t)).collect()
    }

    fn ped_track(&self, t1: u32, t2: u32, id: usize) -> Vec<Point> {
        (t1..=t2).map(|t| self.ped_pos(t, id)).collect()
    }

    /// Absolute heading error to the person: `|theta_a - theta_{a->i}|`
    /// wrapped to `[0, pi]`.
    fn bearing_error(&self, t: u32, id: usize) -> f64 {
        let rec = &self.log.records[t as usize];
        let delta = self.ped_pos(t, id).sub(rec.agent.position());
        wrap_angle(rec.agent.theta - delta.y.atan2(delta.x)).abs()
    }
}

/// True iff the agent can NOT see the person at step `t`: outside the field
/// of view, beyond sight range, or occluded.
pub fn blind(analysis: &LogAnalysis, t: u32, pedestrian_id: usize) -> bool {
    let params = &analysis.params;
    let agent = analysis.agent_pos(t);
    let person = analysis.ped_pos(t, pedestrian_id);
    let visible = analysis.bearing_error(t, pedestrian_id) <= params.fov / 2.0
        && euclidean_distance(agent, person) <= params.sight_range
        && line_of_sight(analysis.grid, agent, person).unwrap_or(false);
    !visible
}

/// Maximal contiguous intervals per pedestrian where the geodesic distance
/// stays below `d_max`, filtered by the duration and heading constraints.
/// Intervals for different pedestrians may overlap in time; intervals for
/// one pedestrian never do.
pub fn extract_encounters(analysis: &LogAnalysis) -> Vec<EncounterSpan> {
    let params = &analysis.params;
    let n_peds = analysis
        .log
        .records
        .first()
        .map_or(0, |r| r.pedestrians.len());
    let t_end = analysis.log.t_end;
    let mut spans = Vec::new();

    for id in 0..n_peds {
        let close = |t: u32| matches!(analysis.geodesic_at(t, id), Some(d) if d < params.d_max);
        let mut t = 0u32;
        while t <= t_end {
            if !close(t) {
                t += 1;
                continue;
            }
            let t1 = t;
            while t < t_end && close(t + 1) {
                t += 1;
            }
            let t2 = t;
            t += 1;

            if t2 - t1 < params.t_min {
                continue;
            }
            let heading_ok = (t1..=t1 + params.t_front)
                .all(|s| analysis.bearing_error(s, id) <= params.theta_max);
            if heading_ok {
                spans.push(EncounterSpan {
                    pedestrian_id: id,
                    t1,
                    t2,
                });
            }
        }
    }
    spans
}

fn direction_difference(analysis: &LogAnalysis, span: EncounterSpan) -> Option<f64> {
    let params = &analysis.params;
    let agent_dir = general_direction(
        &analysis.agent_track(span.t1, span.t2),
        params.min_displacement,
    )?;
    let ped_dir = general_direction(
        &analysis.ped_track(span.t1, span.t2, span.pedestrian_id),
        params.min_displacement,
    )?;
    Some(wrap_angle(ped_dir - agent_dir).abs())
}

fn satisfies_rule(analysis: &LogAnalysis, span: EncounterSpan, class: EncounterClass) -> bool {
    let params = &analysis.params;
    let end = span.t2;
    let blind_prefix = |len: u32| {
        (span.t1..=(span.t1 + len).min(end)).all(|t| blind(analysis, t, span.pedestrian_id))
    };
    let visible_prefix = |len: u32| {
        (span.t1..=(span.t1 + len).min(end)).all(|t| !blind(analysis, t, span.pedestrian_id))
    };
    match class {
        EncounterClass::BlindCorner => {
            let d_diff = match analysis.geodesic_at(span.t1, span.pedestrian_id) {
                Some(geo) => {
                    geo - euclidean_distance(
                        analysis.agent_pos(span.t1),
                        analysis.ped_pos(span.t1, span.pedestrian_id),
                    )
                }
                None => return false,
            };
            blind_prefix(params.t_blind) && d_diff <= 0.5
        }
        EncounterClass::FrontalApproach => {
            visible_prefix(params.t_view)
                && matches!(direction_difference(analysis, span),
                    Some(d) if d >= PI - params.delta_slack)
        }
        EncounterClass::Intersection => {
            visible_prefix(params.t_view)
                && matches!(direction_difference(analysis, span),
                    Some(d) if (d - PI / 2.0).abs() <= params.delta_slack)
                && paths_intersect(
                    &analysis.agent_track(span.t1, span.t2),
                    &analysis.ped_track(span.t1, span.t2, span.pedestrian_id),
                )
        }
        EncounterClass::PersonFollowing => {
            visible_prefix(params.t_view)
                && matches!(direction_difference(analysis, span),
                    Some(d) if d <= params.delta_slack)
        }
        EncounterClass::Other => true,
    }
}

/// Assigns the encounter class by evaluating the inclusion rules in fixed
/// priority order: blind corner, frontal approach, intersection, person
/// following, else other.
pub fn classify(analysis: &LogAnalysis, span: EncounterSpan) -> Encounter {
    let order = [
        EncounterClass::BlindCorner,
        EncounterClass::FrontalApproach,
        EncounterClass::Intersection,
        EncounterClass::PersonFollowing,
        EncounterClass::Other,
    ];
    let class = order
        .into_iter()
        .find(|&c| satisfies_rule(analysis, span, c))
        .expect("Other always matches");

    let log = analysis.log;
    let collided = log.status == EpisodeStatus::HumanCollision
        && (span.t1..=span.t2).contains(&log.t_end)
        && euclidean_distance(
            analysis.agent_pos(log.t_end),
            analysis.ped_pos(log.t_end, span.pedestrian_id),
        ) < log.config.r_agent + log.config.r_human;
    Encounter {
        pedestrian_id: span.pedestrian_id,
        t1: span.t1,
        t2: span.t2,
        class,
        collided,
    }
}

/// Extracts and classifies every encounter in a log.
pub fn analyze_log(
    log: &TrajectoryLog,
    grid: &OccupancyGrid,
    params: EncounterParams,
) -> Vec<Encounter> {
    let analysis = LogAnalysis::new(log, grid, params);
    extract_encounters(&analysis)
        .into_iter()
        .map(|span| classify(&analysis, span))
        .collect()
}
