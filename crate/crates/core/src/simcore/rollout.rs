use super::{
    agent_step, check_termination, compute_reward, disc_collides, Action, Episode, EpisodeStatus,
    Patrol, PedestrianSpec, SimConfig, SimError, StepOutcome, StepRecord, Termination,
    TrajectoryLog,
};
use crate::socialfeat::{self, SocialFeatures};
use crate::world::{GeodesicField, OccupancyGrid, Point, Pose};
use rand::Rng;
use std::f64::consts::PI;

/// What a policy sees at each step. Scripted baselines read the oracle
/// fields directly; the learned policy builds its range observation from
/// the grid.
pub struct StepContext<'a> {
    pub grid: &'a OccupancyGrid,
    pub cfg: &'a SimConfig,
    pub t: u32,
    pub agent: Pose,
    pub goal: Point,
    pub pedestrians: &'a [Pose],
    pub features: &'a SocialFeatures,
    pub prev_action: Action,
}

/// Observation-to-action mapping driven by the rollout loop.
pub trait Policy {
    /// Called once before an episode with the episode seed; policies that
    /// sample actions derive their RNG stream from it.
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, ctx: &StepContext) -> Action;
}

fn validate_episode(episode: &Episode, grid: &OccupancyGrid, cfg: &SimConfig) -> Result<(), SimError> {
    if disc_collides(grid, episode.agent_start.position(), cfg.r_agent) {
        return Err(SimError::InvalidEpisode(
            "agent start pose overlaps an occupied cell".into(),
        ));
    }
    let field = GeodesicField::new(grid, episode.goal)
        .map_err(|e| SimError::InvalidEpisode(format!("goal: {e}")))?;
    match field.distance(episode.agent_start.position()) {
        Ok(Some(_)) => Ok(()),
        Ok(None) => Err(SimError::InvalidEpisode(
            "no navigable path from start to goal".into(),
        )),
        Err(e) => Err(SimError::InvalidEpisode(format!("start: {e}"))),
    }
}

/// Runs one episode to termination. Deterministic given the episode (whose
/// seed drives the policy), the policy parameters, and the config.
pub fn run_episode(
    grid: &OccupancyGrid,
    episode: &Episode,
    policy: &mut dyn Policy,
    cfg: &SimConfig,
) -> Result<TrajectoryLog, SimError> {
    validate_episode(episode, grid, cfg)?;
    let patrols: Vec<Patrol> = episode
        .pedestrians
        .iter()
        .map(|spec| Patrol::new(spec, grid))
        .collect::<Result<_, _>>()?;
    let goal_field = GeodesicField::new(grid, episode.goal)?;
    let geo = |p: Point| -> Result<Option<f64>, SimError> {
        match goal_field.distance(p) {
            Ok(d) => Ok(d),
            // agent drifted next to a wall cluster: treat as unreachable step
            Err(_) => Ok(None),
        }
    };

    policy.reset(episode.seed);

    let ped_poses = |t: u32| -> Vec<Pose> { patrols.iter().map(|p| p.pose_at(t, cfg.dt)).collect() };
    let positions = |poses: &[Pose]| -> Vec<Point> { poses.iter().map(Pose::position).collect() };

    let mut agent = episode.agent_start;
    let mut peds = ped_poses(0);
    let mut prev_action = Action::ZERO;

    let mut records = vec![StepRecord {
        t: 0,
        agent,
        action: Action::ZERO,
        pedestrians: peds.clone(),
        outcome: StepOutcome::zero(),
        features: Some(socialfeat::extract(agent, &peds, &cfg.features)),
    }];

    // degenerate initial states terminate immediately
    let initial = check_termination(agent.position(), &positions(&peds), 0, episode.goal, cfg);
    let mut status = match initial {
        Termination::Running => None,
        Termination::HumanCollision => {
            records[0].outcome.i_human_coll = true;
            Some(EpisodeStatus::HumanCollision)
        }
        Termination::Success => {
            records[0].outcome.i_succ = true;
            Some(EpisodeStatus::Success)
        }
        Termination::Timeout => Some(EpisodeStatus::Timeout),
    };

    let mut t = 0u32;
    while status.is_none() {
        let features = socialfeat::extract(agent, &peds, &cfg.features);
        let action = policy
            .act(&StepContext {
                grid,
                cfg,
                t,
                agent,
                goal: episode.goal,
                pedestrians: &peds,
                features: &features,
                prev_action,
            })
            .clamped();

        let prev_geo = geo(agent.position())?;
        let (next_agent, i_coll) = agent_step(agent, action, grid, cfg);
        let next_peds = ped_poses(t + 1);

        let term = check_termination(
            next_agent.position(),
            &positions(&next_peds),
            t + 1,
            episode.goal,
            cfg,
        );
        let i_succ = term == Termination::Success;
        let i_human = term == Termination::HumanCollision;

        let outcome = compute_reward(
            prev_geo,
            geo(next_agent.position())?,
            action,
            i_coll,
            i_succ,
            i_human,
            cfg,
        );

        agent = next_agent;
        peds = next_peds;
        prev_action = action;
        t += 1;
        records.push(StepRecord {
            t,
            agent,
            action,
            pedestrians: peds.clone(),
            outcome,
            features: Some(socialfeat::extract(agent, &peds, &cfg.features)),
        });

        status = match term {
            Termination::Running => None,
            Termination::HumanCollision => Some(EpisodeStatus::HumanCollision),
            Termination::Success => Some(EpisodeStatus::Success),
            Termination::Timeout => Some(EpisodeStatus::Timeout),
        };
    }

    Ok(TrajectoryLog {
        episode: episode.clone(),
        config: cfg.clone(),
        status: status.expect("loop exits with a status"),
        t_end: t,
        records,
    })
}

const GENERATION_ATTEMPTS: usize = 500;

/// Samples a valid episode: start and goal uniform over collision-free
/// cells with a navigable path and at least 1 m of geodesic separation;
/// pedestrian patrols between mutually reachable free cells with speed
/// uniform in [0.45, 0.5] m/s.
pub fn generate_episode(
    grid: &OccupancyGrid,
    rng: &mut impl Rng,
    n_pedestrians: usize,
    map_id: &str,
    cfg: &SimConfig,
) -> Result<Episode, SimError> {
    let agent_cells: Vec<Point> = grid
        .free_cells()
        .map(|c| grid.cell_center(c))
        .filter(|p| !disc_collides(grid, *p, cfg.r_agent))
        .collect();
    let ped_cells: Vec<Point> = grid.free_cells().map(|c| grid.cell_center(c)).collect();
    if agent_cells.len() < 2 {
        return Err(SimError::GenerationFailed(0));
    }

    let (start, goal) = {
        let mut found = None;
        for _ in 0..GENERATION_ATTEMPTS {
            let s = agent_cells[rng.gen_range(0..agent_cells.len())];
            let g = agent_cells[rng.gen_range(0..agent_cells.len())];
            match crate::world::geodesic_distance(grid, s, g) {
                Ok(Some(d)) if d >= 1.0 => {
                    found = Some((s, g));
                    break;
                }
                _ => continue,
            }
        }
        found.ok_or(SimError::GenerationFailed(GENERATION_ATTEMPTS))?
    };

    let mut pedestrians = Vec::with_capacity(n_pedestrians);
    for _ in 0..n_pedestrians {
        let mut found = None;
        for _ in 0..GENERATION_ATTEMPTS {
            let a = ped_cells[rng.gen_range(0..ped_cells.len())];
            let b = ped_cells[rng.gen_range(0..ped_cells.len())];
            match crate::world::geodesic_distance(grid, a, b) {
                Ok(Some(d)) if d >= 0.5 => {
                    found = Some((a, b));
                    break;
                }
                _ => continue,
            }
        }
        let (a, b) = found.ok_or(SimError::GenerationFailed(GENERATION_ATTEMPTS))?;
        pedestrians.push(PedestrianSpec {
            start: a,
            end: b,
            speed: rng.gen_range(0.45..=0.5),
            phase: rng.gen_range(0.0..1.0),
        });
    }

    Ok(Episode {
        map_id: map_id.to_string(),
        agent_start: Pose::new(start.x, start.y, rng.gen_range(-PI..PI)),
        goal,
        pedestrians,
        seed: rng.gen(),
    })
}
