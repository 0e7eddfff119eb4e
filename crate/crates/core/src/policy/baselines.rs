use super::net::{HeadOutput, Observation, PolicyConfig, PolicyNet};
use crate::simcore::{Action, Policy, StepContext};
use crate::world::{euclidean_distance, raycast, shortest_path, wrap_angle, OccupancyGrid, Point, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Builds the learned policy's observation for one agent state.
pub fn observe_pose(
    grid: &OccupancyGrid,
    agent: Pose,
    goal: Point,
    prev_action: Action,
    cfg: &PolicyConfig,
) -> Observation {
    let rays: Vec<f64> = (0..cfg.n_rays)
        .map(|i| {
            let frac = if cfg.n_rays > 1 {
                i as f64 / (cfg.n_rays - 1) as f64
            } else {
                0.5
            };
            let angle = agent.theta - cfg.fov / 2.0 + cfg.fov * frac;
            raycast(grid, agent.position(), angle, cfg.sight_range) / cfg.sight_range
        })
        .collect();
    let delta = goal.sub(agent.position());
    let bearing = wrap_angle(delta.y.atan2(delta.x) - agent.theta);
    Observation {
        rays,
        goal: [
            (euclidean_distance(agent.position(), goal) / cfg.goal_scale).clamp(0.0, 1.0),
            bearing.sin(),
            bearing.cos(),
        ],
        prev_action: [prev_action.lin_vel, prev_action.ang_vel],
    }
}

fn steer_towards(agent: Pose, target: Point, cfg: &crate::simcore::SimConfig) -> Action {
    let delta = target.sub(agent.position());
    let dtheta = wrap_angle(delta.y.atan2(delta.x) - agent.theta);
    // positive ang_vel turns clockwise (decreases theta)
    let ang = (-dtheta / (cfg.w_max * cfg.dt)).clamp(-1.0, 1.0);
    let lin = dtheta.cos().max(0.0);
    Action {
        lin_vel: lin,
        ang_vel: ang,
    }
}

/// Copy of the grid with every cell within `radius` of an obstacle marked
/// occupied, so paths planned on it keep that clearance from walls.
fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    let res = grid.resolution();
    let window = (radius / res + 0.5).ceil() as i64;
    let mut out = OccupancyGrid::empty(grid.width(), grid.height(), res);
    for r in 0..grid.height() as i64 {
        for c in 0..grid.width() as i64 {
            let mut blocked = false;
            'scan: for dr in -window..=window {
                for dc in -window..=window {
                    if grid.occupied_signed(c + dc, r + dr) {
                        // distance from this cell's center to the closest
                        // point of the occupied cell's square
                        let dx = ((dc.abs() as f64) - 0.5).max(0.0) * res;
                        let dy = ((dr.abs() as f64) - 0.5).max(0.0) * res;
                        if dx.hypot(dy) < radius {
                            blocked = true;
                            break 'scan;
                        }
                    }
                }
            }
            if blocked {
                out.set_occupied(crate::world::Cell::new(c as usize, r as usize), true);
            }
        }
    }
    out
}

const CLEARANCE_MARGIN: f64 = 0.05;

/// Pure-pursuit tracking of the shortest path to goal; ignores pedestrians.
/// Plans on a clearance-inflated grid when possible so the path does not hug
/// corners tighter than the agent's radius.
pub struct GreedyPolicy {
    pub lookahead: f64,
    inflated: Option<OccupancyGrid>,
}

impl Default for GreedyPolicy {
    fn default() -> Self {
        GreedyPolicy {
            lookahead: 0.3,
            inflated: None,
        }
    }
}

impl GreedyPolicy {
    fn target(&mut self, ctx: &StepContext) -> Option<Point> {
        let pos = ctx.agent.position();
        if euclidean_distance(pos, ctx.goal) <= self.lookahead {
            return Some(ctx.goal);
        }
        if self.inflated.is_none() {
            self.inflated = Some(inflate(ctx.grid, ctx.cfg.r_agent + CLEARANCE_MARGIN));
        }
        let inflated = self.inflated.as_ref().unwrap();
        let path = match shortest_path(inflated, pos, ctx.goal) {
            Ok(Some(p)) => p,
            // start, goal, or the whole corridor lies inside the inflation:
            // fall back to the raw grid
            _ => shortest_path(ctx.grid, pos, ctx.goal).ok()??,
        };
        let target = path
            .waypoints
            .iter()
            .find(|w| euclidean_distance(pos, **w) >= self.lookahead)
            .copied()
            .unwrap_or(ctx.goal);
        Some(target)
    }
}

impl Policy for GreedyPolicy {
    fn reset(&mut self, _seed: u64) {
        self.inflated = None;
    }

    fn act(&mut self, ctx: &StepContext) -> Action {
        let mut action = match self.target(ctx) {
            Some(target) => steer_towards(ctx.agent, target, ctx.cfg),
            None => Action::ZERO,
        };
        // never grind against a wall: drop to rotation when the forward
        // probe is blocked
        if action.lin_vel > 0.0 {
            let (_, blocked) = crate::simcore::agent_step(ctx.agent, action, ctx.grid, ctx.cfg);
            if blocked {
                action.lin_vel = 0.0;
            }
        }
        action
    }
}

/// Greedy pursuit modulated by the social features: slows with risk, steers
/// away from an occupied forward compass sector, and under high risk turns
/// to put the nearest person behind and flees.
pub struct SocialPolicy {
    pub greedy: GreedyPolicy,
    pub flee_risk: f64,
    pub steer_threshold: f64,
    pub steer_ang: f64,
}

impl Default for SocialPolicy {
    fn default() -> Self {
        SocialPolicy {
            greedy: GreedyPolicy::default(),
            flee_risk: 0.55,
            steer_threshold: 0.5,
            steer_ang: 0.8,
        }
    }
}

impl SocialPolicy {
    /// Drive so the hottest compass sector ends up directly behind: turn
    /// away from it, advance while it is in the back half-plane, back up
    /// while it is in front.
    fn flee(&self, ctx: &StepContext, sector: usize, k: usize) -> Action {
        use std::f64::consts::{PI, TAU};
        // clockwise bearing of the sector center relative to the heading
        let bearing = (sector as f64 + 0.5) / k as f64 * TAU;
        let to_rear = wrap_angle(PI - bearing);
        // bearing grows as theta grows, and positive ang_vel decreases theta
        let ang = (-to_rear / (ctx.cfg.w_max * ctx.cfg.dt)).clamp(-1.0, 1.0);
        let in_front = bearing < PI / 2.0 || bearing > 3.0 * PI / 2.0;
        let mut action = Action {
            lin_vel: if in_front { -1.0 } else { 1.0 },
            ang_vel: ang,
        };
        let (_, blocked) = crate::simcore::agent_step(ctx.agent, action, ctx.grid, ctx.cfg);
        if blocked {
            action.lin_vel = 0.0;
        }
        action
    }
}

impl Policy for SocialPolicy {
    fn reset(&mut self, seed: u64) {
        self.greedy.reset(seed);
    }

    fn act(&mut self, ctx: &StepContext) -> Action {
        let risk = ctx.features.risk;
        let compass = &ctx.features.compass;
        let k = compass.len();
        let hottest = (0..k).max_by(|a, b| compass[*a].total_cmp(&compass[*b]));
        if risk > self.flee_risk {
            if let Some(sector) = hottest {
                return self.flee(ctx, sector, k);
            }
        }
        let base = self.greedy.act(ctx);
        let mut action = Action {
            lin_vel: base.lin_vel * (1.0 - risk),
            ang_vel: base.ang_vel,
        };
        if k >= 2 {
            // sector 0 opens clockwise (right) of the heading, sector k-1
            // counterclockwise (left)
            let right = compass[0];
            let left = compass[k - 1];
            if right.max(left) > self.steer_threshold {
                action.ang_vel = if right >= left {
                    -self.steer_ang
                } else {
                    self.steer_ang
                };
            }
        }
        action
    }
}

/// One recorded step of a training rollout.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub obs: Observation,
    /// Sampled action before clamping, used for the log-probability.
    pub pre_clamp: [f64; 2],
    pub value: f64,
    /// Belief state entering this step.
    pub h_before: Vec<Vec<f64>>,
}

/// The learned policy driving an episode: recurrent beliefs across steps,
/// Gaussian action sampling (or the mean when deterministic).
pub struct LearnedPolicy {
    pub net: PolicyNet,
    h: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
    stochastic: bool,
    trace: Option<Vec<TraceStep>>,
}

impl LearnedPolicy {
    pub fn stochastic(net: PolicyNet) -> Self {
        let h = net.zero_beliefs();
        LearnedPolicy {
            net,
            h,
            rng: ChaCha8Rng::seed_from_u64(0),
            stochastic: true,
            trace: None,
        }
    }

    pub fn deterministic(net: PolicyNet) -> Self {
        LearnedPolicy {
            stochastic: false,
            ..LearnedPolicy::stochastic(net)
        }
    }

    pub fn record_trace(&mut self, on: bool) {
        self.trace = if on { Some(Vec::new()) } else { None };
    }

    pub fn take_trace(&mut self) -> Vec<TraceStep> {
        self.trace.replace(Vec::new()).unwrap_or_default()
    }

    fn standard_normal(&mut self) -> f64 {
        let u1: f64 = self.rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn sample(&mut self, head: &HeadOutput) -> [f64; 2] {
        if self.stochastic {
            [
                head.mu[0] + head.sigma[0] * self.standard_normal(),
                head.mu[1] + head.sigma[1] * self.standard_normal(),
            ]
        } else {
            head.mu
        }
    }
}

impl Policy for LearnedPolicy {
    fn reset(&mut self, seed: u64) {
        self.h = self.net.zero_beliefs();
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        if self.trace.is_some() {
            self.trace = Some(Vec::new());
        }
    }

    fn act(&mut self, ctx: &StepContext) -> Action {
        let obs = observe_pose(ctx.grid, ctx.agent, ctx.goal, ctx.prev_action, &self.net.cfg);
        let h_before = self.h.clone();
        let head = self.net.act_forward(&obs, &mut self.h);
        let pre_clamp = self.sample(&head);
        if let Some(trace) = &mut self.trace {
            trace.push(TraceStep {
                obs,
                pre_clamp,
                value: head.value,
                h_before,
            });
        }
        Action::new(pre_clamp[0], pre_clamp[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simcore::{generate_episode, run_episode, Episode, EpisodeStatus, SimConfig};
    use crate::socialfeat::{self, FeatureParams, SocialFeatures};
    use crate::world::Cell;
    use rand::SeedableRng;

    fn ctx_for<'a>(
        grid: &'a OccupancyGrid,
        cfg: &'a SimConfig,
        agent: Pose,
        goal: Point,
        features: &'a SocialFeatures,
    ) -> StepContext<'a> {
        StepContext {
            grid,
            cfg,
            t: 0,
            agent,
            goal,
            pedestrians: &[],
            features,
            prev_action: Action::ZERO,
        }
    }

    #[test]
    fn greedy_drives_straight_down_a_free_corridor() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let features = socialfeat::extract(Pose::new(1.05, 2.05, 0.0), &[], &FeatureParams::default());
        let ctx = ctx_for(&grid, &cfg, Pose::new(1.05, 2.05, 0.0), Point::new(3.05, 2.05), &features);
        let a = GreedyPolicy::default().act(&ctx);
        assert!(a.lin_vel > 0.99);
        assert!(a.ang_vel.abs() < 0.05);
    }

    #[test]
    fn greedy_succeeds_without_pedestrians() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let episode = generate_episode(&grid, &mut rng, 0, "m", &cfg).unwrap();
            let log = run_episode(&grid, &episode, &mut GreedyPolicy::default(), &cfg).unwrap();
            assert_eq!(log.status, EpisodeStatus::Success);
        }
    }

    #[test]
    fn greedy_steers_around_a_wall() {
        let mut grid = OccupancyGrid::empty(40, 40, 0.1);
        for r in 5..35 {
            grid.set_occupied(Cell::new(20, r), true);
        }
        let cfg = SimConfig::default();
        let episode = Episode {
            map_id: "w".into(),
            agent_start: Pose::new(1.0, 2.0, 0.0),
            goal: Point::new(3.0, 2.0),
            pedestrians: vec![],
            seed: 0,
        };
        let log = run_episode(&grid, &episode, &mut GreedyPolicy::default(), &cfg).unwrap();
        assert_eq!(log.status, EpisodeStatus::Success);
    }

    #[test]
    fn social_matches_greedy_at_zero_risk() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let agent = Pose::new(1.05, 2.05, 0.4);
        let features = socialfeat::extract(agent, &[], &FeatureParams::default());
        assert_eq!(features.risk, 0.0);
        let ctx = ctx_for(&grid, &cfg, agent, Point::new(3.05, 2.65), &features);
        assert_eq!(
            SocialPolicy::default().act(&ctx),
            GreedyPolicy::default().act(&ctx)
        );
    }

    #[test]
    fn social_flees_under_high_risk() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let agent = Pose::new(1.05, 2.05, 0.0);
        // person almost touching straight ahead: risk near 1
        let features =
            socialfeat::extract(agent, &[Pose::new(1.2, 2.05, 0.0)], &FeatureParams::default());
        assert!(features.risk > 0.7);
        let ctx = ctx_for(&grid, &cfg, agent, Point::new(3.05, 2.05), &features);
        let a = SocialPolicy::default().act(&ctx);
        assert!(a.lin_vel < 0.0, "should back away, got {a:?}");
        assert!(a.ang_vel != 0.0);

        // same person directly behind: keep driving forward, away
        let agent = Pose::new(1.05, 2.05, std::f64::consts::PI);
        let features =
            socialfeat::extract(agent, &[Pose::new(1.2, 2.05, 0.0)], &FeatureParams::default());
        let ctx = ctx_for(&grid, &cfg, agent, Point::new(0.25, 2.05), &features);
        let a = SocialPolicy::default().act(&ctx);
        assert!(a.lin_vel > 0.0, "should flee forward, got {a:?}");
    }

    #[test]
    fn social_scales_speed_with_risk() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let agent = Pose::new(1.05, 2.05, 0.0);
        // person 1 m ahead within d_r = 2: risk 0.5
        let features =
            socialfeat::extract(agent, &[Pose::new(2.05, 2.05, 0.0)], &FeatureParams::default());
        assert!((features.risk - 0.5).abs() < 1e-12);
        let ctx = ctx_for(&grid, &cfg, agent, Point::new(3.55, 2.05), &features);
        let a = SocialPolicy::default().act(&ctx);
        assert!(a.lin_vel < 0.51 && a.lin_vel > 0.0);
    }

    #[test]
    fn social_steers_away_from_forward_threat() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let agent = Pose::new(1.05, 2.05, 0.0);
        // person ahead, slightly left of heading
        let features = socialfeat::extract(
            agent,
            &[Pose::new(2.2, 2.25, 0.0)],
            &FeatureParams::default(),
        );
        let ctx = ctx_for(&grid, &cfg, agent, Point::new(3.55, 2.05), &features);
        let a = SocialPolicy::default().act(&ctx);
        // left-front threat: turn clockwise (right), positive ang_vel
        assert!(a.ang_vel > 0.5, "got {a:?}");
    }

    #[test]
    fn learned_policy_is_seed_deterministic() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = SimConfig::default();
        let mut sim_cfg = cfg.clone();
        sim_cfg.max_steps = 40;
        let episode = Episode {
            map_id: "t".into(),
            agent_start: Pose::new(1.0, 2.0, 0.0),
            goal: Point::new(3.0, 2.0),
            pedestrians: vec![],
            seed: 77,
        };
        let net = PolicyNet::new(PolicyConfig::toy(), 4);
        let a = run_episode(&grid, &episode, &mut LearnedPolicy::stochastic(net.clone()), &sim_cfg)
            .unwrap();
        let b = run_episode(&grid, &episode, &mut LearnedPolicy::stochastic(net), &sim_cfg)
            .unwrap();
        assert_eq!(a.to_jsonl(), b.to_jsonl());
    }

    #[test]
    fn observation_components_are_bounded() {
        let grid = OccupancyGrid::empty(40, 40, 0.1);
        let cfg = PolicyConfig::default();
        let obs = observe_pose(
            &grid,
            Pose::new(0.5, 0.5, 1.2),
            Point::new(3.5, 3.5),
            Action::new(-1.0, 1.0),
            &cfg,
        );
        assert_eq!(obs.rays.len(), cfg.n_rays);
        assert!(obs.rays.iter().all(|&r| (0.0..=1.0).contains(&r)));
        assert!(obs.goal.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(obs.prev_action.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}
