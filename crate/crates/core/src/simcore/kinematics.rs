use super::{Action, RewardTerms, SimConfig, StepOutcome};
use crate::world::{euclidean_distance, wrap_angle, OccupancyGrid, Point, Pose};

/// True iff a disc of `radius` around `center` overlaps any occupied cell
/// (including the implicit wall outside the grid).
pub fn disc_collides(grid: &OccupancyGrid, center: Point, radius: f64) -> bool {
    let res = grid.resolution();
    let c_min = ((center.x - radius) / res).floor() as i64;
    let c_max = ((center.x + radius) / res).floor() as i64;
    let r_min = ((center.y - radius) / res).floor() as i64;
    let r_max = ((center.y + radius) / res).floor() as i64;
    for r in r_min..=r_max {
        for c in c_min..=c_max {
            if !grid.occupied_signed(c, r) {
                continue;
            }
            // closest point of the cell rectangle to the disc center
            let nx = center.x.clamp(c as f64 * res, (c + 1) as f64 * res);
            let ny = center.y.clamp(r as f64 * res, (r + 1) as f64 * res);
            if (nx - center.x).hypot(ny - center.y) < radius {
                return true;
            }
        }
    }
    false
}

/// Integrates one velocity action. Positive `ang_vel` is clockwise, so the
/// heading decreases. If the swept agent disc would touch an occupied cell
/// the position is left unchanged (no sliding) and the collision flag is
/// returned.
pub fn agent_step(
    pose: Pose,
    action: Action,
    grid: &OccupancyGrid,
    cfg: &SimConfig,
) -> (Pose, bool) {
    let action = action.clamped();
    let theta = wrap_angle(pose.theta - action.ang_vel * cfg.w_max * cfg.dt);
    let dist = action.lin_vel * cfg.v_max * cfg.dt;
    let target = Point::new(pose.x + dist * theta.cos(), pose.y + dist * theta.sin());

    let samples = ((dist.abs() / (grid.resolution() / 4.0)).ceil() as usize).max(1);
    for i in 1..=samples {
        let u = i as f64 / samples as f64;
        let p = Point::new(
            pose.x + u * (target.x - pose.x),
            pose.y + u * (target.y - pose.y),
        );
        if disc_collides(grid, p, cfg.r_agent) {
            return (Pose::new(pose.x, pose.y, theta), true);
        }
    }
    (Pose::new(target.x, target.y, theta), false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Running,
    HumanCollision,
    Success,
    Timeout,
}

/// Termination test with fixed priority: human collision, then success,
/// then the step budget.
pub fn check_termination(
    agent: Point,
    pedestrians: &[Point],
    t: u32,
    goal: Point,
    cfg: &SimConfig,
) -> Termination {
    let contact = cfg.r_agent + cfg.r_human;
    if pedestrians
        .iter()
        .any(|p| euclidean_distance(agent, *p) < contact)
    {
        Termination::HumanCollision
    } else if euclidean_distance(agent, goal) < cfg.goal_radius {
        Termination::Success
    } else if t >= cfg.max_steps {
        Termination::Timeout
    } else {
        Termination::Running
    }
}

/// Per-step reward `r = -delta_d + r_slack - beta * (I_coll + I_back)
/// + beta_succ * I_succ`, with the potential term zeroed (and flagged) when
/// the goal is unreachable on either side of the transition.
pub fn compute_reward(
    prev_geo: Option<f64>,
    cur_geo: Option<f64>,
    action: Action,
    i_coll: bool,
    i_succ: bool,
    i_human_coll: bool,
    cfg: &SimConfig,
) -> StepOutcome {
    let (potential, goal_unreachable) = match (prev_geo, cur_geo) {
        (Some(prev), Some(cur)) => (-(cur - prev), false),
        _ => (0.0, true),
    };
    let i_back = action.lin_vel < 0.0;
    let terms = RewardTerms {
        potential,
        slack: cfg.r_slack,
        penalty: -cfg.beta_coll_back * (u32::from(i_coll) + u32::from(i_back)) as f64,
        bonus: cfg.beta_succ * f64::from(u8::from(i_succ)),
    };
    StepOutcome {
        reward: terms.sum(),
        terms,
        i_coll,
        i_back,
        i_succ,
        i_human_coll,
        goal_unreachable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Cell;
    use approx::assert_relative_eq;

    fn cfg() -> SimConfig {
        SimConfig::default()
    }

    #[test]
    fn zero_action_leaves_pose_unchanged() {
        let grid = OccupancyGrid::empty(20, 20, 0.1);
        let pose = Pose::new(1.0, 1.0, 0.4);
        let (next, coll) = agent_step(pose, Action::ZERO, &grid, &cfg());
        assert_eq!(next, pose);
        assert!(!coll);
    }

    #[test]
    fn forward_step_advances_by_v_max_dt() {
        let grid = OccupancyGrid::empty(20, 20, 0.1);
        let (next, coll) = agent_step(Pose::new(1.0, 1.0, 0.0), Action::new(1.0, 0.0), &grid, &cfg());
        assert!(!coll);
        assert_relative_eq!(next.x, 1.05, epsilon = 1e-12);
        assert_relative_eq!(next.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_ang_vel_turns_clockwise() {
        let grid = OccupancyGrid::empty(20, 20, 0.1);
        let (next, _) = agent_step(Pose::new(1.0, 1.0, 0.0), Action::new(0.0, 1.0), &grid, &cfg());
        let c = cfg();
        assert_relative_eq!(next.theta, -c.w_max * c.dt, epsilon = 1e-12);
    }

    #[test]
    fn blocked_by_wall_ahead() {
        let mut grid = OccupancyGrid::empty(20, 20, 0.1);
        for r in 0..20 {
            grid.set_occupied(Cell::new(13, r), true);
        }
        // wall face at x = 1.3; disc of radius 0.2 at x = 1.09 sits 0.01 m away
        let pose = Pose::new(1.09, 1.0, 0.0);
        assert!(!disc_collides(&grid, pose.position(), cfg().r_agent));
        let (next, coll) = agent_step(pose, Action::new(1.0, 0.0), &grid, &cfg());
        assert!(coll);
        assert_eq!((next.x, next.y), (pose.x, pose.y));
    }

    #[test]
    fn grid_border_blocks_motion() {
        let grid = OccupancyGrid::empty(20, 20, 0.1);
        let pose = Pose::new(0.21, 1.0, std::f64::consts::PI);
        let (next, coll) = agent_step(pose, Action::new(1.0, 0.0), &grid, &cfg());
        assert!(coll);
        assert_eq!((next.x, next.y), (pose.x, pose.y));
    }

    #[test]
    fn termination_priority() {
        let c = cfg();
        let goal = Point::new(0.0, 0.0);
        // human contact wins over success
        assert_eq!(
            check_termination(Point::new(0.1, 0.0), &[Point::new(0.2, 0.0)], 3, goal, &c),
            Termination::HumanCollision
        );
        assert_eq!(
            check_termination(Point::new(0.1, 0.0), &[], 3, goal, &c),
            Termination::Success
        );
        assert_eq!(
            check_termination(Point::new(5.0, 5.0), &[], 500, goal, &c),
            Termination::Timeout
        );
        assert_eq!(
            check_termination(Point::new(5.0, 5.0), &[], 499, goal, &c),
            Termination::Running
        );
    }

    #[test]
    fn reward_examples() {
        let c = cfg();
        // moved 0.05 m closer, no flags
        let out = compute_reward(Some(1.0), Some(0.95), Action::new(1.0, 0.0), false, false, false, &c);
        assert_relative_eq!(out.reward, 0.048, epsilon = 1e-12);
        assert_relative_eq!(out.reward, out.terms.sum());

        // obstacle collision while backing up
        let out = compute_reward(Some(1.0), Some(1.0), Action::new(-0.5, 0.0), true, false, false, &c);
        assert_relative_eq!(out.reward, -0.002 - 0.02 * 2.0, epsilon = 1e-12);
        assert!(out.i_coll && out.i_back);

        // success step with delta_d = -0.01 (moved 0.01 m closer)
        let out = compute_reward(Some(0.21), Some(0.20), Action::new(1.0, 0.0), false, true, false, &c);
        assert_relative_eq!(out.reward, 0.01 - 0.002 + 10.0, epsilon = 1e-12);

        // unreachable goal zeroes the potential term and flags it
        let out = compute_reward(None, Some(1.0), Action::ZERO, false, false, false, &c);
        assert_eq!(out.terms.potential, 0.0);
        assert!(out.goal_unreachable);
    }
}
