//! Episode semantics: agent kinematics under velocity actions, pedestrian
//! patrols, collision detection, termination rules, reward computation, and
//! deterministic rollouts producing trajectory logs.

mod kinematics;
mod log;
mod patrol;
mod rollout;

pub use kinematics::{agent_step, check_termination, compute_reward, disc_collides, Termination};
pub use log::{episodes_from_json, episodes_to_json};
pub use patrol::{pedestrian_position, Patrol};
pub use rollout::{generate_episode, run_episode, Policy, StepContext};

use crate::socialfeat::{FeatureParams, SocialFeatures};
use crate::world::{Point, Pose, WorldError};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Normalized velocity command. Positive `ang_vel` turns clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub lin_vel: f64,
    pub ang_vel: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        lin_vel: 0.0,
        ang_vel: 0.0,
    };

    pub fn new(lin_vel: f64, ang_vel: f64) -> Self {
        Action { lin_vel, ang_vel }.clamped()
    }

    pub fn clamped(self) -> Self {
        Action {
            lin_vel: self.lin_vel.clamp(-1.0, 1.0),
            ang_vel: self.ang_vel.clamp(-1.0, 1.0),
        }
    }
}

/// One patrolling pedestrian: walks back and forth between `start` and
/// `end` along the shortest path at constant `speed`, offset in its cycle
/// by `phase` (fraction of a full round trip).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedestrianSpec {
    pub start: Point,
    pub end: Point,
    pub speed: f64,
    pub phase: f64,
}

/// Everything that determines a rollout given a policy: start pose, goal,
/// pedestrian patrols, and the RNG seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub map_id: String,
    pub agent_start: Pose,
    pub goal: Point,
    pub pedestrians: Vec<PedestrianSpec>,
    pub seed: u64,
}

/// Physics, termination, reward, and feature parameters for a rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub v_max: f64,
    pub w_max: f64,
    pub r_agent: f64,
    pub r_human: f64,
    pub goal_radius: f64,
    pub max_steps: u32,
    pub r_slack: f64,
    pub beta_coll_back: f64,
    pub beta_succ: f64,
    pub features: FeatureParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.1,
            v_max: 0.5,
            w_max: FRAC_PI_2,
            r_agent: 0.2,
            r_human: 0.3,
            goal_radius: 0.2,
            max_steps: 500,
            r_slack: -0.002,
            beta_coll_back: 0.02,
            beta_succ: 10.0,
            features: FeatureParams::default(),
        }
    }
}

/// Additive decomposition of the per-step reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardTerms {
    /// Potential term `-delta_d` (decrease of geodesic distance to goal).
    pub potential: f64,
    /// Constant slack reward.
    pub slack: f64,
    /// `-beta * (I_coll + I_back)`.
    pub penalty: f64,
    /// `beta_succ * I_succ`.
    pub bonus: f64,
}

impl RewardTerms {
    pub fn sum(&self) -> f64 {
        self.potential + self.slack + self.penalty + self.bonus
    }
}

/// Reward and indicator flags for one transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub terms: RewardTerms,
    pub i_coll: bool,
    pub i_back: bool,
    pub i_succ: bool,
    pub i_human_coll: bool,
    /// Set when the goal was unreachable for this step and the potential
    /// term was zeroed.
    pub goal_unreachable: bool,
}

impl StepOutcome {
    pub fn zero() -> Self {
        StepOutcome {
            reward: 0.0,
            terms: RewardTerms {
                potential: 0.0,
                slack: 0.0,
                penalty: 0.0,
                bonus: 0.0,
            },
            i_coll: false,
            i_back: false,
            i_succ: false,
            i_human_coll: false,
            goal_unreachable: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeStatus {
    Success,
    HumanCollision,
    Timeout,
}

/// Per-timestep record. Record 0 holds the initial state with a zero action
/// and zero outcome; record `t >= 1` holds the state reached by the action
/// taken at `t - 1`, that action, and the outcome of the transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    pub agent: Pose,
    pub action: Action,
    pub pedestrians: Vec<Pose>,
    pub outcome: StepOutcome,
    pub features: Option<SocialFeatures>,
}

/// Complete rollout record: the unit of analysis for the evaluation
/// protocol. `records.len() == t_end + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub episode: Episode,
    pub config: SimConfig,
    pub status: EpisodeStatus,
    pub t_end: u32,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("pedestrian patrol endpoints are mutually unreachable")]
    UnreachablePatrol,
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error("failed to sample a valid episode after {0} attempts")]
    GenerationFailed(usize),
    #[error("trajectory log parse error: {0}")]
    LogParse(String),
    #[error(transparent)]
    World(#[from] WorldError),
}
