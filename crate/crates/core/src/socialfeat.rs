//! Ground-truth social feature extraction.
//!
//! Social Information is the set of world-frame pedestrian offsets relative
//! to the agent. From it we derive two features: a scalar risk value that
//! grows as the nearest person approaches within radius `d_r`, and a
//! k-sector social compass anchored to the agent heading that carries a
//! per-direction risk within the larger radius `d_c`.

use crate::world::{Point, Pose};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Relative position of every person w.r.t. the agent, order-preserving.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialInformation {
    pub deltas: Vec<Point>,
}

/// Parameters for feature extraction. `d_c` must exceed `d_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    /// Risk radius in meters.
    pub d_r: f64,
    /// Compass radius in meters.
    pub d_c: f64,
    /// Number of compass sectors.
    pub k: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            d_r: 2.0,
            d_c: 5.0,
            k: 8,
        }
    }
}

/// Risk scalar and compass vector at one timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocialFeatures {
    pub risk: f64,
    pub compass: Vec<f64>,
}

pub fn social_information(agent: Pose, pedestrians: &[Pose]) -> SocialInformation {
    SocialInformation {
        deltas: pedestrians
            .iter()
            .map(|p| p.position().sub(agent.position()))
            .collect(),
    }
}

/// `clamp(1 - min_i ||delta_i|| / d_r, 0, 1)`; 0 when nobody is around.
pub fn risk(si: &SocialInformation, d_r: f64) -> f64 {
    assert!(d_r > 0.0, "d_r must be positive");
    si.deltas
        .iter()
        .map(|d| (1.0 - d.norm() / d_r).clamp(0.0, 1.0))
        .fold(0.0, f64::max)
}

/// Bearing of `delta` measured clockwise from the agent heading, in `[0, tau)`.
pub fn clockwise_bearing(agent_theta: f64, delta: Point) -> f64 {
    (agent_theta - delta.y.atan2(delta.x)).rem_euclid(TAU)
}

/// Per-sector risk within radius `d_c`. Sector 0 starts at the heading
/// ("north") and sectors are unrolled clockwise; sector `j` covers bearings
/// in `[tau*j/k, tau*(j+1)/k)`. Empty sectors read 0.
pub fn social_compass(si: &SocialInformation, agent_theta: f64, d_c: f64, k: usize) -> Vec<f64> {
    assert!(k >= 2, "need at least 2 sectors");
    assert!(d_c > 0.0, "d_c must be positive");
    let mut compass = vec![0.0f64; k];
    for delta in &si.deltas {
        let bearing = clockwise_bearing(agent_theta, *delta);
        let sector = ((bearing / TAU * k as f64).floor() as usize).min(k - 1);
        let value = (1.0 - delta.norm() / d_c).clamp(0.0, 1.0);
        compass[sector] = compass[sector].max(value);
    }
    compass
}

/// Risk and compass for one timestep of simulator ground truth.
pub fn extract(agent: Pose, pedestrians: &[Pose], params: &FeatureParams) -> SocialFeatures {
    assert!(
        params.d_c > params.d_r,
        "compass radius must exceed risk radius"
    );
    let si = social_information(agent, pedestrians);
    SocialFeatures {
        risk: risk(&si, params.d_r),
        compass: social_compass(&si, agent.theta, params.d_c, params.k),
    }
}
