//! Encounter-based evaluation protocol: extract the sub-intervals of an
//! episode in which one pedestrian dominates the agent's navigation context,
//! classify each into one of four interaction classes via geometric
//! inclusion rules, and compute per-class statistics over log sets.

mod analysis;
mod geometry;
mod metrics;

pub use analysis::{
    analyze_log, blind, classify, extract_encounters, Encounter, EncounterSpan, LogAnalysis,
};
pub use geometry::{general_direction, paths_intersect};
pub use metrics::{encounter_metrics, ClassStats, CompletionCurves, EncounterReport};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Thresholds for encounter extraction and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncounterParams {
    /// Minimum encounter duration `t2 - t1`, in timesteps.
    pub t_min: u32,
    /// Spatial constraint: geodesic agent-person distance bound (meters).
    pub d_max: f64,
    /// Heading-constraint window length, in timesteps.
    pub t_front: u32,
    /// Heading-constraint half-angle (radians).
    pub theta_max: f64,
    /// Slack around the direction-difference targets (radians).
    pub delta_slack: f64,
    /// Visible-prefix window for the frontal/intersection/following rules.
    pub t_view: u32,
    /// Occluded-prefix window for the blind-corner rule.
    pub t_blind: u32,
    /// Agent field of view (radians).
    pub fov: f64,
    /// Maximum sight distance (meters).
    pub sight_range: f64,
    /// Minimum net displacement for a general direction to be defined (meters).
    pub min_displacement: f64,
}

impl Default for EncounterParams {
    fn default() -> Self {
        EncounterParams {
            t_min: 10,
            d_max: 3.0,
            t_front: 5,
            theta_max: PI / 3.0,
            delta_slack: PI / 6.0,
            t_view: 5,
            t_blind: 5,
            fov: PI / 2.0,
            sight_range: 5.0,
            min_displacement: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
pub enum EncounterClass {
    FrontalApproach,
    Intersection,
    BlindCorner,
    PersonFollowing,
    Other,
}

impl EncounterClass {
    pub const ALL: [EncounterClass; 5] = [
        EncounterClass::FrontalApproach,
        EncounterClass::Intersection,
        EncounterClass::BlindCorner,
        EncounterClass::PersonFollowing,
        EncounterClass::Other,
    ];
}

impl std::fmt::Display for EncounterClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EncounterClass::FrontalApproach => "FrontalApproach",
            EncounterClass::Intersection => "Intersection",
            EncounterClass::BlindCorner => "BlindCorner",
            EncounterClass::PersonFollowing => "PersonFollowing",
            EncounterClass::Other => "Other",
        };
        f.write_str(name)
    }
}
