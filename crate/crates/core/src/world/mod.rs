//! Static environment representation: occupancy grids, poses, geodesic
//! distance, shortest paths, and line-of-sight queries.
//!
//! All queries treat everything outside the grid as solid wall, so no path
//! or sight line ever leaves the world. Grids are immutable after load and
//! all operations here are pure functions of their inputs.

mod grid;
mod mapgen;
mod los;
mod path;

pub use grid::{Cell, MapIoError, OccupancyGrid};
pub use mapgen::{free_space_connected, generate_map};
pub use los::{line_of_sight, raycast};
pub use path::{geodesic_distance, shortest_path, GeodesicField, PathResult};

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Wraps an angle to the half-open interval `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = (a + PI).rem_euclid(two_pi) - PI;
    // rem_euclid can land exactly on +pi for inputs like -pi - eps
    if w >= PI {
        w -= two_pi;
    }
    w
}

/// A point in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

/// Straight-line distance between two points in meters.
pub fn euclidean_distance(a: Point, b: Point) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// An SE(2) pose: 2D translation plus heading.
///
/// Heading follows the world convention east = 0, counterclockwise positive,
/// and is kept normalized to `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("point ({x}, {y}) is outside the grid bounds")]
    OutOfBounds { x: f64, y: f64 },
    #[error("no free cell within {radius} cells of point ({x}, {y})")]
    NoNearbyFreeCell { x: f64, y: f64, radius: usize },
}
