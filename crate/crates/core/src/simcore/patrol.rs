use super::{PedestrianSpec, SimError};
use crate::world::{shortest_path, OccupancyGrid, Point, Pose};

/// Precomputed patrol geometry: the start-end shortest path as a polyline
/// with cumulative arc lengths, traversed back and forth as a triangle wave.
#[derive(Debug, Clone)]
pub struct Patrol {
    polyline: Vec<Point>,
    cumlen: Vec<f64>,
    length: f64,
    speed: f64,
    phase: f64,
}

impl Patrol {
    pub fn new(spec: &PedestrianSpec, grid: &OccupancyGrid) -> Result<Self, SimError> {
        let path = shortest_path(grid, spec.start, spec.end)?
            .ok_or(SimError::UnreachablePatrol)?;
        // use the exact endpoints, with the interior cell centers in between
        let mut polyline = vec![spec.start];
        if path.waypoints.len() > 2 {
            polyline.extend_from_slice(&path.waypoints[1..path.waypoints.len() - 1]);
        }
        polyline.push(spec.end);
        polyline.dedup_by(|a, b| crate::world::euclidean_distance(*a, *b) < 1e-12);

        let mut cumlen = vec![0.0];
        for w in polyline.windows(2) {
            let d = crate::world::euclidean_distance(w[0], w[1]);
            cumlen.push(cumlen.last().unwrap() + d);
        }
        let length = *cumlen.last().unwrap();
        Ok(Patrol {
            polyline,
            cumlen,
            length,
            speed: spec.speed,
            phase: spec.phase,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Pose after `t` timesteps of `dt` seconds each: triangle-wave arc
    /// length along the polyline, heading along the current direction of
    /// motion.
    pub fn pose_at(&self, t: u32, dt: f64) -> Pose {
        self.pose_at_time(t as f64 * dt)
    }

    pub fn pose_at_time(&self, time: f64) -> Pose {
        if self.length < 1e-12 {
            let p = self.polyline[0];
            return Pose::new(p.x, p.y, 0.0);
        }
        let period = 2.0 * self.length;
        let s = (self.phase * period + self.speed * time).rem_euclid(period);
        let (d, forward) = if s <= self.length {
            (s, true)
        } else {
            (period - s, false)
        };

        // segment containing arc length d
        let mut i = 0;
        while i + 2 < self.cumlen.len() && self.cumlen[i + 1] < d {
            i += 1;
        }
        let seg = self.cumlen[i + 1] - self.cumlen[i];
        let u = if seg > 0.0 { (d - self.cumlen[i]) / seg } else { 0.0 };
        let (a, b) = (self.polyline[i], self.polyline[i + 1]);
        let pos = Point::new(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y));
        let dir = if forward {
            (b.y - a.y).atan2(b.x - a.x)
        } else {
            (a.y - b.y).atan2(a.x - b.x)
        };
        Pose::new(pos.x, pos.y, dir)
    }
}

/// Pose of a patrolling pedestrian after `t` timesteps.
pub fn pedestrian_position(
    spec: &PedestrianSpec,
    grid: &OccupancyGrid,
    t: u32,
    dt: f64,
) -> Result<Pose, SimError> {
    Ok(Patrol::new(spec, grid)?.pose_at(t, dt))
}
