use crate::world::Point;

/// Angle of the net displacement over a trajectory segment, or `None` when
/// the segment moved less than `min_displacement` meters overall.
pub fn general_direction(points: &[Point], min_displacement: f64) -> Option<f64> {
    let (first, last) = (points.first()?, points.last()?);
    let d = last.sub(*first);
    if d.norm() < min_displacement {
        None
    } else {
        Some(d.y.atan2(d.x))
    }
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    orient(a, b, p) == 0.0
        && p.x >= a.x.min(b.x)
        && p.x <= a.x.max(b.x)
        && p.y >= a.y.min(b.y)
        && p.y <= a.y.max(b.y)
}

/// Proper or touching intersection of two closed segments.
pub fn segments_intersect(a1: Point, a2: Point, b1: Point, b2: Point) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(b1, b2, a1) || on_segment(b1, b2, a2) || on_segment(a1, a2, b1) || on_segment(a1, a2, b2)
}

/// True iff two piecewise-linear trajectories intersect anywhere (proper or
/// touching). Quadratic in the number of segments.
pub fn paths_intersect(a: &[Point], b: &[Point]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    // degenerate single-point trajectories become zero-length segments
    let segs = |pts: &[Point]| -> Vec<(Point, Point)> {
        if pts.len() == 1 {
            vec![(pts[0], pts[0])]
        } else {
            pts.windows(2).map(|w| (w[0], w[1])).collect()
        }
    };
    for (a1, a2) in segs(a) {
        for (b1, b2) in segs(b) {
            if segments_intersect(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}
