use super::{OccupancyGrid, Point, WorldError};

// Tolerance, in cell units, for deciding a coordinate sits exactly on a
// cell boundary.
const BOUNDARY_EPS: f64 = 1e-9;

/// Cells (as signed column/row pairs) whose closed unit square contains the
/// point `(fx, fy)` given in cell units. Up to 4 cells when the point lies
/// on a corner.
fn closed_cells_at(fx: f64, fy: f64) -> Vec<(i64, i64)> {
    let axis = |v: f64| -> Vec<i64> {
        let near = v.round();
        if (v - near).abs() < BOUNDARY_EPS {
            vec![near as i64 - 1, near as i64]
        } else {
            vec![v.floor() as i64]
        }
    };
    let mut out = Vec::with_capacity(4);
    for &c in &axis(fx) {
        for &r in &axis(fy) {
            out.push((c, r));
        }
    }
    out
}

/// Every grid cell the closed segment `from -> to` touches, including cells
/// only grazed at a corner. Cells outside the grid are dropped (both
/// endpoints are required in bounds, so the segment never passes through
/// the outside).
fn supercover_cells(grid: &OccupancyGrid, from: Point, to: Point) -> Vec<(i64, i64)> {
    let res = grid.resolution();
    let (x0, y0) = (from.x / res, from.y / res);
    let (x1, y1) = (to.x / res, to.y / res);
    let (dx, dy) = (x1 - x0, y1 - y0);

    // segment parameters of every crossing of an integer grid line,
    // plus the endpoints
    let mut ts = vec![0.0, 1.0];
    let mut crossings = |p0: f64, d: f64| {
        if d.abs() < BOUNDARY_EPS {
            return;
        }
        let (lo, hi) = if d > 0.0 { (p0, p0 + d) } else { (p0 + d, p0) };
        let mut k = lo.ceil();
        while k <= hi {
            let t = (k - p0) / d;
            if (0.0..=1.0).contains(&t) {
                ts.push(t);
            }
            k += 1.0;
        }
    };
    crossings(x0, dx);
    crossings(y0, dy);
    ts.sort_by(f64::total_cmp);

    let mut cells = Vec::new();
    let mut push = |c: i64, r: i64| {
        if c >= 0 && r >= 0 && c < grid.width() as i64 && r < grid.height() as i64 {
            cells.push((c, r));
        }
    };
    for &t in &ts {
        for (c, r) in closed_cells_at(x0 + t * dx, y0 + t * dy) {
            push(c, r);
        }
    }
    // interior of each sub-interval lies strictly inside one cell
    for w in ts.windows(2) {
        let tm = 0.5 * (w[0] + w[1]);
        let (fx, fy) = (x0 + tm * dx, y0 + tm * dy);
        push(fx.floor() as i64, fy.floor() as i64);
    }
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// True iff the segment `from -> to` crosses no occupied cell. Conservative:
/// any touched occupied cell, including corner grazes, blocks sight.
pub fn line_of_sight(grid: &OccupancyGrid, from: Point, to: Point) -> Result<bool, WorldError> {
    for p in [from, to] {
        if !grid.in_bounds(p) {
            return Err(WorldError::OutOfBounds { x: p.x, y: p.y });
        }
    }
    Ok(supercover_cells(grid, from, to)
        .into_iter()
        .all(|(c, r)| !grid.occupied_signed(c, r)))
}

/// Range along a ray from `from` at world angle `angle` until the first
/// occupied cell (or the grid edge), capped at `max_range`. Marched at a
/// tenth of the cell size; used for the agent's range observation.
pub fn raycast(grid: &OccupancyGrid, from: Point, angle: f64, max_range: f64) -> f64 {
    let step = grid.resolution() / 10.0;
    let (dx, dy) = (angle.cos(), angle.sin());
    let n = (max_range / step).ceil() as usize;
    for i in 1..=n {
        let d = (i as f64 * step).min(max_range);
        let fx = (from.x + d * dx) / grid.resolution();
        let fy = (from.y + d * dy) / grid.resolution();
        if grid.occupied_signed(fx.floor() as i64, fy.floor() as i64) {
            return d;
        }
    }
    max_range
}
