use super::{Cell, OccupancyGrid, Point, WorldError};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

/// A shortest path between two cells as a sequence of cell-center waypoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub waypoints: Vec<Point>,
    /// Total metric length (axial step = resolution, diagonal = resolution * sqrt 2).
    pub length: f64,
}

/// Step cost expressed as counts of axial and diagonal moves, so that cost
/// comparison is independent of summation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct StepCost {
    axial: u32,
    diagonal: u32,
}

impl StepCost {
    const ZERO: StepCost = StepCost { axial: 0, diagonal: 0 };

    fn key(self) -> f64 {
        self.axial as f64 + self.diagonal as f64 * SQRT_2
    }

    fn meters(self, resolution: f64) -> f64 {
        self.key() * resolution
    }
}

struct HeapEntry {
    cost: StepCost,
    cell_index: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: reverse so the lowest cost pops first,
        // ties broken by lower cell index for reproducible paths.
        self.cost
            .key()
            .total_cmp(&other.cost.key())
            .then(self.cell_index.cmp(&other.cell_index))
            .reverse()
    }
}

const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Dijkstra over the 8-connected free-cell graph. Diagonal moves are
/// forbidden when either adjacent axial cell is occupied (no corner
/// cutting). Returns per-cell best costs and predecessor indices.
fn dijkstra(grid: &OccupancyGrid, source: Cell) -> (Vec<Option<StepCost>>, Vec<usize>) {
    let n = grid.width() * grid.height();
    let mut best: Vec<Option<StepCost>> = vec![None; n];
    let mut prev: Vec<usize> = vec![usize::MAX; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();

    let src_idx = grid.index(source);
    best[src_idx] = Some(StepCost::ZERO);
    heap.push(HeapEntry {
        cost: StepCost::ZERO,
        cell_index: src_idx,
    });

    while let Some(HeapEntry { cost, cell_index }) = heap.pop() {
        if done[cell_index] {
            continue;
        }
        done[cell_index] = true;
        let c = (cell_index % grid.width()) as i64;
        let r = (cell_index / grid.width()) as i64;

        for (dc, dr) in NEIGHBORS {
            let (nc, nr) = (c + dc, r + dr);
            if grid.occupied_signed(nc, nr) {
                continue;
            }
            let diagonal = dc != 0 && dr != 0;
            if diagonal && (grid.occupied_signed(c + dc, r) || grid.occupied_signed(c, r + dr)) {
                continue;
            }
            let next = StepCost {
                axial: cost.axial + u32::from(!diagonal),
                diagonal: cost.diagonal + u32::from(diagonal),
            };
            let next_index = nr as usize * grid.width() + nc as usize;
            let improves = match best[next_index] {
                None => true,
                Some(b) => next.key() < b.key(),
            };
            if improves {
                best[next_index] = Some(next);
                prev[next_index] = cell_index;
                heap.push(HeapEntry {
                    cost: next,
                    cell_index: next_index,
                });
            }
        }
    }
    (best, prev)
}

/// Single-source geodesic distance field, for callers that query many
/// targets against one source (reward shaping, encounter extraction).
/// Values agree exactly with [`geodesic_distance`] on the same grid.
pub struct GeodesicField<'a> {
    grid: &'a OccupancyGrid,
    source: Cell,
    best: Vec<Option<StepCost>>,
}

impl<'a> GeodesicField<'a> {
    pub fn new(grid: &'a OccupancyGrid, source: Point) -> Result<Self, WorldError> {
        let source = grid.snap_to_free(source)?;
        let (best, _) = dijkstra(grid, source);
        Ok(GeodesicField { grid, source, best })
    }

    /// Geodesic distance from the source to `p`; `None` when unreachable.
    pub fn distance(&self, p: Point) -> Result<Option<f64>, WorldError> {
        let cell = self.grid.snap_to_free(p)?;
        if cell == self.source {
            return Ok(Some(0.0));
        }
        Ok(self.best[self.grid.index(cell)].map(|c| c.meters(self.grid.resolution())))
    }
}

fn resolve_endpoints(
    grid: &OccupancyGrid,
    a: Point,
    b: Point,
) -> Result<(Cell, Cell), WorldError> {
    Ok((grid.snap_to_free(a)?, grid.snap_to_free(b)?))
}

/// Length in meters of the shortest 8-connected path between the cells
/// containing `a` and `b`; `None` when no path exists.
pub fn geodesic_distance(
    grid: &OccupancyGrid,
    a: Point,
    b: Point,
) -> Result<Option<f64>, WorldError> {
    let (ca, cb) = resolve_endpoints(grid, a, b)?;
    if ca == cb {
        return Ok(Some(0.0));
    }
    let (best, _) = dijkstra(grid, ca);
    Ok(best[grid.index(cb)].map(|c| c.meters(grid.resolution())))
}

/// Waypoint sequence realizing [`geodesic_distance`], with deterministic
/// tie-breaking. `None` when unreachable.
pub fn shortest_path(
    grid: &OccupancyGrid,
    a: Point,
    b: Point,
) -> Result<Option<PathResult>, WorldError> {
    let (ca, cb) = resolve_endpoints(grid, a, b)?;
    if ca == cb {
        return Ok(Some(PathResult {
            waypoints: vec![grid.cell_center(ca)],
            length: 0.0,
        }));
    }
    let (best, prev) = dijkstra(grid, ca);
    let Some(cost) = best[grid.index(cb)] else {
        return Ok(None);
    };
    let mut cells = vec![grid.index(cb)];
    while *cells.last().unwrap() != grid.index(ca) {
        cells.push(prev[*cells.last().unwrap()]);
    }
    cells.reverse();
    let waypoints = cells
        .into_iter()
        .map(|i| grid.cell_center(Cell::new(i % grid.width(), i / grid.width())))
        .collect();
    Ok(Some(PathResult {
        waypoints,
        length: cost.meters(grid.resolution()),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::euclidean_distance;
    use approx::assert_relative_eq;

    #[test]
    fn straight_free_line() {
        let grid = OccupancyGrid::empty(10, 10, 0.1);
        let d = geodesic_distance(&grid, Point::new(0.0, 0.0), Point::new(0.5, 0.0))
            .unwrap()
            .unwrap();
        assert_relative_eq!(d, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn identity_is_zero() {
        let grid = OccupancyGrid::empty(10, 10, 0.1);
        let p = Point::new(0.33, 0.71);
        assert_eq!(geodesic_distance(&grid, p, p).unwrap(), Some(0.0));
        let path = shortest_path(&grid, p, p).unwrap().unwrap();
        assert_eq!(path.waypoints.len(), 1);
        assert_eq!(path.length, 0.0);
    }

    #[test]
    fn unreachable_across_full_wall() {
        let mut grid = OccupancyGrid::empty(10, 10, 0.1);
        for r in 0..10 {
            grid.set_occupied(Cell::new(5, r), true);
        }
        assert_eq!(
            geodesic_distance(&grid, Point::new(0.15, 0.15), Point::new(0.85, 0.15)).unwrap(),
            None
        );
        assert!(shortest_path(&grid, Point::new(0.15, 0.15), Point::new(0.85, 0.15))
            .unwrap()
            .is_none());
    }

    #[test]
    fn snaps_occupied_queries_and_rejects_far_ones() {
        let mut grid = OccupancyGrid::empty(10, 10, 0.1);
        grid.set_occupied(Cell::new(3, 3), true);
        // query from inside the blocked cell snaps to a free neighbor
        let d = geodesic_distance(&grid, Point::new(0.35, 0.35), Point::new(0.05, 0.05))
            .unwrap()
            .unwrap();
        assert!(d > 0.0);
        assert!(geodesic_distance(&grid, Point::new(1.5, 0.0), Point::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn corridor_path_is_collinear() {
        // 1-cell-high free corridor
        let mut grid = OccupancyGrid::empty(10, 3, 0.1);
        for c in 0..10 {
            grid.set_occupied(Cell::new(c, 0), true);
            grid.set_occupied(Cell::new(c, 2), true);
        }
        let path = shortest_path(&grid, Point::new(0.05, 0.15), Point::new(0.95, 0.15))
            .unwrap()
            .unwrap();
        assert!(path.waypoints.iter().all(|w| w.y == path.waypoints[0].y));
        assert_relative_eq!(
            path.length,
            euclidean_distance(path.waypoints[0], *path.waypoints.last().unwrap()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn no_corner_cutting() {
        // two diagonal blocks forming a pinch: the diagonal move through the
        // pinch must be rejected, forcing a detour
        let mut grid = OccupancyGrid::empty(3, 3, 1.0);
        grid.set_occupied(Cell::new(1, 0), true);
        grid.set_occupied(Cell::new(0, 1), true);
        assert_eq!(
            geodesic_distance(&grid, Point::new(0.5, 0.5), Point::new(1.5, 1.5)).unwrap(),
            None
        );
    }

    #[test]
    fn symmetry() {
        let mut grid = OccupancyGrid::empty(12, 12, 0.25);
        for (c, r) in [(3, 3), (3, 4), (4, 4), (7, 2), (6, 8), (5, 5)] {
            grid.set_occupied(Cell::new(c, r), true);
        }
        let a = Point::new(0.3, 0.3);
        let b = Point::new(2.7, 2.1);
        assert_eq!(
            geodesic_distance(&grid, a, b).unwrap(),
            geodesic_distance(&grid, b, a).unwrap()
        );
    }

    #[test]
    fn path_length_matches_geodesic_and_waypoints_are_8_adjacent() {
        let mut grid = OccupancyGrid::empty(10, 10, 0.1);
        // wall with one gap
        for r in 0..10 {
            if r != 4 {
                grid.set_occupied(Cell::new(5, r), true);
            }
        }
        let a = Point::new(0.05, 0.05);
        let b = Point::new(0.95, 0.95);
        let path = shortest_path(&grid, a, b).unwrap().unwrap();
        let geo = geodesic_distance(&grid, a, b).unwrap().unwrap();
        assert_eq!(path.length, geo);
        let mut sum = 0.0;
        for w in path.waypoints.windows(2) {
            let step = euclidean_distance(w[0], w[1]);
            assert!(step < 0.1 * SQRT_2 + 1e-9, "waypoints must be 8-adjacent");
            sum += step;
        }
        assert_relative_eq!(sum, path.length, epsilon = 1e-9);
    }
}
