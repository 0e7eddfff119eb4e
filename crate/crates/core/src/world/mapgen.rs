use super::{Cell, OccupancyGrid};
use rand::Rng;

/// Minimum clearance, in cells, kept between obstacles (and to the border)
/// so every passage stays physically traversable by a disc-shaped agent.
const OBSTACLE_GAP: usize = 5;

const PLACEMENT_ATTEMPTS: usize = 200;

/// Generates a map with randomly placed rectangular obstacles. Obstacles
/// keep a fixed gap from the border and from each other, and any placement
/// that would disconnect the free space is skipped, so the result may hold
/// fewer than `n_obstacles` rectangles on crowded inputs.
pub fn generate_map(
    width: usize,
    height: usize,
    resolution: f64,
    n_obstacles: usize,
    rng: &mut impl Rng,
) -> OccupancyGrid {
    assert!(width > 2 * OBSTACLE_GAP + 2 && height > 2 * OBSTACLE_GAP + 2);
    let mut grid = OccupancyGrid::empty(width, height, resolution);
    let mut placed = 0;
    let mut attempts = 0;
    while placed < n_obstacles && attempts < PLACEMENT_ATTEMPTS {
        attempts += 1;
        let w = rng.gen_range(2..=6.min(width - 2 * OBSTACLE_GAP - 1));
        let h = rng.gen_range(2..=6.min(height - 2 * OBSTACLE_GAP - 1));
        let c0 = rng.gen_range(OBSTACLE_GAP..width - OBSTACLE_GAP - w);
        let r0 = rng.gen_range(OBSTACLE_GAP..height - OBSTACLE_GAP - h);

        // reject placements whose gap-expanded footprint touches an
        // existing obstacle
        let clear = (r0.saturating_sub(OBSTACLE_GAP)..(r0 + h + OBSTACLE_GAP).min(height))
            .all(|r| {
                (c0.saturating_sub(OBSTACLE_GAP)..(c0 + w + OBSTACLE_GAP).min(width))
                    .all(|c| grid.is_free(Cell::new(c, r)))
            });
        if !clear {
            continue;
        }
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                grid.set_occupied(Cell::new(c, r), true);
            }
        }
        if free_space_connected(&grid) {
            placed += 1;
        } else {
            for r in r0..r0 + h {
                for c in c0..c0 + w {
                    grid.set_occupied(Cell::new(c, r), false);
                }
            }
        }
    }
    grid
}

/// All free cells form one 4-connected component.
pub fn free_space_connected(grid: &OccupancyGrid) -> bool {
    let (w, h) = (grid.width(), grid.height());
    let total = grid.free_cells().count();
    let start = match grid.free_cells().next() {
        Some(c) => c,
        None => return false,
    };
    let mut seen = vec![false; w * h];
    let mut stack = vec![start];
    seen[grid.index(start)] = true;
    let mut reached = 0;
    while let Some(cell) = stack.pop() {
        reached += 1;
        let (c, r) = (cell.c as i64, cell.r as i64);
        for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nc, nr) = (c + dc, r + dr);
            if !grid.occupied_signed(nc, nr) {
                let next = Cell::new(nc as usize, nr as usize);
                let idx = grid.index(next);
                if !seen[idx] {
                    seen[idx] = true;
                    stack.push(next);
                }
            }
        }
    }
    reached == total
}
