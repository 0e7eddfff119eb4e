use super::{Point, WorldError};
use thiserror::Error;

/// A cell address: column `c`, row `r`, both counted from the low-coordinate
/// corner (row 0 is the y = 0 side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub c: usize,
    pub r: usize,
}

impl Cell {
    pub fn new(c: usize, r: usize) -> Self {
        Cell { c, r }
    }
}

/// Discretized free/occupied map with metric resolution.
///
/// Cells are stored row-major (`index = r * width + c`). Anything outside
/// the grid is treated as occupied, so the grid border acts as an implicit
/// wall for every query.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<bool>,
}

#[derive(Debug, Error)]
pub enum MapIoError {
    #[error("map header must be `W H RES`, got {0:?}")]
    BadHeader(String),
    #[error("map line {line}: expected {expected} characters, got {got}")]
    BadRowLength {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("map line {line}: unexpected character {ch:?} (expected `#` or `.`)")]
    BadChar { line: usize, ch: char },
    #[error("expected {expected} map rows, got {got}")]
    MissingRows { expected: usize, got: usize },
    #[error("invalid grid dimensions {width}x{height} with resolution {resolution}")]
    BadDimensions {
        width: usize,
        height: usize,
        resolution: f64,
    },
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        cells: Vec<bool>,
    ) -> Result<Self, MapIoError> {
        if width == 0 || height == 0 || !(resolution > 0.0) || cells.len() != width * height {
            return Err(MapIoError::BadDimensions {
                width,
                height,
                resolution,
            });
        }
        Ok(OccupancyGrid {
            width,
            height,
            resolution,
            cells,
        })
    }

    /// All-free grid of the given size.
    pub fn empty(width: usize, height: usize, resolution: f64) -> Self {
        OccupancyGrid::new(width, height, resolution, vec![false; width * height])
            .expect("valid dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        let idx = self.index(cell);
        self.cells[idx] = occupied;
    }

    pub fn index(&self, cell: Cell) -> usize {
        debug_assert!(cell.c < self.width && cell.r < self.height);
        cell.r * self.width + cell.c
    }

    /// Occupancy of a cell addressed by signed coordinates; everything
    /// outside the grid counts as occupied.
    pub fn occupied_signed(&self, c: i64, r: i64) -> bool {
        if c < 0 || r < 0 || c >= self.width as i64 || r >= self.height as i64 {
            return true;
        }
        self.cells[r as usize * self.width + c as usize]
    }

    pub fn occupied(&self, cell: Cell) -> bool {
        self.occupied_signed(cell.c as i64, cell.r as i64)
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        !self.occupied(cell)
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= self.width as f64 * self.resolution
            && p.y <= self.height as f64 * self.resolution
    }

    /// Maps a point to its containing cell by `floor(coord / resolution)`,
    /// clamped so points exactly on the high edge stay inside.
    pub fn cell_of(&self, p: Point) -> Result<Cell, WorldError> {
        if !self.in_bounds(p) || !p.x.is_finite() || !p.y.is_finite() {
            return Err(WorldError::OutOfBounds { x: p.x, y: p.y });
        }
        let c = ((p.x / self.resolution).floor() as usize).min(self.width - 1);
        let r = ((p.y / self.resolution).floor() as usize).min(self.height - 1);
        Ok(Cell::new(c, r))
    }

    pub fn cell_center(&self, cell: Cell) -> Point {
        Point::new(
            (cell.c as f64 + 0.5) * self.resolution,
            (cell.r as f64 + 0.5) * self.resolution,
        )
    }

    /// Resolves a query point to a free cell: the containing cell if free,
    /// otherwise the nearest free cell within a Chebyshev radius of 2
    /// (ties broken by lower row-major index).
    pub fn snap_to_free(&self, p: Point) -> Result<Cell, WorldError> {
        let cell = self.cell_of(p)?;
        if self.is_free(cell) {
            return Ok(cell);
        }
        let radius = 2usize;
        let mut best: Option<(f64, Cell)> = None;
        for r in cell.r.saturating_sub(radius)..=(cell.r + radius).min(self.height - 1) {
            for c in cell.c.saturating_sub(radius)..=(cell.c + radius).min(self.width - 1) {
                let cand = Cell::new(c, r);
                if !self.is_free(cand) {
                    continue;
                }
                let d = super::euclidean_distance(p, self.cell_center(cand));
                let better = match best {
                    None => true,
                    Some((bd, bc)) => d < bd || (d == bd && self.index(cand) < self.index(bc)),
                };
                if better {
                    best = Some((d, cand));
                }
            }
        }
        best.map(|(_, c)| c).ok_or(WorldError::NoNearbyFreeCell {
            x: p.x,
            y: p.y,
            radius,
        })
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |r| {
            (0..self.width)
                .map(move |c| Cell::new(c, r))
                .filter(move |&cell| self.is_free(cell))
        })
    }

    /// Parses the plain-text map format: a `W H RES` header followed by `H`
    /// rows of `#` (occupied) and `.` (free) characters. Row 0 of the text
    /// is the top of the map (the high-y side).
    pub fn parse(text: &str) -> Result<Self, MapIoError> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(MapIoError::BadHeader(header.to_string()));
        }
        let width: usize = parts[0]
            .parse()
            .map_err(|_| MapIoError::BadHeader(header.to_string()))?;
        let height: usize = parts[1]
            .parse()
            .map_err(|_| MapIoError::BadHeader(header.to_string()))?;
        let resolution: f64 = parts[2]
            .parse()
            .map_err(|_| MapIoError::BadHeader(header.to_string()))?;

        let mut cells = vec![false; width * height];
        let mut rows_read = 0usize;
        for (i, line) in lines.enumerate() {
            if i >= height {
                break;
            }
            if line.chars().count() != width {
                return Err(MapIoError::BadRowLength {
                    line: i + 2,
                    expected: width,
                    got: line.chars().count(),
                });
            }
            let r = height - 1 - i; // text row 0 is the high-y side
            for (c, ch) in line.chars().enumerate() {
                let occ = match ch {
                    '#' => true,
                    '.' => false,
                    other => return Err(MapIoError::BadChar { line: i + 2, ch: other }),
                };
                cells[r * width + c] = occ;
            }
            rows_read += 1;
        }
        if rows_read != height {
            return Err(MapIoError::MissingRows {
                expected: height,
                got: rows_read,
            });
        }
        OccupancyGrid::new(width, height, resolution, cells)
    }

    /// Serializes to the canonical text form; `parse(write(g)) == g` for
    /// every grid, and canonical files round-trip bit-exactly.
    pub fn write(&self) -> String {
        let mut out = format!("{} {} {}\n", self.width, self.height, self.resolution);
        for i in 0..self.height {
            let r = self.height - 1 - i;
            for c in 0..self.width {
                out.push(if self.cells[r * self.width + c] { '#' } else { '.' });
            }
            out.push('\n');
        }
        out
    }
}
