//! Tri-state occupancy grid and its plain-text file format.

use std::fmt::Write as _;

use crate::geometry::Point;
use crate::world::WorldError;

/// Default cell side: 5 cm.
pub const DEFAULT_CELL_SIZE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    pub fn to_char(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Occupied => '#',
            Cell::Unknown => '?',
        }
    }

    pub fn from_char(c: char) -> Option<Cell> {
        match c {
            '.' => Some(Cell::Free),
            '#' => Some(Cell::Occupied),
            '?' => Some(Cell::Unknown),
            _ => None,
        }
    }
}

/// Integer cell coordinates (column, row). Row 0 is the lowest y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub col: i64,
    pub row: i64,
}

impl CellIndex {
    pub const fn new(col: i64, row: i64) -> Self {
        Self { col, row }
    }
}

/// Row-major grid of [`Cell`] labels at a fixed metric resolution.
///
/// Cell `(col, row)` covers `[origin.x + col*cs, origin.x + (col+1)*cs)` in x
/// and the analogous interval in y.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    origin: Point,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        cell_size: f64,
        origin: Point,
        fill: Cell,
    ) -> Result<Self, WorldError> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(WorldError::InvalidCellSize(cell_size));
        }
        Ok(Self {
            width,
            height,
            cell_size,
            origin,
            cells: vec![fill; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn in_bounds(&self, c: CellIndex) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as usize) < self.width && (c.row as usize) < self.height
    }

    #[inline]
    pub fn index(&self, c: CellIndex) -> usize {
        c.row as usize * self.width + c.col as usize
    }

    #[inline]
    pub fn cell_at_index(&self, i: usize) -> CellIndex {
        CellIndex::new((i % self.width) as i64, (i / self.width) as i64)
    }

    /// Label of `c`, or `None` outside the grid.
    #[inline]
    pub fn get(&self, c: CellIndex) -> Option<Cell> {
        if self.in_bounds(c) {
            Some(self.cells[self.index(c)])
        } else {
            None
        }
    }

    /// Label of `c`; cells outside the grid read as occupied.
    #[inline]
    pub fn get_or_occupied(&self, c: CellIndex) -> Cell {
        self.get(c).unwrap_or(Cell::Occupied)
    }

    pub fn set(&mut self, c: CellIndex, v: Cell) {
        if self.in_bounds(c) {
            let i = self.index(c);
            self.cells[i] = v;
        }
    }

    pub fn is_free(&self, c: CellIndex) -> bool {
        self.get(c) == Some(Cell::Free)
    }

    pub fn world_to_cell(&self, p: &Point) -> CellIndex {
        CellIndex::new(
            ((p.x - self.origin.x) / self.cell_size).floor() as i64,
            ((p.y - self.origin.y) / self.cell_size).floor() as i64,
        )
    }

    pub fn cell_center(&self, c: CellIndex) -> Point {
        Point::new(
            self.origin.x + (c.col as f64 + 0.5) * self.cell_size,
            self.origin.y + (c.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Metric extent `(min, max)` of the grid.
    pub fn extent(&self) -> (Point, Point) {
        (
            self.origin,
            Point::new(
                self.origin.x + self.width as f64 * self.cell_size,
                self.origin.y + self.height as f64 * self.cell_size,
            ),
        )
    }

    pub fn count(&self, label: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == label).count()
    }

    /// Distance from `p` to the closest point of any OCCUPIED cell (or of the
    /// area outside the grid) within `search_radius`; `search_radius` when
    /// nothing is that close.
    pub fn obstacle_distance(&self, p: &Point, search_radius: f64) -> f64 {
        let cs = self.cell_size;
        let lo = self.world_to_cell(&Point::new(p.x - search_radius, p.y - search_radius));
        let hi = self.world_to_cell(&Point::new(p.x + search_radius, p.y + search_radius));
        let mut best = search_radius;
        for row in lo.row..=hi.row {
            for col in lo.col..=hi.col {
                let c = CellIndex::new(col, row);
                if self.get_or_occupied(c) != Cell::Occupied {
                    continue;
                }
                let min_x = self.origin.x + col as f64 * cs;
                let min_y = self.origin.y + row as f64 * cs;
                let dx = (min_x - p.x).max(0.0).max(p.x - (min_x + cs));
                let dy = (min_y - p.y).max(0.0).max(p.y - (min_y + cs));
                let d = dx.hypot(dy);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// True when a disc of `radius` centered at `p` overlaps no occupied cell.
    pub fn has_clearance(&self, p: &Point, radius: f64) -> bool {
        self.obstacle_distance(p, radius + self.cell_size) >= radius
    }

    /// Boolean mask of FREE cells whose center has at least `radius` clearance.
    pub fn clearance_mask(&self, radius: f64) -> Vec<bool> {
        let mut mask: Vec<bool> = self.cells.iter().map(|&c| c == Cell::Free).collect();
        let cs = self.cell_size;
        // A cell center is too close when its distance to an occupied box is < radius.
        // Boxes are axis aligned with half-size cs/2 around the occupied center.
        let reach = ((radius + cs) / cs).ceil() as i64;
        let w = self.width as i64;
        let h = self.height as i64;
        for (i, &label) in self.cells.iter().enumerate() {
            if label != Cell::Occupied {
                continue;
            }
            let oc = self.cell_at_index(i);
            for dr in -reach..=reach {
                for dc in -reach..=reach {
                    let (col, row) = (oc.col + dc, oc.row + dr);
                    if col < 0 || row < 0 || col >= w || row >= h {
                        continue;
                    }
                    let gx = ((dc.abs() as f64) - 0.5).max(0.0) * cs;
                    let gy = ((dr.abs() as f64) - 0.5).max(0.0) * cs;
                    if gx.hypot(gy) < radius {
                        mask[(row * w + col) as usize] = false;
                    }
                }
            }
        }
        // Grid border counts as obstacle.
        for row in 0..h {
            for col in 0..w {
                let c = self.cell_center(CellIndex::new(col, row));
                let (lo, hi) = self.extent();
                let edge = (c.x - lo.x).min(hi.x - c.x).min(c.y - lo.y).min(hi.y - c.y);
                if edge < radius {
                    mask[(row * w + col) as usize] = false;
                }
            }
        }
        mask
    }

    /// Labels FREE connected components (8-connected without corner cutting
    /// would change nothing for axis-aligned walls; 4-connectivity is used).
    /// Returns `(component id per cell or u32::MAX, component count)`.
    pub fn free_components(&self) -> (Vec<u32>, u32) {
        let mut comp = vec![u32::MAX; self.cells.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.cells.len() {
            if self.cells[start] != Cell::Free || comp[start] != u32::MAX {
                continue;
            }
            comp[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let c = self.cell_at_index(i);
                for (dc, dr) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let n = CellIndex::new(c.col + dc, c.row + dr);
                    if self.is_free(n) {
                        let j = self.index(n);
                        if comp[j] == u32::MAX {
                            comp[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
            next += 1;
        }
        (comp, next)
    }

    /// Serializes to the `P-OCC` text format: a header line followed by one
    /// line per row (row 0 first) of `.`, `#`, `?` characters.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() + self.height + 64);
        let _ = writeln!(
            out,
            "P-OCC {} {} {} {} {}",
            self.width, self.height, self.cell_size, self.origin.x, self.origin.y
        );
        for row in 0..self.height {
            for col in 0..self.width {
                out.push(self.cells[row * self.width + col].to_char());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, WorldError> {
        let mut lines = text.split('\n');
        let header = lines
            .next()
            .ok_or_else(|| WorldError::GridFormat("empty input".into()))?;
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 6 || parts[0] != "P-OCC" {
            return Err(WorldError::GridFormat(format!("bad header `{header}`")));
        }
        let num = |s: &str, what: &str| -> Result<f64, WorldError> {
            s.parse::<f64>()
                .map_err(|_| WorldError::GridFormat(format!("bad {what} `{s}`")))
        };
        let width: usize = parts[1]
            .parse()
            .map_err(|_| WorldError::GridFormat(format!("bad width `{}`", parts[1])))?;
        let height: usize = parts[2]
            .parse()
            .map_err(|_| WorldError::GridFormat(format!("bad height `{}`", parts[2])))?;
        let cell_size = num(parts[3], "cell size")?;
        let origin = Point::new(num(parts[4], "origin x")?, num(parts[5], "origin y")?);
        let mut grid = OccupancyGrid::new(width, height, cell_size, origin, Cell::Unknown)?;
        for row in 0..height {
            let line = lines
                .next()
                .ok_or_else(|| WorldError::GridFormat(format!("missing row {row}")))?;
            if line.chars().count() != width {
                return Err(WorldError::GridFormat(format!(
                    "row {row} has {} cells, expected {width}",
                    line.chars().count()
                )));
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::from_char(ch).ok_or_else(|| {
                    WorldError::GridFormat(format!("bad cell `{ch}` at row {row}"))
                })?;
                grid.cells[row * width + col] = cell;
            }
        }
        match (lines.next(), lines.next()) {
            (Some(""), None) => Ok(grid),
            _ => Err(WorldError::GridFormat("trailing data after last row".into())),
        }
    }
}
