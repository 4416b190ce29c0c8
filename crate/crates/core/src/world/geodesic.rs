//! Shortest paths on the 8-connected cell graph.
//!
//! Step costs are integers (straight = 1_000_000, diagonal = round(√2·10⁶))
//! so that every search over the same graph agrees bit-for-bit regardless of
//! expansion order. Diagonal steps may not cut an obstacle corner: both
//! orthogonal neighbours must be traversable.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::geometry::Point;
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};
use crate::world::WorldError;

pub const STRAIGHT_COST: u64 = 1_000_000;
pub const DIAGONAL_COST: u64 = 1_414_214;

/// The eight neighbour offsets with their base step costs.
pub const NEIGHBORS: [(i64, i64, u64); 8] = [
    (1, 0, STRAIGHT_COST),
    (-1, 0, STRAIGHT_COST),
    (0, 1, STRAIGHT_COST),
    (0, -1, STRAIGHT_COST),
    (1, 1, DIAGONAL_COST),
    (1, -1, DIAGONAL_COST),
    (-1, 1, DIAGONAL_COST),
    (-1, -1, DIAGONAL_COST),
];

pub fn cost_to_meters(cost: u64, cell_size: f64) -> f64 {
    cost as f64 / STRAIGHT_COST as f64 * cell_size
}

/// Integer cost of stepping into a cell with the given multiplier.
#[inline]
pub fn weighted_step(base: u64, multiplier: f64) -> u64 {
    if multiplier == 1.0 {
        base
    } else {
        (base as f64 * multiplier).round() as u64
    }
}

/// Octile distance in integer cost units; a consistent heuristic whenever
/// every multiplier is ≥ 1.
#[inline]
pub fn octile(a: CellIndex, b: CellIndex) -> u64 {
    let dx = (a.col - b.col).unsigned_abs();
    let dy = (a.row - b.row).unsigned_abs();
    let (lo, hi) = if dx < dy { (dx, dy) } else { (dy, dx) };
    lo * DIAGONAL_COST + (hi - lo) * STRAIGHT_COST
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeodesicDistance {
    Meters(f64),
    Unreachable,
}

impl GeodesicDistance {
    pub fn meters(self) -> Option<f64> {
        match self {
            GeodesicDistance::Meters(m) => Some(m),
            GeodesicDistance::Unreachable => None,
        }
    }
}

/// Single-source shortest-path costs over a `width × height` lattice.
#[derive(Debug, Clone)]
pub struct DistanceField {
    width: usize,
    height: usize,
    cell_size: f64,
    cost: Vec<u64>,
}

impl DistanceField {
    /// Dijkstra from `sources`. `multiplier(i)` returns the cost factor for
    /// entering cell `i`, or `None` if it is not traversable.
    pub fn compute(
        width: usize,
        height: usize,
        cell_size: f64,
        sources: &[usize],
        multiplier: impl Fn(usize) -> Option<f64>,
    ) -> Self {
        let mut cost = vec![u64::MAX; width * height];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            cost[s] = 0;
            heap.push(Reverse((0u64, s)));
        }
        let (w, h) = (width as i64, height as i64);
        while let Some(Reverse((c, i))) = heap.pop() {
            if c > cost[i] {
                continue;
            }
            let (col, row) = ((i % width) as i64, (i / width) as i64);
            for &(dc, dr, base) in &NEIGHBORS {
                let (nc, nr) = (col + dc, row + dr);
                if nc < 0 || nr < 0 || nc >= w || nr >= h {
                    continue;
                }
                let j = (nr * w + nc) as usize;
                let Some(m) = multiplier(j) else { continue };
                if dc != 0 && dr != 0 {
                    let side_a = (row * w + nc) as usize;
                    let side_b = (nr * w + col) as usize;
                    if multiplier(side_a).is_none() || multiplier(side_b).is_none() {
                        continue;
                    }
                }
                let nc_cost = c + weighted_step(base, m);
                if nc_cost < cost[j] {
                    cost[j] = nc_cost;
                    heap.push(Reverse((nc_cost, j)));
                }
            }
        }
        Self {
            width,
            height,
            cell_size,
            cost,
        }
    }

    /// Field over the FREE cells of a grid.
    pub fn over_free(grid: &OccupancyGrid, source: CellIndex) -> Result<Self, WorldError> {
        if !grid.is_free(source) {
            return Err(WorldError::NotFree(grid.cell_center(source)));
        }
        let cells = grid.cells();
        Ok(Self::compute(
            grid.width(),
            grid.height(),
            grid.cell_size(),
            &[grid.index(source)],
            |i| (cells[i] == Cell::Free).then_some(1.0),
        ))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn raw(&self, i: usize) -> Option<u64> {
        let c = self.cost[i];
        (c != u64::MAX).then_some(c)
    }

    pub fn cost(&self, c: CellIndex) -> Option<u64> {
        if c.col < 0 || c.row < 0 || c.col as usize >= self.width || c.row as usize >= self.height {
            return None;
        }
        self.raw(c.row as usize * self.width + c.col as usize)
    }

    pub fn meters(&self, c: CellIndex) -> Option<f64> {
        self.cost(c).map(|v| cost_to_meters(v, self.cell_size))
    }
}

/// Length of the shortest 8-connected FREE path between the cells containing
/// `a` and `b` (straight step = cell size, diagonal = √2 · cell size).
pub fn geodesic_distance(
    grid: &OccupancyGrid,
    a: &Point,
    b: &Point,
) -> Result<GeodesicDistance, WorldError> {
    let ca = grid.world_to_cell(a);
    let cb = grid.world_to_cell(b);
    for (p, c) in [(a, ca), (b, cb)] {
        if !grid.is_free(c) {
            return Err(WorldError::NotFree(*p));
        }
    }
    Ok(match cell_path_cost(grid, ca, cb) {
        Some(cost) => GeodesicDistance::Meters(cost_to_meters(cost, grid.cell_size())),
        None => GeodesicDistance::Unreachable,
    })
}

/// A* over FREE cells with the octile heuristic; returns the integer cost.
fn cell_path_cost(grid: &OccupancyGrid, from: CellIndex, to: CellIndex) -> Option<u64> {
    let w = grid.width();
    let cells = grid.cells();
    let passable = |c: CellIndex| grid.in_bounds(c) && cells[grid.index(c)] == Cell::Free;
    let mut g = vec![u64::MAX; grid.len()];
    let mut heap = BinaryHeap::new();
    let start = grid.index(from);
    g[start] = 0;
    heap.push(Reverse((octile(from, to), 0u64, start)));
    while let Some(Reverse((_, gc, i))) = heap.pop() {
        if gc > g[i] {
            continue;
        }
        let c = CellIndex::new((i % w) as i64, (i / w) as i64);
        if c == to {
            return Some(gc);
        }
        for &(dc, dr, base) in &NEIGHBORS {
            let n = CellIndex::new(c.col + dc, c.row + dr);
            if !passable(n) {
                continue;
            }
            if dc != 0 && dr != 0
                && (!passable(CellIndex::new(c.col + dc, c.row)) || !passable(CellIndex::new(c.col, c.row + dr)))
            {
                continue;
            }
            let j = grid.index(n);
            let ng = gc + base;
            if ng < g[j] {
                g[j] = ng;
                heap.push(Reverse((ng + octile(n, to), ng, j)));
            }
        }
    }
    None
}
