//! A* over classified map snapshots and local-goal extraction.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::world::geodesic::{cost_to_meters, octile, weighted_step, NEIGHBORS, STRAIGHT_COST};
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};

/// Cells within this many cells of an OCCUPIED target are searched for a
/// traversable replacement.
pub const SNAP_RADIUS: i64 = 10;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("start cell ({}, {}) is not free", .0.col, .0.row)]
    StartNotFree(CellIndex),
    #[error("unknown-cell cost multiplier must be >= 1, got {0}")]
    BadMultiplier(f64),
    #[error("cannot extract a local goal from an empty path")]
    EmptyPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub cells: Vec<CellIndex>,
    /// Weighted cost in integer units (see [`crate::world::geodesic`]).
    pub cost: u64,
    pub cell_size: f64,
}

impl Path {
    pub fn cost_meters(&self) -> f64 {
        cost_to_meters(self.cost, self.cell_size)
    }

    /// Unweighted geometric length, meters.
    pub fn length(&self) -> f64 {
        cost_to_meters(self.prefix_lengths().last().copied().unwrap_or(0), self.cell_size)
    }

    /// Cumulative geometric length at each cell, integer cost units.
    pub fn prefix_lengths(&self) -> Vec<u64> {
        let mut acc = 0;
        let mut out = Vec::with_capacity(self.cells.len());
        for (i, c) in self.cells.iter().enumerate() {
            if i > 0 {
                let p = self.cells[i - 1];
                let diag = p.col != c.col && p.row != c.row;
                acc += if diag { NEIGHBORS[4].2 } else { STRAIGHT_COST };
            }
            out.push(acc);
        }
        out
    }
}

/// Cost multiplier for entering a cell: `None` for OCCUPIED.
#[inline]
pub fn cell_multiplier(label: Cell, unknown_cost: f64) -> Option<f64> {
    match label {
        Cell::Free => Some(1.0),
        Cell::Unknown => Some(unknown_cost),
        Cell::Occupied => None,
    }
}

/// Nearest non-OCCUPIED cell to `c` within [`SNAP_RADIUS`] (Euclidean in
/// cells, ties lexicographic), or `c` itself when it is traversable.
pub fn snap_target(map: &OccupancyGrid, c: CellIndex) -> Option<CellIndex> {
    if map.in_bounds(c) && map.get(c) != Some(Cell::Occupied) {
        return Some(c);
    }
    let mut best: Option<(i64, CellIndex)> = None;
    for dr in -SNAP_RADIUS..=SNAP_RADIUS {
        for dc in -SNAP_RADIUS..=SNAP_RADIUS {
            let d2 = dc * dc + dr * dr;
            if d2 > SNAP_RADIUS * SNAP_RADIUS {
                continue;
            }
            let n = CellIndex::new(c.col + dc, c.row + dr);
            if !map.in_bounds(n) || map.get(n) == Some(Cell::Occupied) {
                continue;
            }
            if best.is_none_or(|(bd, bc)| d2 < bd || (d2 == bd && n < bc)) {
                best = Some((d2, n));
            }
        }
    }
    best.map(|b| b.1)
}

/// Minimal-cost 8-connected path avoiding OCCUPIED cells; UNKNOWN cells cost
/// `unknown_cost` times more. Diagonal moves may not cut a blocked corner.
/// Returns `Ok(None)` when the (snapped) target cannot be reached.
pub fn plan(
    map: &OccupancyGrid,
    from: CellIndex,
    to: CellIndex,
    unknown_cost: f64,
) -> Result<Option<Path>, PlanError> {
    if !(unknown_cost >= 1.0) {
        return Err(PlanError::BadMultiplier(unknown_cost));
    }
    if !map.is_free(from) {
        return Err(PlanError::StartNotFree(from));
    }
    let Some(to) = snap_target(map, to) else { return Ok(None) };
    let w = map.width();
    let cells = map.cells();
    let mult = |c: CellIndex| -> Option<f64> {
        if map.in_bounds(c) {
            cell_multiplier(cells[map.index(c)], unknown_cost)
        } else {
            None
        }
    };
    let mut g = vec![u64::MAX; map.len()];
    let mut parent = vec![usize::MAX; map.len()];
    let mut heap = BinaryHeap::new();
    let start = map.index(from);
    let goal = map.index(to);
    g[start] = 0;
    heap.push(Reverse((octile(from, to), 0u64, start)));
    while let Some(Reverse((_, gc, i))) = heap.pop() {
        if gc > g[i] {
            continue;
        }
        if i == goal {
            let mut path = vec![to];
            let mut k = i;
            while parent[k] != usize::MAX {
                k = parent[k];
                path.push(map.cell_at_index(k));
            }
            path.reverse();
            return Ok(Some(Path { cells: path, cost: gc, cell_size: map.cell_size() }));
        }
        let c = CellIndex::new((i % w) as i64, (i / w) as i64);
        for &(dc, dr, base) in &NEIGHBORS {
            let n = CellIndex::new(c.col + dc, c.row + dr);
            let Some(m) = mult(n) else { continue };
            if dc != 0
                && dr != 0
                && (mult(CellIndex::new(c.col + dc, c.row)).is_none()
                    || mult(CellIndex::new(c.col, c.row + dr)).is_none())
            {
                continue;
            }
            let j = map.index(n);
            let ng = gc + weighted_step(base, m);
            if ng < g[j] {
                g[j] = ng;
                parent[j] = i;
                heap.push(Reverse((ng + octile(n, to), ng, j)));
            }
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGoal {
    pub cell: CellIndex,
    pub created_at: usize,
    /// Index of `cell` along the path it was extracted from.
    pub path_index: usize,
}

/// Farthest path cell whose along-path length from the start is at most
/// `d` meters (the last cell when the whole path is shorter).
pub fn extract_local_goal(path: &Path, d: f64, step: usize) -> Result<LocalGoal, PlanError> {
    if path.cells.is_empty() {
        return Err(PlanError::EmptyPath);
    }
    let limit = (d / path.cell_size * STRAIGHT_COST as f64).round() as u64;
    let prefix = path.prefix_lengths();
    let k = prefix.iter().rposition(|&p| p <= limit).unwrap_or(0);
    Ok(LocalGoal { cell: path.cells[k], created_at: step, path_index: k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn grid(n: usize, fill: Cell) -> OccupancyGrid {
        OccupancyGrid::new(n, n, 0.05, Point::new(0.0, 0.0), fill).unwrap()
    }

    #[test]
    fn identity_path() {
        let g = grid(5, Cell::Free);
        let p = plan(&g, CellIndex::new(2, 2), CellIndex::new(2, 2), 2.0).unwrap().unwrap();
        assert_eq!(p.cells, vec![CellIndex::new(2, 2)]);
        assert_eq!(p.cost, 0);
    }

    #[test]
    fn diagonal_corner_to_corner() {
        let g = grid(20, Cell::Free);
        let p = plan(&g, CellIndex::new(0, 0), CellIndex::new(19, 19), 2.0).unwrap().unwrap();
        let expected = 19.0 * 2f64.sqrt() * 0.05;
        assert!((p.cost_meters() - expected).abs() < 1e-6 * 19.0 * 0.05);
        assert_eq!(p.cells.len(), 20);
    }

    #[test]
    fn unknown_is_penalized_not_blocked() {
        let g = grid(10, Cell::Unknown);
        let mut g2 = g.clone();
        g2.set(CellIndex::new(0, 0), Cell::Free);
        let p = plan(&g2, CellIndex::new(0, 0), CellIndex::new(9, 0), 2.0).unwrap().unwrap();
        assert_eq!(p.cost, 9 * 2 * STRAIGHT_COST);
    }

    #[test]
    fn occupied_target_is_snapped() {
        let mut g = grid(30, Cell::Free);
        for r in 0..30 {
            g.set(CellIndex::new(20, r), Cell::Occupied);
        }
        let p = plan(&g, CellIndex::new(2, 10), CellIndex::new(20, 10), 2.0).unwrap().unwrap();
        assert_eq!(*p.cells.last().unwrap(), CellIndex::new(19, 10));
        let solid = grid(30, Cell::Occupied);
        let mut solid2 = solid.clone();
        solid2.set(CellIndex::new(0, 0), Cell::Free);
        assert_eq!(plan(&solid2, CellIndex::new(0, 0), CellIndex::new(25, 25), 2.0).unwrap(), None);
    }

    #[test]
    fn start_must_be_free() {
        let g = grid(5, Cell::Unknown);
        assert!(matches!(plan(&g, CellIndex::new(0, 0), CellIndex::new(1, 1), 2.0), Err(PlanError::StartNotFree(_))));
    }

    #[test]
    fn local_goal_cutoffs() {
        let straight = Path {
            cells: (0..=20).map(|i| CellIndex::new(i, 0)).collect(),
            cost: 20 * STRAIGHT_COST,
            cell_size: 0.05,
        };
        assert_eq!(extract_local_goal(&straight, 0.5, 0).unwrap().cell, CellIndex::new(10, 0));
        let short = Path { cells: (0..=4).map(|i| CellIndex::new(i, 0)).collect(), cost: 4 * STRAIGHT_COST, cell_size: 0.05 };
        assert_eq!(extract_local_goal(&short, 0.25, 0).unwrap().cell, CellIndex::new(4, 0));
        // L-shape: 4 cells east then north; cutoff counts along the path
        let mut cells: Vec<_> = (0..=4).map(|i| CellIndex::new(i, 0)).collect();
        cells.extend((1..=10).map(|r| CellIndex::new(4, r)));
        let l = Path { cells, cost: 14 * STRAIGHT_COST, cell_size: 0.05 };
        assert_eq!(extract_local_goal(&l, 0.5, 3).unwrap().cell, CellIndex::new(4, 6));
        let empty = Path { cells: vec![], cost: 0, cell_size: 0.05 };
        assert_eq!(extract_local_goal(&empty, 0.5, 0), Err(PlanError::EmptyPath));
    }
}
