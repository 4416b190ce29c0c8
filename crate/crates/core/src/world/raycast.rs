//! Grid ray traversal (Amanatides & Woo) and the depth-sensor ray cast.

use crate::geometry::{Point, Pose};
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};
use crate::world::WorldError;

/// One cell visited by a ray, with the parametric interval it spans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayStep {
    pub cell: CellIndex,
    pub t_enter: f64,
    pub t_exit: f64,
    /// The ray only grazes this cell at a corner point (`t_enter == t_exit`).
    pub corner: bool,
}

/// Iterates the cells pierced by the ray `origin + t*dir` (`dir` unit length)
/// in order of increasing `t`. When the ray passes exactly through a cell
/// corner, both side neighbours are yielded as `corner` touches before the
/// diagonal cell, so no cell the ray meets is skipped.
pub struct RayWalker {
    cell: CellIndex,
    step_col: i64,
    step_row: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t: f64,
    pending: [Option<RayStep>; 2],
}

const TIE_EPS: f64 = 1e-12;
const RANGE_EPS: f64 = 1e-9;

impl RayWalker {
    pub fn new(grid: &OccupancyGrid, origin: &Point, dir: &Point) -> Self {
        Self::in_frame(grid.origin(), grid.cell_size(), origin, dir)
    }

    /// Walker over an implicit lattice with the given origin and cell size.
    pub fn in_frame(lattice_origin: Point, cell_size: f64, origin: &Point, dir: &Point) -> Self {
        let gx = (origin.x - lattice_origin.x) / cell_size;
        let gy = (origin.y - lattice_origin.y) / cell_size;
        let cell = CellIndex::new(gx.floor() as i64, gy.floor() as i64);
        let axis = |g: f64, d: f64, c: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((c + 1) as f64 - g) * cell_size / d, cell_size / d)
            } else if d < 0.0 {
                (-1, (g - c as f64) * cell_size / -d, cell_size / -d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_col, t_max_x, t_delta_x) = axis(gx, dir.x, cell.col);
        let (step_row, t_max_y, t_delta_y) = axis(gy, dir.y, cell.row);
        Self {
            cell,
            step_col,
            step_row,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t: 0.0,
            pending: [None, None],
        }
    }
}

impl Iterator for RayWalker {
    type Item = RayStep;

    fn next(&mut self) -> Option<RayStep> {
        for slot in self.pending.iter_mut() {
            if let Some(s) = slot.take() {
                return Some(s);
            }
        }
        let t_exit = self.t_max_x.min(self.t_max_y);
        if !t_exit.is_finite() && self.step_col == 0 && self.step_row == 0 {
            return None;
        }
        let here = RayStep {
            cell: self.cell,
            t_enter: self.t,
            t_exit,
            corner: false,
        };
        if (self.t_max_x - self.t_max_y).abs() <= TIE_EPS * t_exit.max(1.0) {
            let side_x = CellIndex::new(self.cell.col + self.step_col, self.cell.row);
            let side_y = CellIndex::new(self.cell.col, self.cell.row + self.step_row);
            self.pending = [
                Some(RayStep { cell: side_x, t_enter: t_exit, t_exit, corner: true }),
                Some(RayStep { cell: side_y, t_enter: t_exit, t_exit, corner: true }),
            ];
            self.cell = CellIndex::new(self.cell.col + self.step_col, self.cell.row + self.step_row);
            self.t_max_x += self.t_delta_x;
            self.t_max_y += self.t_delta_y;
        } else if self.t_max_x < self.t_max_y {
            self.cell.col += self.step_col;
            self.t_max_x += self.t_delta_x;
        } else {
            self.cell.row += self.step_row;
            self.t_max_y += self.t_delta_y;
        }
        self.t = t_exit;
        Some(here)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub hit: bool,
}

/// Distance from `origin` along `heading + ray_angle` (degrees) to the first
/// OCCUPIED cell boundary, or `max_range` with `hit == false`. Leaving the
/// grid counts as hitting an obstacle.
pub fn raycast(
    grid: &OccupancyGrid,
    origin: &Pose,
    ray_angle: f64,
    max_range: f64,
) -> Result<RayHit, WorldError> {
    if !(max_range > 0.0) {
        return Err(WorldError::InvalidRange(max_range));
    }
    let p = origin.position();
    match grid.get(grid.world_to_cell(&p)) {
        None => return Err(WorldError::OutOfBounds(p)),
        Some(Cell::Occupied) => return Err(WorldError::InsideObstacle(p)),
        _ => {}
    }
    let a = (origin.theta + ray_angle).to_radians();
    let dir = Point::new(a.cos(), a.sin());
    Ok(cast_unchecked(grid, &p, &dir, max_range))
}

/// Ray cast without precondition checks; `dir` must be unit length.
pub fn cast_unchecked(grid: &OccupancyGrid, p: &Point, dir: &Point, max_range: f64) -> RayHit {
    for step in RayWalker::new(grid, p, dir) {
        // boundaries that sit exactly at max_range drift by an ulp or two
        if step.t_enter >= max_range - RANGE_EPS {
            break;
        }
        if grid.get_or_occupied(step.cell) == Cell::Occupied {
            return RayHit {
                distance: step.t_enter.max(f64::MIN_POSITIVE),
                hit: true,
            };
        }
    }
    RayHit {
        distance: max_range,
        hit: false,
    }
}
