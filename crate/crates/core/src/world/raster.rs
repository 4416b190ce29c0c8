use crate::geometry::Point;
use crate::world::floorplan::{FloorPlan, PoiKind};
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};
use crate::world::WorldError;

/// Rasterizes a floorplan into a ground-truth grid.
///
/// Cell centers sit on multiples of `cell_size` from the bounds' min corner,
/// so a wall line lands on exactly one column (or row) of OCCUPIED cells.
/// Everything outside room interiors and doorway gaps is OCCUPIED; the
/// result has no UNKNOWN cells.
pub fn rasterize(plan: &FloorPlan, cell_size: f64) -> Result<OccupancyGrid, WorldError> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(WorldError::InvalidCellSize(cell_size));
    }
    plan.validate()?;
    let b = plan.bounds;
    let line = |v: f64, min: f64| ((v - min) / cell_size).round() as i64;
    let width = line(b.max_x, b.min_x) as usize + 1;
    let height = line(b.max_y, b.min_y) as usize + 1;
    let origin = Point::new(b.min_x - cell_size / 2.0, b.min_y - cell_size / 2.0);
    let mut grid = OccupancyGrid::new(width, height, cell_size, origin, Cell::Occupied)?;

    for (i, r) in plan.rooms.iter().enumerate() {
        let (c0, c1) = (line(r.min_x, b.min_x), line(r.max_x, b.min_x));
        let (r0, r1) = (line(r.min_y, b.min_y), line(r.max_y, b.min_y));
        if c1 - c0 < 2 || r1 - r0 < 2 {
            return Err(WorldError::InvalidPlan(format!(
                "room {i} has no interior at cell size {cell_size}"
            )));
        }
        for row in r0 + 1..r1 {
            for col in c0 + 1..c1 {
                grid.set(CellIndex::new(col, row), Cell::Free);
            }
        }
    }

    for (i, d) in plan.doorways.iter().enumerate() {
        let o = d.opening();
        if o.is_vertical() {
            let col = line(o.a.x, b.min_x);
            let lo = line(o.a.y.min(o.b.y), b.min_y);
            let hi = line(o.a.y.max(o.b.y), b.min_y);
            if hi <= lo {
                return Err(WorldError::InvalidPlan(format!(
                    "doorway {i} is narrower than one cell"
                )));
            }
            for row in lo..hi {
                grid.set(CellIndex::new(col, row), Cell::Free);
            }
        } else {
            let row = line(o.a.y, b.min_y);
            let lo = line(o.a.x.min(o.b.x), b.min_x);
            let hi = line(o.a.x.max(o.b.x), b.min_x);
            if hi <= lo {
                return Err(WorldError::InvalidPlan(format!(
                    "doorway {i} is narrower than one cell"
                )));
            }
            for col in lo..hi {
                grid.set(CellIndex::new(col, row), Cell::Free);
            }
        }
    }

    for p in plan.pois.iter().filter(|p| p.kind == PoiKind::Statue) {
        let island = p.anchor.sub(&p.inward_normal.scale(cell_size / 2.0));
        let c = grid.world_to_cell(&island);
        grid.set(c, Cell::Occupied);
    }

    let (_, components) = grid.free_components();
    if components != 1 {
        return Err(WorldError::InvalidPlan(format!(
            "navigable space has {components} connected components"
        )));
    }
    Ok(grid)
}
