//! Egocentric local maps from depth scans and their registration into an
//! accumulating global map.
//!
//! Local map layout: `L × L` cells, agent at the center cell, facing +row
//! ("up"); +col is the agent's right. Global map layout: the estimator frame
//! (origin = episode start pose, x along the start heading) drawn on a
//! `G × G` grid whose center cell holds the origin.

use thiserror::Error;

use crate::geometry::{Point, Pose};
use crate::sim::ray_angle;
use crate::world::grid::{Cell, CellIndex, OccupancyGrid};
use crate::world::raycast::RayWalker;

pub const DEFAULT_LOCAL_SIZE: usize = 101;
pub const DEFAULT_GLOBAL_SIZE: usize = 2881;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("scan needs at least two rays, got {0}")]
    ShortScan(usize),
    #[error("scan distance {0} outside (0, max_range]")]
    BadDistance(f64),
    #[error("map size must be odd, got {0}")]
    EvenSize(usize),
    #[error("classification threshold must lie in (0, 1), got {0}")]
    BadThreshold(f64),
}

/// Sensor wedge a local map was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub fov: f64,
    pub max_range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    size: usize,
    cell_size: f64,
    occupancy: Vec<f32>,
    explored: Vec<f32>,
    view: Option<View>,
}

impl LocalMap {
    pub fn new(size: usize, cell_size: f64) -> Result<Self, MapError> {
        if size % 2 == 0 {
            return Err(MapError::EvenSize(size));
        }
        Ok(Self {
            size,
            cell_size,
            occupancy: vec![0.0; size * size],
            explored: vec![0.0; size * size],
            view: None,
        })
    }

    /// The wedge the map was built from; `None` for maps filled by hand.
    pub fn view(&self) -> Option<View> {
        self.view
    }

    /// Whether egocentric `p` lies inside the view wedge shrunk by the
    /// margins. Maps without a view see everything.
    pub fn in_view(&self, p: &Point, angle_margin: f64, range_margin: f64) -> bool {
        match self.view {
            None => true,
            Some(v) => {
                let r = p.norm();
                r <= v.max_range - range_margin && p.y.atan2(p.x).to_degrees().abs() <= v.fov / 2.0 - angle_margin
            }
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn center(&self) -> usize {
        self.size / 2
    }

    fn idx(&self, col: usize, row: usize) -> usize {
        row * self.size + col
    }

    pub fn occupancy(&self, col: usize, row: usize) -> f32 {
        self.occupancy[self.idx(col, row)]
    }

    pub fn explored(&self, col: usize, row: usize) -> f32 {
        self.explored[self.idx(col, row)]
    }

    /// Marks a cell as observed with the given occupancy.
    pub fn set(&mut self, col: usize, row: usize, occupancy: f32) {
        let i = self.idx(col, row);
        self.explored[i] = 1.0;
        self.occupancy[i] = occupancy;
    }

    pub fn explored_count(&self) -> usize {
        self.explored.iter().filter(|&&e| e > 0.0).count()
    }

    /// Egocentric `(forward, left)` coordinates of a cell center.
    pub fn cell_to_ego(&self, col: usize, row: usize) -> Point {
        let c = self.center() as f64;
        Point::new((row as f64 - c) * self.cell_size, (c - col as f64) * self.cell_size)
    }

    /// Nearest cell to an egocentric point, if inside the map.
    pub fn ego_to_cell(&self, p: &Point) -> Option<(usize, usize)> {
        let c = self.center() as f64;
        let row = (c + p.x / self.cell_size).round();
        let col = (c - p.y / self.cell_size).round();
        let n = self.size as f64;
        (row >= 0.0 && col >= 0.0 && row < n && col < n).then(|| (col as usize, row as usize))
    }

    /// Explored cells as `(ego point, occupied?)`.
    pub fn explored_cells(&self) -> Vec<(Point, bool)> {
        let mut out = Vec::new();
        for row in 0..self.size {
            for col in 0..self.size {
                let i = self.idx(col, row);
                if self.explored[i] > 0.0 {
                    out.push((self.cell_to_ego(col, row), self.occupancy[i] >= 0.5));
                }
            }
        }
        out
    }

    /// Label lookup used by scan alignment: `None` when unexplored.
    #[inline]
    pub fn label_at(&self, col: usize, row: usize) -> Option<bool> {
        let i = self.idx(col, row);
        (self.explored[i] > 0.0).then(|| self.occupancy[i] >= 0.5)
    }
}

/// Builds a local map from a scan whose rays evenly span `fov`. A distance
/// below `max_range` is a hit.
pub fn build_local_map(
    scan: &[f64],
    fov: f64,
    max_range: f64,
    size: usize,
    cell_size: f64,
) -> Result<LocalMap, MapError> {
    if scan.len() < 2 {
        return Err(MapError::ShortScan(scan.len()));
    }
    if let Some(&bad) = scan.iter().find(|&&d| !(d > 0.0 && d <= max_range)) {
        return Err(MapError::BadDistance(bad));
    }
    let mut map = LocalMap::new(size, cell_size)?;
    map.view = Some(View { fov, max_range });
    let c = map.center() as f64;
    // lattice in (forward, left) coordinates: index i along forward = row,
    // index j along left maps to col = size - 1 - j
    let lattice = Point::new(-(c + 0.5) * cell_size, -(c + 0.5) * cell_size);
    let n = size as i64;
    let mut hits = Vec::new();
    for (k, &d) in scan.iter().enumerate() {
        let a = ray_angle(k, scan.len(), fov).to_radians();
        let dir = Point::new(a.cos(), a.sin());
        let to_cell = |ci: CellIndex| -> Option<(usize, usize)> {
            let (row, j) = (ci.col, ci.row);
            (row >= 0 && j >= 0 && row < n && j < n).then(|| ((n - 1 - j) as usize, row as usize))
        };
        for step in RayWalker::in_frame(lattice, cell_size, &Point::new(0.0, 0.0), &dir) {
            if step.t_enter >= d {
                break;
            }
            if step.corner {
                continue;
            }
            match to_cell(step.cell) {
                Some((col, row)) => {
                    let i = map.idx(col, row);
                    map.explored[i] = 1.0;
                }
                None => break,
            }
        }
        if d < max_range {
            let p = dir.scale(d + cell_size / 2.0);
            if let Some(cell) = map.ego_to_cell(&p) {
                hits.push(cell);
            }
        }
    }
    // occupied wins over free within one scan
    for (col, row) in hits {
        map.set(col, row, 1.0);
    }
    Ok(map)
}

/// Accumulating `G × G` map with a uniform moving average per cell.
#[derive(Debug, Clone)]
pub struct GlobalMap {
    size: usize,
    cell_size: f64,
    occupancy_sum: Vec<f32>,
    weight: Vec<u32>,
    explored: usize,
    clipped: u64,
    bbox: Option<(i64, i64, i64, i64)>,
}

impl GlobalMap {
    pub fn new(size: usize, cell_size: f64) -> Result<Self, MapError> {
        if size % 2 == 0 {
            return Err(MapError::EvenSize(size));
        }
        Ok(Self {
            size,
            cell_size,
            occupancy_sum: vec![0.0; size * size],
            weight: vec![0; size * size],
            explored: 0,
            clipped: 0,
            bbox: None,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn center(&self) -> i64 {
        (self.size / 2) as i64
    }

    /// World origin of cell (0, 0) in the estimator frame.
    pub fn origin(&self) -> Point {
        let o = -(self.center() as f64 + 0.5) * self.cell_size;
        Point::new(o, o)
    }

    pub fn cell_of(&self, p: &Point) -> CellIndex {
        let c = self.center() as f64;
        CellIndex::new(
            (c + p.x / self.cell_size).round() as i64,
            (c + p.y / self.cell_size).round() as i64,
        )
    }

    pub fn cell_center(&self, c: CellIndex) -> Point {
        let k = self.center();
        Point::new((c.col - k) as f64 * self.cell_size, (c.row - k) as f64 * self.cell_size)
    }

    fn in_bounds(&self, c: CellIndex) -> bool {
        c.col >= 0 && c.row >= 0 && (c.col as usize) < self.size && (c.row as usize) < self.size
    }

    pub fn weight(&self, c: CellIndex) -> u32 {
        if self.in_bounds(c) {
            self.weight[c.row as usize * self.size + c.col as usize]
        } else {
            0
        }
    }

    /// Moving-average occupancy, `None` when the cell is unexplored.
    pub fn occupancy(&self, c: CellIndex) -> Option<f32> {
        if !self.in_bounds(c) {
            return None;
        }
        let i = c.row as usize * self.size + c.col as usize;
        (self.weight[i] > 0).then(|| self.occupancy_sum[i] / self.weight[i] as f32)
    }

    pub fn explored_count(&self) -> usize {
        self.explored
    }

    /// Number of local cells that fell outside the map, summed over calls.
    pub fn clipped(&self) -> u64 {
        self.clipped
    }

    /// Inclusive `(min_col, min_row, max_col, max_row)` of explored cells.
    pub fn explored_bbox(&self) -> Option<(i64, i64, i64, i64)> {
        self.bbox
    }

    /// Rototranslates `local` by `pose` (estimator frame) and folds it in.
    /// Every global cell inside the transformed footprint takes the nearest
    /// local cell, so the warp leaves no holes at any rotation.
    pub fn register(&mut self, local: &LocalMap, pose: &Pose) {
        let half = (local.center() as f64 + 0.5) * local.cell_size();
        let corners = [(-half, -half), (-half, half), (half, -half), (half, half)];
        let (mut lo, mut hi) = (Point::new(f64::MAX, f64::MAX), Point::new(f64::MIN, f64::MIN));
        for (f, l) in corners {
            let q = pose.transform_point(&Point::new(f, l));
            lo = Point::new(lo.x.min(q.x), lo.y.min(q.y));
            hi = Point::new(hi.x.max(q.x), hi.y.max(q.y));
        }
        let a = self.cell_of(&lo);
        let b = self.cell_of(&hi);
        let (s, co) = pose.theta.to_radians().sin_cos();
        for row in a.row..=b.row {
            for col in a.col..=b.col {
                let gc = CellIndex::new(col, row);
                let q = self.cell_center(gc);
                let (dx, dy) = (q.x - pose.x, q.y - pose.y);
                let ego = Point::new(co * dx + s * dy, -s * dx + co * dy);
                let Some((lc, lr)) = local.ego_to_cell(&ego) else { continue };
                let li = local.idx(lc, lr);
                if local.explored[li] <= 0.0 {
                    continue;
                }
                if !self.in_bounds(gc) {
                    self.clipped += 1;
                    continue;
                }
                let gi = row as usize * self.size + col as usize;
                if self.weight[gi] == 0 {
                    self.explored += 1;
                    self.bbox = Some(match self.bbox {
                        None => (col, row, col, row),
                        Some((c0, r0, c1, r1)) => (c0.min(col), r0.min(row), c1.max(col), r1.max(row)),
                    });
                }
                self.occupancy_sum[gi] += local.occupancy[li];
                self.weight[gi] += 1;
            }
        }
    }

    /// Labels the whole map: explored cells with occupancy ≥ threshold are
    /// OCCUPIED, other explored cells FREE, the rest UNKNOWN.
    pub fn classify(&self, threshold: f64) -> Result<OccupancyGrid, MapError> {
        let n = self.size as i64 - 1;
        self.classify_region(threshold, (0, 0, n, n))
    }

    /// Like [`GlobalMap::classify`] restricted to an inclusive cell box; the
    /// returned grid keeps estimator-frame coordinates.
    pub fn classify_region(
        &self,
        threshold: f64,
        region: (i64, i64, i64, i64),
    ) -> Result<OccupancyGrid, MapError> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(MapError::BadThreshold(threshold));
        }
        let n = self.size as i64 - 1;
        let (c0, r0) = (region.0.clamp(0, n), region.1.clamp(0, n));
        let (c1, r1) = (region.2.clamp(c0, n), region.3.clamp(r0, n));
        let (w, h) = ((c1 - c0 + 1) as usize, (r1 - r0 + 1) as usize);
        let o = self.origin();
        let origin = Point::new(o.x + c0 as f64 * self.cell_size, o.y + r0 as f64 * self.cell_size);
        let mut grid = OccupancyGrid::new(w, h, self.cell_size, origin, Cell::Unknown)
            .expect("cell size validated by construction");
        let t = threshold as f32;
        for row in 0..h {
            let gi0 = (r0 as usize + row) * self.size + c0 as usize;
            for col in 0..w {
                let gi = gi0 + col;
                let wgt = self.weight[gi];
                if wgt == 0 {
                    continue;
                }
                let occ = self.occupancy_sum[gi] / wgt as f32;
                let label = if occ >= t { Cell::Occupied } else { Cell::Free };
                grid.set(CellIndex::new(col as i64, row as i64), label);
            }
        }
        Ok(grid)
    }
}
