//! Episode metrics: map quality, pose drift and PointNav++ success.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episodes::{EpisodeSpec, GOAL_OFFSET};
use crate::geometry::{angle_between_deg, heading_of, Point, Pose};
use crate::world::geodesic::{geodesic_distance, GeodesicDistance};
use crate::world::grid::{Cell, OccupancyGrid};
use crate::world::raycast::cast_unchecked;

/// PointNav++ success radius, m.
pub const SUCCESS_DISTANCE: f64 = 0.2;
/// PointNav++ orientation tolerance (strict), degrees.
pub const SUCCESS_ANGLE: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("grid dimensions differ: built {built:?}, ground truth {gt:?}")]
    Dimensions { built: (usize, usize), gt: (usize, usize) },
    #[error("empty pose log")]
    EmptyLog,
    #[error("episode {0} is not a pointnav episode")]
    NotPointnav(String),
    #[error("empty trajectory")]
    EmptyTrajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MapMetrics {
    pub iou: f64,
    pub fiou: f64,
    pub oiou: f64,
    /// m²
    pub acc: f64,
    pub area_seen: f64,
    pub free_area_seen: f64,
    pub occupied_area_seen: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Cell-by-cell comparison of two grids over the same lattice. Cells that
/// are UNKNOWN in `gt` are ignored for IoU and Acc.
pub fn compare_grids(built: &OccupancyGrid, gt: &OccupancyGrid) -> Result<MapMetrics, MetricsError> {
    if (built.width(), built.height()) != (gt.width(), gt.height()) {
        return Err(MetricsError::Dimensions {
            built: (built.width(), built.height()),
            gt: (gt.width(), gt.height()),
        });
    }
    let (mut f_inter, mut f_union, mut o_inter, mut o_union) = (0, 0, 0, 0);
    let (mut matched, mut seen_free, mut seen_occ) = (0, 0, 0);
    for (&b, &g) in built.cells().iter().zip(gt.cells()) {
        match b {
            Cell::Free => seen_free += 1,
            Cell::Occupied => seen_occ += 1,
            Cell::Unknown => {}
        }
        if g == Cell::Unknown {
            continue;
        }
        if b == g {
            matched += 1;
        }
        let (bf, gf) = (b == Cell::Free, g == Cell::Free);
        let (bo, go) = (b == Cell::Occupied, g == Cell::Occupied);
        f_inter += (bf && gf) as usize;
        f_union += (bf || gf) as usize;
        o_inter += (bo && go) as usize;
        o_union += (bo || go) as usize;
    }
    let a = gt.cell_area();
    let fiou = ratio(f_inter, f_union);
    let oiou = ratio(o_inter, o_union);
    Ok(MapMetrics {
        iou: 0.5 * (fiou + oiou),
        fiou,
        oiou,
        acc: matched as f64 * a,
        area_seen: (seen_free + seen_occ) as f64 * a,
        free_area_seen: seen_free as f64 * a,
        occupied_area_seen: seen_occ as f64 * a,
    })
}

/// Resamples a classified map (estimator frame, anchored at `start`) onto
/// the ground-truth lattice.
pub fn align_to_gt(built: &OccupancyGrid, gt: &OccupancyGrid, start: &Pose) -> OccupancyGrid {
    let mut out = OccupancyGrid::new(gt.width(), gt.height(), gt.cell_size(), gt.origin(), Cell::Unknown)
        .expect("ground-truth cell size is valid");
    for i in 0..gt.len() {
        let c = gt.cell_at_index(i);
        let q = start.inverse_transform_point(&gt.cell_center(c));
        if let Some(label) = built.get(built.world_to_cell(&q)) {
            out.set(c, label);
        }
    }
    out
}

/// Map metrics of a classified map in the estimator frame. IoU and Acc are
/// measured on the ground-truth lattice; the area-seen family counts every
/// explored cell of `built`, so it must cover the whole explored region.
pub fn map_metrics(built: &OccupancyGrid, gt: &OccupancyGrid, start: &Pose) -> MapMetrics {
    let aligned = align_to_gt(built, gt, start);
    let mut m = compare_grids(&aligned, gt).expect("aligned grid shares the lattice");
    let a = built.cell_area();
    let (free, occ) = (built.count(Cell::Free), built.count(Cell::Occupied));
    m.area_seen = (free + occ) as f64 * a;
    m.free_area_seen = free as f64 * a;
    m.occupied_area_seen = occ as f64 * a;
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseMetrics {
    /// Mean translation error, m.
    pub te: f64,
    /// Mean absolute heading error, degrees.
    pub ae: f64,
}

/// Means over `(estimate, truth)` pairs, both in the same frame.
pub fn pose_metrics(log: &[(Pose, Pose)]) -> Result<PoseMetrics, MetricsError> {
    if log.is_empty() {
        return Err(MetricsError::EmptyLog);
    }
    let n = log.len() as f64;
    let te = log.iter().map(|(e, t)| e.position().distance(&t.position())).sum::<f64>() / n;
    let ae = log.iter().map(|(e, t)| angle_between_deg(e.theta, t.theta)).sum::<f64>() / n;
    Ok(PoseMetrics { te, ae })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PointnavMetrics {
    pub spl: f64,
    pub soft_spl: f64,
    pub sr: f64,
    pub pnsr: f64,
    pub asr: f64,
    pub steps: usize,
    /// m
    pub d2g: f64,
    /// degrees
    pub oe: f64,
    pub path_length: f64,
}

/// Distance to the goal: straight-line when the segment crosses no
/// obstacle, otherwise the grid geodesic.
pub fn distance_to_goal(gt: &OccupancyGrid, from: &Point, goal: &Point) -> f64 {
    let d = from.distance(goal);
    if d == 0.0 {
        return 0.0;
    }
    let dir = goal.sub(from).scale(1.0 / d);
    if !cast_unchecked(gt, from, &dir, d).hit {
        return d;
    }
    match geodesic_distance(gt, from, goal) {
        Ok(GeodesicDistance::Meters(m)) => m.max(d),
        _ => f64::INFINITY,
    }
}

/// Scores a finished PointNav++ episode from its true world-frame poses
/// (`trajectory[0]` is the start) and the number of actions taken.
pub fn pointnav_metrics(
    episode: &EpisodeSpec,
    trajectory: &[Pose],
    steps: usize,
    gt: &OccupancyGrid,
) -> Result<PointnavMetrics, MetricsError> {
    let (Some(goal), Some(orient), Some(l)) = (episode.goal_position, episode.goal_orientation, episode.gt_geodesic)
    else {
        return Err(MetricsError::NotPointnav(episode.id.clone()));
    };
    let last = trajectory.last().ok_or(MetricsError::EmptyTrajectory)?;
    let anchor = goal.add(&orient.scale(GOAL_OFFSET));
    let pos = last.position();
    let d2g = distance_to_goal(gt, &pos, &goal);
    let oe = angle_between_deg(last.theta, heading_of(&anchor.sub(&pos)));
    let p: f64 = trajectory.windows(2).map(|w| w[0].position().distance(&w[1].position())).sum();
    let pnsr = if d2g <= SUCCESS_DISTANCE { 1.0 } else { 0.0 };
    let asr = if oe < SUCCESS_ANGLE { 1.0 } else { 0.0 };
    let sr = pnsr * asr;
    let eff = if l > 0.0 { l / p.max(l) } else { 1.0 };
    let progress = if l > 0.0 { 1.0 - (d2g / l).min(1.0) } else { 1.0 };
    Ok(PointnavMetrics {
        spl: sr * eff,
        soft_spl: progress * eff,
        sr,
        pnsr,
        asr,
        steps,
        d2g,
        oe,
        path_length: p,
    })
}

pub const EXPLORATION_COLUMNS: [&str; 10] = ["IoU", "FIoU", "OIoU", "Acc", "AS", "FAS", "OAS", "TE", "AE", "Steps"];
pub const POINTNAV_COLUMNS: [&str; 8] = ["SPL", "SoftSPL", "SR", "PNSR", "ASR", "Steps", "D2G", "OE"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationMetrics {
    pub map: MapMetrics,
    pub pose: PoseMetrics,
    pub steps: usize,
}

impl ExplorationMetrics {
    pub fn values(&self) -> Vec<f64> {
        let m = &self.map;
        vec![
            m.iou,
            m.fiou,
            m.oiou,
            m.acc,
            m.area_seen,
            m.free_area_seen,
            m.occupied_area_seen,
            self.pose.te,
            self.pose.ae,
            self.steps as f64,
        ]
    }
}

impl PointnavMetrics {
    pub fn values(&self) -> Vec<f64> {
        vec![self.spl, self.soft_spl, self.sr, self.pnsr, self.asr, self.steps as f64, self.d2g, self.oe]
    }
}

/// Column-wise means over rows of equal length; `None` when empty.
pub fn column_means(rows: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = rows.first()?;
    let mut sum = vec![0.0; first.len()];
    for r in rows {
        for (s, v) in sum.iter_mut().zip(r) {
            *s += v;
        }
    }
    Some(sum.into_iter().map(|s| s / rows.len() as f64).collect())
}
