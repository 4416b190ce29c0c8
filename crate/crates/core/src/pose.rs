//! Pose estimation: integrate sensor displacements and correct them by
//! aligning consecutive local maps over a discrete candidate grid.

use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_deg, Displacement, Point, Pose};
use crate::mapper::LocalMap;

/// Egocentric displacement between two sensor readings, expressed in the
/// frame of the earlier one.
pub fn sensor_displacement(prev: &Pose, curr: &Pose) -> Displacement {
    let rel = curr.relative_to(prev);
    Displacement::new(rel.x, rel.y, wrap_deg(rel.theta))
}

/// Default [`SearchWindow::prior_weight`].
pub const PRIOR_WEIGHT: f64 = 30.0;

/// How a candidate displacement is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreRule {
    /// Every jointly explored cell of the reprojected previous map: +1 when
    /// the labels agree, -1 when they disagree.
    Signed,
    /// Only occupied cells of either map vote, each against the other map
    /// at its reprojected position: the vote falls linearly from 8 on an
    /// occupied cell center to 0 at 2.5 cells from the nearest one, a free
    /// cell with no occupied cell that close votes -4, unexplored cells
    /// abstain.
    ///
    /// Free/free agreement is left out because the overlap of two view
    /// wedges grows as the candidate motion shrinks, which drags every
    /// candidate toward zero motion. The graded vote lets a rotated
    /// one-cell-thick wall still register when it falls between lattice
    /// cells, and summing it over many wall cells resolves offsets finer
    /// than a cell.
    #[default]
    Structure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchWindow {
    pub window_xy: f64,
    /// Window of the lateral (dy) axis when it differs from `window_xy`.
    pub window_lateral: Option<f64>,
    pub window_theta: f64,
    pub step_xy: f64,
    pub step_theta: f64,
    pub score: ScoreRule,
    /// Weight of the pull toward the sensor displacement: a candidate is
    /// ranked by its score minus `prior_weight * sum((offset / window)^2)`
    /// over the axes, offsets and windows counted in grid steps. Zero ranks
    /// by score alone.
    pub prior_weight: f64,
}

impl Default for SearchWindow {
    fn default() -> Self {
        Self {
            window_xy: 0.10,
            window_lateral: None,
            window_theta: 4.0,
            step_xy: 0.025,
            step_theta: 1.0,
            score: ScoreRule::default(),
            prior_weight: PRIOR_WEIGHT,
        }
    }
}

impl SearchWindow {
    pub fn none() -> Self {
        Self { window_xy: 0.0, window_lateral: None, window_theta: 0.0, ..Self::default() }
    }

    pub fn lateral(&self) -> f64 {
        self.window_lateral.unwrap_or(self.window_xy)
    }

    pub fn is_empty(&self) -> bool {
        self.window_xy <= 0.0 && self.lateral() <= 0.0 && self.window_theta <= 0.0
    }

    fn offsets(window: f64, step: f64) -> Vec<i64> {
        let k = if window > 0.0 && step > 0.0 { (window / step + 1e-9).floor() as i64 } else { 0 };
        (-k..=k).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub displacement: Displacement,
    pub score: i64,
    /// No candidate produced any evidence (no jointly explored cell, or
    /// under [`ScoreRule::Structure`] no occupied cell landing on explored
    /// ground).
    pub uncorrectable: bool,
}

/// Score of candidate `d` (pose of `curr` in the frame of `prev`) within
/// the search around `noisy`, as [`correct_displacement`] ranks it; `None`
/// when there is no evidence at all.
pub fn alignment_score(
    prev: &LocalMap,
    curr: &LocalMap,
    d: &Displacement,
    noisy: &Displacement,
    search: &SearchWindow,
) -> Option<i64> {
    let cells = Cells::new(prev, curr, search.score, noisy, search);
    let rot = cells.rotate(d.dtheta);
    cells.score(&rot, d, prev, curr)
}

fn rotate(p: &Point, s: f64, c: f64) -> Point {
    Point::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

struct Cells {
    rule: ScoreRule,
    /// `Signed`: every explored cell of prev. `Structure`: occupied cells of prev.
    prev: Vec<(Point, bool)>,
    /// `Structure` only: occupied cells of curr.
    curr: Vec<Point>,
}

struct Rotated {
    s: f64,
    c: f64,
    prev: Vec<(Point, bool)>,
    curr: Vec<Point>,
}

const VOTE_PEAK: f64 = 8.0;
const VOTE_RADIUS: f64 = 2.5;
const VOTE_CONFLICT: i64 = -4;

fn vote(map: &LocalMap, p: &Point) -> Option<i64> {
    let (col, row) = map.ego_to_cell(p)?;
    map.label_at(col, row)?;
    let n = map.size() as i64;
    let reach = VOTE_RADIUS.floor() as i64;
    let mut best = f64::INFINITY;
    for r in (row as i64 - reach).max(0)..=(row as i64 + reach).min(n - 1) {
        for c in (col as i64 - reach).max(0)..=(col as i64 + reach).min(n - 1) {
            if map.label_at(c as usize, r as usize) == Some(true) {
                let q = map.cell_to_ego(c as usize, r as usize);
                best = best.min(q.sub(p).norm());
            }
        }
    }
    let cells = best / map.cell_size();
    Some(if cells < VOTE_RADIUS { (VOTE_PEAK * (1.0 - cells / VOTE_RADIUS)).round() as i64 } else { VOTE_CONFLICT })
}

impl Cells {
    /// Under `Structure` the voters are fixed for the whole search: occupied
    /// cells that `noisy` places inside the other map's view, with margins
    /// covering the search window, so no candidate gains votes by moving
    /// cells into the overlap.
    fn new(prev: &LocalMap, curr: &LocalMap, rule: ScoreRule, noisy: &Displacement, search: &SearchWindow) -> Self {
        match rule {
            ScoreRule::Signed => Self { rule, prev: prev.explored_cells(), curr: vec![] },
            ScoreRule::Structure => {
                let reach = search.window_xy.hypot(search.lateral());
                let range_margin = reach + prev.cell_size();
                let angle_margin = |p: &Point| search.window_theta + (reach / p.norm().max(1e-9)).atan().to_degrees();
                let (s, c) = noisy.dtheta.to_radians().sin_cos();
                let t = Point::new(noisy.dx, noisy.dy);
                let to_curr = |p: &Point| rotate(&p.sub(&t), -s, c);
                let to_prev = |q: &Point| rotate(q, s, c).add(&t);
                let occupied = |m: &LocalMap| m.explored_cells().into_iter().filter(|c| c.1).map(|c| c.0);
                Self {
                    rule,
                    prev: occupied(prev)
                        .filter(|p| {
                            let q = to_curr(p);
                            curr.in_view(&q, angle_margin(&q), range_margin)
                        })
                        .map(|p| (p, true))
                        .collect(),
                    curr: occupied(curr)
                        .filter(|q| {
                            let p = to_prev(q);
                            prev.in_view(&p, angle_margin(&p), range_margin)
                        })
                        .collect(),
                }
            }
        }
    }

    // prev points go to the candidate frame as R(-dtheta) p - R(-dtheta) t,
    // curr points to the prev frame as R(dtheta) q + t; the rotated parts
    // are shared by every translation
    fn rotate(&self, dtheta: f64) -> Rotated {
        let (s, c) = dtheta.to_radians().sin_cos();
        Rotated {
            s,
            c,
            prev: self.prev.iter().map(|(p, o)| (rotate(p, -s, c), *o)).collect(),
            curr: self.curr.iter().map(|q| rotate(q, s, c)).collect(),
        }
    }

    fn score(&self, rot: &Rotated, d: &Displacement, prev: &LocalMap, curr: &LocalMap) -> Option<i64> {
        let t = Point::new(d.dx, d.dy);
        let off = rotate(&t, -rot.s, rot.c);
        let mut score = 0i64;
        let mut evidence = false;
        match self.rule {
            ScoreRule::Signed => {
                for (q, occ) in &rot.prev {
                    let Some((col, row)) = curr.ego_to_cell(&q.sub(&off)) else { continue };
                    if let Some(label) = curr.label_at(col, row) {
                        evidence = true;
                        score += if label == *occ { 1 } else { -1 };
                    }
                }
            }
            ScoreRule::Structure => {
                for (q, _) in &rot.prev {
                    if let Some(v) = vote(curr, &q.sub(&off)) {
                        evidence = true;
                        score += v;
                    }
                }
                for p in &rot.curr {
                    if let Some(v) = vote(prev, &p.add(&t)) {
                        evidence = true;
                        score += v;
                    }
                }
            }
        }
        evidence.then_some(score)
    }
}

/// Searches `noisy ± window` for the displacement that best aligns the
/// previous local map with the current one.
///
/// Ties go to the candidate closest to `noisy` in grid steps, then to the
/// lexicographically smallest `(dx, dy, dtheta)`.
pub fn correct_displacement(
    noisy: &Displacement,
    prev: &LocalMap,
    curr: &LocalMap,
    search: &SearchWindow,
) -> Correction {
    let cells = Cells::new(prev, curr, search.score, noisy, search);
    let xs = SearchWindow::offsets(search.window_xy, search.step_xy);
    let ys = SearchWindow::offsets(search.lateral(), search.step_xy);
    let ts = SearchWindow::offsets(search.window_theta, search.step_theta);
    let half = |v: &[i64]| v.len().saturating_sub(1).max(1) as f64 / 2.0;
    let (kx, ky, kt) = (half(&xs), half(&ys), half(&ts));
    // (objective, score, dist2, displacement)
    let mut best: Option<(f64, i64, i64, Displacement)> = None;
    for &it in &ts {
        let dtheta = noisy.dtheta + it as f64 * search.step_theta;
        let rot = cells.rotate(dtheta);
        for &ix in &xs {
            for &iy in &ys {
                let d = Displacement::new(
                    noisy.dx + ix as f64 * search.step_xy,
                    noisy.dy + iy as f64 * search.step_xy,
                    dtheta,
                );
                let Some(score) = cells.score(&rot, &d, prev, curr) else { continue };
                let dist2 = ix * ix + iy * iy + it * it;
                let pull = ((ix * ix) as f64 / (kx * kx) + (iy * iy) as f64 / (ky * ky) + (it * it) as f64 / (kt * kt))
                    * search.prior_weight;
                let objective = score as f64 - pull;
                let better = match &best {
                    None => true,
                    Some((bo, _, bd, bdisp)) => {
                        objective > *bo
                            || (objective == *bo && dist2 < *bd)
                            || (objective == *bo
                                && dist2 == *bd
                                && (d.dx, d.dy, d.dtheta).partial_cmp(&(bdisp.dx, bdisp.dy, bdisp.dtheta))
                                    == Some(std::cmp::Ordering::Less))
                    }
                };
                if better {
                    best = Some((objective, score, dist2, d));
                }
            }
        }
    }
    match best {
        Some((_, score, _, d)) => Correction {
            displacement: if xs.len() == 1 && ys.len() == 1 && ts.len() == 1 { *noisy } else { d },
            score,
            uncorrectable: false,
        },
        None => Correction { displacement: *noisy, score: 0, uncorrectable: true },
    }
}

/// Running estimate in the estimator frame (the start pose is the origin).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseEstimate {
    pub pose: Pose,
    pub history: Vec<Displacement>,
}

impl PoseEstimate {
    pub fn new() -> Self {
        Self { pose: Pose::origin(), history: Vec::new() }
    }

    /// Composes an egocentric displacement onto the current pose.
    pub fn integrate(&mut self, d: Displacement) {
        self.pose = self.pose.compose(&d);
        self.history.push(d);
    }
}
