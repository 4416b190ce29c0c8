//! Procedural museum-like floorplans.
//!
//! The bounding rectangle is tiled by recursive axis splits into rooms whose
//! sides fall in `room_side`; doorways are cut along shared walls following a
//! random spanning tree of the room adjacency graph (plus a few extra ones
//! to create loops), and points of interest are hung on walls.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::world::floorplan::{
    Doorway, FloorPlan, PoiKind, PointOfInterest, Rect, Segment, FLOORPLAN_VERSION,
};
use crate::world::grid::Cell;
use crate::world::raster::rasterize;
use crate::world::WorldError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MuseumParams {
    /// Area of the bounding rectangle, m². Navigable area is reported
    /// separately by [`FloorPlan::navigable_area`].
    pub total_area: f64,
    /// Width/height ratio range of the bounding rectangle.
    pub aspect: [f64; 2],
    /// Allowed room side lengths, m.
    pub room_side: [f64; 2],
    pub doorway_width: [f64; 2],
    pub poi_count: usize,
    /// Free space required in front of each point of interest, m.
    pub poi_clearance: f64,
    /// Fraction of points of interest generated as free-standing statues.
    pub statue_fraction: f64,
    /// Probability of cutting a doorway on a non-tree adjacency.
    pub loop_doorway_prob: f64,
    /// Upper bound on OCCUPIED / total cells after rasterization.
    pub sparsity_ceiling: f64,
    pub cell_size: f64,
    /// Coordinates are snapped to multiples of this, m.
    pub snap: f64,
    pub max_attempts: usize,
}

impl Default for MuseumParams {
    fn default() -> Self {
        Self {
            total_area: 400.0,
            aspect: [1.0, 1.5],
            room_side: [5.0, 10.0],
            doorway_width: [1.0, 2.0],
            poi_count: 20,
            poi_clearance: 1.5,
            statue_fraction: 0.0,
            loop_doorway_prob: 0.25,
            sparsity_ceiling: 0.15,
            cell_size: 0.05,
            snap: 0.1,
            max_attempts: 50,
        }
    }
}

impl MuseumParams {
    fn check(&self) -> Result<(), WorldError> {
        let bad = |m: &str| Err(WorldError::InvalidParams(m.to_string()));
        if !(self.total_area > 0.0) {
            return bad("total_area must be positive");
        }
        for (name, r) in [
            ("aspect", self.aspect),
            ("room_side", self.room_side),
            ("doorway_width", self.doorway_width),
        ] {
            if !(r[0] > 0.0 && r[0] <= r[1]) {
                return bad(&format!("{name} range must satisfy 0 < min <= max"));
            }
        }
        if !(self.poi_clearance > 0.0) {
            return bad("poi_clearance must be positive");
        }
        if !(0.0..=1.0).contains(&self.statue_fraction) || !(0.0..=1.0).contains(&self.loop_doorway_prob) {
            return bad("fractions must lie in [0, 1]");
        }
        if !(self.cell_size > 0.0 && self.snap > 0.0) {
            return bad("cell_size and snap must be positive");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        Ok(())
    }
}

/// Margin kept between a doorway and the ends of its shared wall, m.
const DOOR_MARGIN: f64 = 0.5;
/// Margin kept between a painting and wall corners or doorways, m.
const POI_MARGIN: f64 = 0.5;
const POI_SPACING: f64 = 0.6;
const STATUE_KEEPOUT: f64 = 0.3;
const POI_TRIES: usize = 400;

struct Failure(&'static str);

/// Generates a floorplan; a pure function of `(seed, params)`.
pub fn generate_museum(seed: u64, params: &MuseumParams) -> Result<FloorPlan, WorldError> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reasons: HashMap<&'static str, usize> = HashMap::new();
    for _ in 0..params.max_attempts {
        match attempt(&mut rng, params) {
            Ok(plan) => return Ok(plan),
            Err(Failure(why)) => *reasons.entry(why).or_default() += 1,
        }
    }
    let mut ranked: Vec<_> = reasons.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Err(WorldError::GenerationFailed {
        attempts: params.max_attempts,
        constraint: ranked.first().map(|r| r.0).unwrap_or("unknown").to_string(),
    })
}

fn snap(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn tileable(side: f64, range: [f64; 2]) -> bool {
    let eps = 1e-9;
    let k_lo = (side / range[1] - eps).ceil().max(1.0);
    k_lo * range[0] <= side + eps
}

fn attempt(rng: &mut ChaCha8Rng, p: &MuseumParams) -> Result<FloorPlan, Failure> {
    let aspect = rng.random_range(p.aspect[0]..=p.aspect[1]);
    let width = snap((p.total_area * aspect).sqrt(), p.snap);
    let height = snap(p.total_area / width, p.snap);
    if !tileable(width, p.room_side) || !tileable(height, p.room_side) {
        return Err(Failure("room_side"));
    }
    let bounds = Rect::new(0.0, 0.0, width, height);
    let mut rooms = Vec::new();
    split(rng, p, bounds, &mut rooms)?;
    let doorways = place_doorways(rng, p, &rooms)?;
    let mut plan = FloorPlan {
        version: FLOORPLAN_VERSION,
        rooms,
        doorways,
        pois: Vec::new(),
        bounds,
    };
    place_pois(rng, p, &mut plan)?;

    let grid = rasterize(&plan, p.cell_size).map_err(|_| Failure("connectivity"))?;
    let occupied = grid.count(Cell::Occupied) as f64 / grid.len() as f64;
    if occupied > p.sparsity_ceiling {
        return Err(Failure("sparsity_ceiling"));
    }
    let step = p.cell_size / 2.0;
    for poi in &plan.pois {
        let mut t = p.cell_size;
        while t <= p.poi_clearance {
            let q = poi.anchor.add(&poi.inward_normal.scale(t));
            if grid.get(grid.world_to_cell(&q)) != Some(Cell::Free) {
                return Err(Failure("poi_clearance"));
            }
            t += step;
        }
    }
    Ok(plan)
}

fn split(rng: &mut ChaCha8Rng, p: &MuseumParams, r: Rect, out: &mut Vec<Rect>) -> Result<(), Failure> {
    let [lo, hi] = p.room_side;
    let (w, h) = (r.width(), r.height());
    if w <= hi + 1e-9 && h <= hi + 1e-9 {
        out.push(r);
        return Ok(());
    }
    let vertical_cut = w >= h && w > hi + 1e-9 || h <= hi + 1e-9;
    let side = if vertical_cut { w } else { h };
    for _ in 0..64 {
        let cut = snap(rng.random_range(lo..=(side - lo).max(lo)), p.snap);
        if cut < lo - 1e-9 || side - cut < lo - 1e-9 {
            continue;
        }
        if !tileable(cut, p.room_side) || !tileable(side - cut, p.room_side) {
            continue;
        }
        let (a, b) = if vertical_cut {
            (
                Rect::new(r.min_x, r.min_y, r.min_x + cut, r.max_y),
                Rect::new(r.min_x + cut, r.min_y, r.max_x, r.max_y),
            )
        } else {
            (
                Rect::new(r.min_x, r.min_y, r.max_x, r.min_y + cut),
                Rect::new(r.min_x, r.min_y + cut, r.max_x, r.max_y),
            )
        };
        split(rng, p, a, out)?;
        return split(rng, p, b, out);
    }
    Err(Failure("room_side"))
}

/// Shared wall between two rooms, if any: the overlapping segment.
fn shared_wall(a: &Rect, b: &Rect) -> Option<Segment> {
    let eps = 1e-6;
    let overlap = |lo1: f64, hi1: f64, lo2: f64, hi2: f64| (lo1.max(lo2), hi1.min(hi2));
    if (a.max_x - b.min_x).abs() < eps || (b.max_x - a.min_x).abs() < eps {
        let x = if (a.max_x - b.min_x).abs() < eps { a.max_x } else { a.min_x };
        let (lo, hi) = overlap(a.min_y, a.max_y, b.min_y, b.max_y);
        if hi - lo > eps {
            return Some(Segment::new(Point::new(x, lo), Point::new(x, hi)));
        }
    }
    if (a.max_y - b.min_y).abs() < eps || (b.max_y - a.min_y).abs() < eps {
        let y = if (a.max_y - b.min_y).abs() < eps { a.max_y } else { a.min_y };
        let (lo, hi) = overlap(a.min_x, a.max_x, b.min_x, b.max_x);
        if hi - lo > eps {
            return Some(Segment::new(Point::new(lo, y), Point::new(hi, y)));
        }
    }
    None
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut c = i;
    while parent[c] != r {
        let n = parent[c];
        parent[c] = r;
        c = n;
    }
    r
}

fn place_doorways(rng: &mut ChaCha8Rng, p: &MuseumParams, rooms: &[Rect]) -> Result<Vec<Doorway>, Failure> {
    let mut candidates = Vec::new();
    for i in 0..rooms.len() {
        for j in i + 1..rooms.len() {
            if let Some(wall) = shared_wall(&rooms[i], &rooms[j]) {
                if wall.length() >= p.doorway_width[0] + 2.0 * DOOR_MARGIN - 1e-9 {
                    candidates.push((i, j, wall));
                }
            }
        }
    }
    // Fisher-Yates with the seeded stream keeps the tree deterministic.
    for k in (1..candidates.len()).rev() {
        let m = rng.random_range(0..=k);
        candidates.swap(k, m);
    }
    let mut parent: Vec<usize> = (0..rooms.len()).collect();
    let mut doors = Vec::new();
    let mut joined = 0;
    for (i, j, wall) in candidates {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        let tree_edge = ri != rj;
        if !tree_edge && !rng.random_bool(p.loop_doorway_prob) {
            continue;
        }
        if tree_edge {
            parent[ri] = rj;
            joined += 1;
        }
        let len = wall.length();
        let max_w = p.doorway_width[1].min(len - 2.0 * DOOR_MARGIN);
        let w = snap(rng.random_range(p.doorway_width[0]..=max_w.max(p.doorway_width[0])), p.snap)
            .clamp(p.doorway_width[0], max_w.max(p.doorway_width[0]));
        let free = len - 2.0 * DOOR_MARGIN - w;
        let start = DOOR_MARGIN + snap(rng.random_range(0.0..=free.max(0.0)), p.snap).min(free.max(0.0));
        doors.push(Doorway { wall, gap: [start, start + w] });
    }
    if joined + 1 != rooms.len() {
        return Err(Failure("doorway_width"));
    }
    Ok(doors)
}

fn inward_normal(edge: usize) -> Point {
    match edge {
        0 => Point::new(0.0, 1.0),
        1 => Point::new(-1.0, 0.0),
        2 => Point::new(0.0, -1.0),
        _ => Point::new(1.0, 0.0),
    }
}

fn depth_along(room: &Rect, edge: usize) -> f64 {
    if edge % 2 == 0 {
        room.height()
    } else {
        room.width()
    }
}

fn point_segment_distance(q: &Point, a: &Point, b: &Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(&ab);
    let t = if len2 == 0.0 { 0.0 } else { (q.sub(a).dot(&ab) / len2).clamp(0.0, 1.0) };
    q.distance(&a.add(&ab.scale(t)))
}

fn place_pois(rng: &mut ChaCha8Rng, p: &MuseumParams, plan: &mut FloorPlan) -> Result<(), Failure> {
    let statues = (p.poi_count as f64 * p.statue_fraction).round() as usize;
    let mut islands: Vec<Point> = Vec::new();
    for k in 0..p.poi_count {
        let is_statue = k < statues;
        let mut placed = None;
        let mut why = "poi_clearance";
        for _ in 0..POI_TRIES {
            let room = plan.rooms[rng.random_range(0..plan.rooms.len())];
            let candidate = if is_statue {
                statue_candidate(rng, p, &room)
            } else {
                painting_candidate(rng, p, plan, &room)
            };
            let (anchor, normal, island) = match candidate {
                Ok(c) => c,
                Err(Failure(w)) => {
                    why = w;
                    continue;
                }
            };
            let front = anchor.add(&normal.scale(p.poi_clearance));
            let crowded = plan.pois.iter().any(|o| {
                o.anchor.distance(&anchor) < POI_SPACING
                    || point_segment_distance(
                        &island.unwrap_or(anchor),
                        &o.anchor,
                        &o.anchor.add(&o.inward_normal.scale(p.poi_clearance)),
                    ) < STATUE_KEEPOUT
            }) || islands
                .iter()
                .any(|s| point_segment_distance(s, &anchor, &front) < STATUE_KEEPOUT);
            if crowded {
                why = "poi_count";
                continue;
            }
            placed = Some((anchor, normal, island));
            break;
        }
        let Some((anchor, normal, island)) = placed else {
            return Err(Failure(why));
        };
        if let Some(s) = island {
            islands.push(s);
        }
        plan.pois.push(PointOfInterest {
            id: format!("poi-{k:03}"),
            anchor,
            inward_normal: normal,
            kind: if is_statue { PoiKind::Statue } else { PoiKind::Painting },
        });
    }
    Ok(())
}

type Candidate = (Point, Point, Option<Point>);

fn painting_candidate(
    rng: &mut ChaCha8Rng,
    p: &MuseumParams,
    plan: &FloorPlan,
    room: &Rect,
) -> Result<Candidate, Failure> {
    let edge = rng.random_range(0..4);
    if depth_along(room, edge) < p.poi_clearance + POI_MARGIN {
        return Err(Failure("poi_clearance"));
    }
    let seg = room.edges()[edge];
    let len = seg.length();
    if len < 2.0 * POI_MARGIN {
        return Err(Failure("poi_clearance"));
    }
    let offset = snap(rng.random_range(POI_MARGIN..=len - POI_MARGIN), p.cell_size);
    let anchor = seg.point_at(offset);
    let near_door = plan.doorways.iter().any(|d| {
        let o = d.opening();
        let same_line = (o.is_vertical() && seg.is_vertical() && (o.a.x - anchor.x).abs() < 1e-6)
            || (o.is_horizontal() && seg.is_horizontal() && (o.a.y - anchor.y).abs() < 1e-6);
        same_line && point_segment_distance(&anchor, &o.a, &o.b) < POI_MARGIN
    });
    if near_door {
        return Err(Failure("poi_count"));
    }
    Ok((anchor, inward_normal(edge), None))
}

fn statue_candidate(rng: &mut ChaCha8Rng, p: &MuseumParams, room: &Rect) -> Result<Candidate, Failure> {
    let margin = p.poi_clearance + POI_MARGIN;
    if room.width() < 2.0 * margin || room.height() < 2.0 * margin {
        return Err(Failure("poi_clearance"));
    }
    let cs = p.cell_size;
    // island centers sit on cell centers, which are multiples of cs from the bounds origin
    let cx = snap(rng.random_range(room.min_x + margin..=room.max_x - margin), cs);
    let cy = snap(rng.random_range(room.min_y + margin..=room.max_y - margin), cs);
    let normal = inward_normal(rng.random_range(0..4));
    let island = Point::new(cx, cy);
    Ok((island.add(&normal.scale(cs / 2.0)), normal, Some(island)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::raycast::cast_unchecked;

    #[test]
    fn deterministic_per_seed() {
        let params = MuseumParams::default();
        let a = generate_museum(1, &params).unwrap();
        let b = generate_museum(1, &params).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = generate_museum(2, &params).unwrap();
        assert_ne!(a.to_json(), c.to_json());
    }

    #[test]
    fn rooms_respect_side_range() {
        let params = MuseumParams::default();
        let plan = generate_museum(3, &params).unwrap();
        plan.validate().unwrap();
        for r in &plan.rooms {
            assert!(r.width() >= 5.0 - 1e-6 && r.width() <= 10.0 + 1e-6, "{r:?}");
            assert!(r.height() >= 5.0 - 1e-6 && r.height() <= 10.0 + 1e-6, "{r:?}");
        }
        let tiled: f64 = plan.rooms.iter().map(Rect::area).sum();
        assert!((tiled - plan.bounds.area()).abs() < 1e-6);
    }

    #[test]
    fn pois_face_free_space() {
        let params = MuseumParams { poi_count: 20, ..Default::default() };
        let plan = generate_museum(2, &params).unwrap();
        assert_eq!(plan.pois.len(), 20);
        let grid = rasterize(&plan, 0.05).unwrap();
        for poi in &plan.pois {
            // start just off the wall, then the normal must see >= 1 m of free space
            let start = poi.anchor.add(&poi.inward_normal.scale(0.05));
            let hit = cast_unchecked(&grid, &start, &poi.inward_normal, 1.0);
            assert!(!hit.hit, "{} blocked at {}", poi.id, hit.distance);
        }
    }

    #[test]
    fn unsatisfiable_clearance_reports_constraint() {
        let params = MuseumParams {
            room_side: [3.0, 5.0],
            poi_clearance: 10.0,
            max_attempts: 3,
            ..Default::default()
        };
        match generate_museum(5, &params) {
            Err(WorldError::GenerationFailed { constraint, .. }) => assert_eq!(constraint, "poi_clearance"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn statues_become_islands() {
        let params = MuseumParams { statue_fraction: 0.5, poi_count: 6, ..Default::default() };
        let plan = generate_museum(9, &params).unwrap();
        let grid = rasterize(&plan, 0.05).unwrap();
        let statues: Vec<_> = plan.pois.iter().filter(|p| p.kind == PoiKind::Statue).collect();
        assert_eq!(statues.len(), 3);
        for s in statues {
            let inside = s.anchor.sub(&s.inward_normal.scale(0.025));
            assert_eq!(grid.get(grid.world_to_cell(&inside)), Some(Cell::Occupied));
            let front = s.anchor.add(&s.inward_normal.scale(0.025));
            assert_eq!(grid.get(grid.world_to_cell(&front)), Some(Cell::Free));
        }
    }

    #[test]
    fn bad_ranges_rejected() {
        let params = MuseumParams { room_side: [10.0, 5.0], ..Default::default() };
        assert!(matches!(generate_museum(1, &params), Err(WorldError::InvalidParams(_))));
    }
}
