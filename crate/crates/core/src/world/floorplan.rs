//! Floorplans: rectangular rooms, wall openings and points of interest.

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::world::WorldError;

pub const FLOORPLAN_VERSION: u32 = 1;

const GEOM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x > self.min_x && p.x < self.max_x && p.y > self.min_y && p.y < self.max_y
    }

    /// The four boundary segments, counter-clockwise from the bottom edge.
    pub fn edges(&self) -> [Segment; 4] {
        let (a, b, c, d) = (
            Point::new(self.min_x, self.min_y),
            Point::new(self.max_x, self.min_y),
            Point::new(self.max_x, self.max_y),
            Point::new(self.min_x, self.max_y),
        );
        [
            Segment::new(a, b),
            Segment::new(b, c),
            Segment::new(d, c),
            Segment::new(a, d),
        ]
    }

    fn overlaps_interior(&self, other: &Rect) -> bool {
        self.min_x < other.max_x - GEOM_EPS
            && other.min_x < self.max_x - GEOM_EPS
            && self.min_y < other.max_y - GEOM_EPS
            && other.min_y < self.max_y - GEOM_EPS
    }
}

/// Axis-aligned segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(&self.b)
    }

    pub fn is_horizontal(&self) -> bool {
        (self.a.y - self.b.y).abs() < GEOM_EPS
    }

    pub fn is_vertical(&self) -> bool {
        (self.a.x - self.b.x).abs() < GEOM_EPS
    }

    pub fn point_at(&self, offset: f64) -> Point {
        let len = self.length();
        if len == 0.0 {
            return self.a;
        }
        self.a.add(&self.b.sub(&self.a).scale(offset / len))
    }

    /// Whether `other` lies on the same line and within this segment.
    pub fn contains_segment(&self, other: &Segment) -> bool {
        if self.is_horizontal() && other.is_horizontal() {
            let (lo, hi) = (self.a.x.min(self.b.x), self.a.x.max(self.b.x));
            let (olo, ohi) = (other.a.x.min(other.b.x), other.a.x.max(other.b.x));
            (self.a.y - other.a.y).abs() < GEOM_EPS && olo >= lo - GEOM_EPS && ohi <= hi + GEOM_EPS
        } else if self.is_vertical() && other.is_vertical() {
            let (lo, hi) = (self.a.y.min(self.b.y), self.a.y.max(self.b.y));
            let (olo, ohi) = (other.a.y.min(other.b.y), other.a.y.max(other.b.y));
            (self.a.x - other.a.x).abs() < GEOM_EPS && olo >= lo - GEOM_EPS && ohi <= hi + GEOM_EPS
        } else {
            false
        }
    }

    pub fn contains_point(&self, p: &Point) -> bool {
        self.contains_segment(&Segment::new(*p, *p))
    }
}

/// Opening in a wall: `gap` is the `[start, end)` offset interval (meters)
/// measured along `wall` from `wall.a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doorway {
    pub wall: Segment,
    pub gap: [f64; 2],
}

impl Doorway {
    pub fn width(&self) -> f64 {
        self.gap[1] - self.gap[0]
    }

    pub fn opening(&self) -> Segment {
        Segment::new(self.wall.point_at(self.gap[0]), self.wall.point_at(self.gap[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PoiKind {
    /// Hung on a room wall.
    #[default]
    Painting,
    /// Free-standing; rasterized as a one-cell occupied island.
    Statue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOfInterest {
    pub id: String,
    pub anchor: Point,
    pub inward_normal: Point,
    #[serde(default)]
    pub kind: PoiKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorPlan {
    pub version: u32,
    pub rooms: Vec<Rect>,
    pub doorways: Vec<Doorway>,
    pub pois: Vec<PointOfInterest>,
    pub bounds: Rect,
}

impl FloorPlan {
    pub fn single_room(room: Rect) -> Self {
        FloorPlan {
            version: FLOORPLAN_VERSION,
            rooms: vec![room],
            doorways: Vec::new(),
            pois: Vec::new(),
            bounds: room,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("floorplan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let plan: FloorPlan = serde_json::from_str(text)?;
        if plan.version != FLOORPLAN_VERSION {
            return Err(WorldError::UnsupportedVersion(plan.version));
        }
        Ok(plan)
    }

    /// Sum of room interior areas (walls have zero thickness here).
    pub fn navigable_area(&self) -> f64 {
        self.rooms.iter().map(Rect::area).sum()
    }

    pub fn bounding_area(&self) -> f64 {
        self.bounds.area()
    }

    pub fn poi(&self, id: &str) -> Option<&PointOfInterest> {
        self.pois.iter().find(|p| p.id == id)
    }

    /// Checks the geometric invariants that do not need rasterization.
    /// Connectivity is checked by [`crate::world::rasterize`].
    pub fn validate(&self) -> Result<(), WorldError> {
        let b = &self.bounds;
        if !(b.width() > 0.0 && b.height() > 0.0) {
            return Err(WorldError::InvalidPlan("bounds have zero area".into()));
        }
        for (i, r) in self.rooms.iter().enumerate() {
            if !(r.width() > 0.0 && r.height() > 0.0) {
                return Err(WorldError::InvalidPlan(format!("room {i} has zero area")));
            }
            if r.min_x < b.min_x - GEOM_EPS
                || r.min_y < b.min_y - GEOM_EPS
                || r.max_x > b.max_x + GEOM_EPS
                || r.max_y > b.max_y + GEOM_EPS
            {
                return Err(WorldError::InvalidPlan(format!("room {i} exceeds bounds")));
            }
            for (j, other) in self.rooms.iter().enumerate().skip(i + 1) {
                if r.overlaps_interior(other) {
                    return Err(WorldError::InvalidPlan(format!("rooms {i} and {j} overlap")));
                }
            }
        }
        for (i, d) in self.doorways.iter().enumerate() {
            if !(d.wall.is_horizontal() || d.wall.is_vertical()) {
                return Err(WorldError::InvalidPlan(format!("doorway {i} wall is not axis aligned")));
            }
            if !(d.gap[1] > d.gap[0]) || d.gap[0] < -GEOM_EPS {
                return Err(WorldError::InvalidPlan(format!("doorway {i} has an empty gap")));
            }
            if d.gap[1] > d.wall.length() + GEOM_EPS {
                return Err(WorldError::InvalidPlan(format!("doorway {i} is wider than its wall")));
            }
            let opening = d.opening();
            let hosts = self
                .rooms
                .iter()
                .filter(|r| r.edges().iter().any(|e| e.contains_segment(&opening)))
                .count();
            if hosts < 2 {
                return Err(WorldError::InvalidPlan(format!(
                    "doorway {i} does not lie on a wall shared by two rooms"
                )));
            }
        }
        for p in &self.pois {
            let n = p.inward_normal.norm();
            if (n - 1.0).abs() > 1e-6 {
                return Err(WorldError::InvalidPlan(format!("poi {} normal is not unit", p.id)));
            }
            if p.kind == PoiKind::Painting {
                let on_wall = self
                    .rooms
                    .iter()
                    .any(|r| r.edges().iter().any(|e| e.contains_point(&p.anchor)));
                if !on_wall {
                    return Err(WorldError::InvalidPlan(format!("poi {} is not on a wall", p.id)));
                }
                let probe = p.anchor.add(&p.inward_normal.scale(0.01));
                if !self.rooms.iter().any(|r| r.contains(&probe)) {
                    return Err(WorldError::InvalidPlan(format!(
                        "poi {} normal does not point into a room",
                        p.id
                    )));
                }
            }
        }
        Ok(())
    }
}
