//! Planar poses, points and egocentric displacements.
//!
//! Conventions used throughout the crate: x/y in meters, headings in degrees,
//! counter-clockwise positive, heading 0 pointing along +x. An egocentric
//! displacement `(dx, dy, dtheta)` has `dx` forward and `dy` to the left of
//! the frame it is expressed in.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn add(&self, other: &Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn scale(&self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

/// Wraps an angle in degrees to `[0, 360)`.
pub fn normalize_deg(theta: f64) -> f64 {
    let t = theta.rem_euclid(360.0);
    // rem_euclid can return exactly 360.0 for tiny negative inputs
    if t >= 360.0 {
        0.0
    } else {
        t
    }
}

/// Wraps an angle in degrees to `(-180, 180]`.
pub fn wrap_deg(theta: f64) -> f64 {
    let t = normalize_deg(theta);
    if t > 180.0 {
        t - 360.0
    } else {
        t
    }
}

/// Absolute angular difference in `[0, 180]`.
pub fn angle_between_deg(a: f64, b: f64) -> f64 {
    wrap_deg(a - b).abs()
}

/// Heading (degrees, `[0, 360)`) of a direction vector.
pub fn heading_of(v: &Point) -> f64 {
    normalize_deg(v.y.atan2(v.x).to_degrees())
}

/// Planar agent pose. `theta` is kept in `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_deg(theta),
        }
    }

    pub const fn origin() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn heading_vector(&self) -> Point {
        let r = self.theta.to_radians();
        Point::new(r.cos(), r.sin())
    }

    /// Applies an egocentric displacement: rotate it by the current heading,
    /// then add.
    pub fn compose(&self, d: &Displacement) -> Pose {
        let (s, c) = self.theta.to_radians().sin_cos();
        Pose {
            x: self.x + c * d.dx - s * d.dy,
            y: self.y + s * d.dx + c * d.dy,
            theta: normalize_deg(self.theta + d.dtheta),
        }
    }

    /// Expresses `self` (a pose in this pose's parent frame) as a pose
    /// relative to `frame`.
    pub fn relative_to(&self, frame: &Pose) -> Pose {
        let (s, c) = frame.theta.to_radians().sin_cos();
        let dx = self.x - frame.x;
        let dy = self.y - frame.y;
        Pose {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            theta: normalize_deg(self.theta - frame.theta),
        }
    }

    /// Maps a point given in this pose's egocentric frame into the parent
    /// frame.
    pub fn transform_point(&self, p: &Point) -> Point {
        let (s, c) = self.theta.to_radians().sin_cos();
        Point::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    /// Inverse of [`Pose::transform_point`].
    pub fn inverse_transform_point(&self, p: &Point) -> Point {
        let (s, c) = self.theta.to_radians().sin_cos();
        let dx = p.x - self.x;
        let dy = p.y - self.y;
        Point::new(c * dx + s * dy, -s * dx + c * dy)
    }

    /// Treats this pose as a rigid transform and chains it with `inner`,
    /// which is expressed relative to `self`.
    pub fn then(&self, inner: &Pose) -> Pose {
        self.compose(&Displacement {
            dx: inner.x,
            dy: inner.y,
            dtheta: inner.theta,
        })
    }
}

/// Egocentric displacement expressed in the frame of the earlier pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub dx: f64,
    pub dy: f64,
    pub dtheta: f64,
}

impl Displacement {
    pub const ZERO: Displacement = Displacement {
        dx: 0.0,
        dy: 0.0,
        dtheta: 0.0,
    };

    pub const fn new(dx: f64, dy: f64, dtheta: f64) -> Self {
        Self { dx, dy, dtheta }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dtheta.is_finite()
    }

    pub fn add(&self, other: &Displacement) -> Displacement {
        Displacement::new(
            self.dx + other.dx,
            self.dy + other.dy,
            self.dtheta + other.dtheta,
        )
    }
}
