//! Planar points, angle wrapping and agent-centric reference frames.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates counter-clockwise by `angle` radians about the origin.
    pub fn rotate(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, other: Point2, u: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * u,
            self.y + (other.y - self.y) * u,
        )
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2::new(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2π for tiny negative inputs
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// A rigid 2D frame: `origin` in scene coordinates and the direction of the
/// local longitudinal axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFrame {
    pub origin: Point2,
    pub axis_angle: f64,
}

impl ReferenceFrame {
    pub const IDENTITY: ReferenceFrame = ReferenceFrame {
        origin: Point2::ORIGIN,
        axis_angle: 0.0,
    };

    pub fn new(origin: Point2, axis_angle: f64) -> Self {
        ReferenceFrame {
            origin,
            axis_angle: wrap_angle(axis_angle),
        }
    }

    /// Scene coordinates to frame coordinates.
    pub fn to_local(&self, p: Point2) -> Point2 {
        (p - self.origin).rotate(-self.axis_angle)
    }

    /// Frame coordinates back to scene coordinates.
    pub fn to_scene(&self, p: Point2) -> Point2 {
        p.rotate(self.axis_angle) + self.origin
    }

    pub fn heading_to_local(&self, heading: f64) -> f64 {
        wrap_angle(heading - self.axis_angle)
    }

    pub fn heading_to_scene(&self, heading: f64) -> f64 {
        wrap_angle(heading + self.axis_angle)
    }
}

/// A global rotation about the scene origin followed by a translation.
/// Used to express rigid-motion invariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: f64,
    pub translation: Point2,
}

impl RigidTransform {
    pub fn apply(&self, p: Point2) -> Point2 {
        p.rotate(self.rotation) + self.translation
    }

    pub fn apply_heading(&self, heading: f64) -> f64 {
        wrap_angle(heading + self.rotation)
    }

    pub fn apply_frame(&self, frame: &ReferenceFrame) -> ReferenceFrame {
        ReferenceFrame::new(self.apply(frame.origin), frame.axis_angle + self.rotation)
    }
}
