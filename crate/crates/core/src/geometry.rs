//! Planar geometric primitives and exact ray/point queries.
//!
//! All intersection math is closed-form (no marching). Everything is pure:
//! moving obstacles are evaluated at an explicit query time, never mutated,
//! so values can be shared freely across threads.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Tolerance on |dir| for ray queries; directions must be unit length.
pub const UNIT_DIR_TOL: f64 = 1e-9;

/// 2D point or vector, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product; signed parallelogram area.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Perpendicular vector, 90 degrees counterclockwise.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wall piece with nonzero length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }

    /// Euclidean distance from `p` to the closest point on the segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let e = self.b - self.a;
        let len_sq = e.norm_sq();
        if len_sq == 0.0 {
            return (p - self.a).norm();
        }
        let t = ((p - self.a).dot(e) / len_sq).clamp(0.0, 1.0);
        (p - (self.a + e * t)).norm()
    }
}

/// Disc obstacle; moves in a straight line at constant velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleObstacle {
    pub center: Vec2,
    pub radius: f64,
    pub velocity: Vec2,
}

impl CircleObstacle {
    pub fn new_static(center: Vec2, radius: f64) -> Self {
        CircleObstacle { center, radius, velocity: Vec2::ZERO }
    }

    /// Center at query time: center + velocity * time.
    pub fn center_at(&self, time: f64) -> Vec2 {
        self.center + self.velocity * time
    }

    /// Distance from `p` to the disc (0 inside).
    pub fn distance_to(&self, p: Vec2, time: f64) -> f64 {
        ((p - self.center_at(time)).norm() - self.radius).max(0.0)
    }
}

/// Axis-aligned rectangle, used as scene bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// The four edges as wall segments, counterclockwise from the bottom.
    pub fn wall_segments(&self) -> [Segment; 4] {
        let (lo, hi) = (self.min, self.max);
        let bl = lo;
        let br = Vec2::new(hi.x, lo.y);
        let tr = hi;
        let tl = Vec2::new(lo.x, hi.y);
        [
            Segment::new(bl, br),
            Segment::new(br, tr),
            Segment::new(tr, tl),
            Segment::new(tl, bl),
        ]
    }
}

/// Smallest t >= 0 with `origin + t*dir` on the segment, if any.
/// `dir` must be unit length. Endpoints count (boundary inclusive).
pub fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b - seg.a;
    let rel = seg.a - origin;
    let denom = dir.cross(e);
    if denom != 0.0 {
        let t = rel.cross(e) / denom;
        let s = rel.cross(dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&s) {
            return Some(t);
        }
        return None;
    }
    // Parallel. Off the supporting line: no hit. Collinear: nearest overlap.
    if rel.cross(dir) != 0.0 {
        return None;
    }
    let ta = rel.dot(dir);
    let tb = (seg.b - origin).dot(dir);
    let (lo, hi) = (ta.min(tb), ta.max(tb));
    if hi < 0.0 {
        None
    } else {
        Some(lo.max(0.0))
    }
}

/// Smallest t >= 0 with `origin + t*dir` on the circle boundary, if any.
/// A ray starting inside the disc hits at the exit point. Tangency counts.
pub fn ray_circle(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<f64> {
    let m = origin - center;
    let b = m.dot(dir);
    let c = m.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t_near = -b - sq;
    if t_near >= 0.0 {
        return Some(t_near);
    }
    let t_far = -b + sq;
    if t_far >= 0.0 {
        return Some(t_far);
    }
    None
}
