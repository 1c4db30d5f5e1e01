//! Scene representation, the line-oriented scene file format, and
//! scene-level ray/collision queries.
//!
//! Unless a file declares `open_bounds`, the bounds rectangle acts as four
//! implicit wall segments, so under-specified scenes cannot be escaped.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ray_circle, ray_segment, Aabb, CircleObstacle, Segment, Vec2, UNIT_DIR_TOL};

/// Footprint radius used to validate start poses at load time.
pub const DEFAULT_FOOTPRINT_RADIUS: f64 = 0.25;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid scene: {0}")]
    Validate(String),
}

/// Static and moving world geometry plus the episode start pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub bounds: Aabb,
    /// When false, the bounds rectangle doubles as four wall segments.
    pub open_bounds: bool,
    /// When true, moving circles wrap around the bounds rectangle.
    pub wrap_circles: bool,
    pub start_position: Vec2,
    pub start_yaw: f64,
    pub segments: Vec<Segment>,
    pub circles: Vec<CircleObstacle>,
    /// Optional lap line; crossing it forward (along the a->b left normal)
    /// counts a lap during evaluation.
    pub finish: Option<Segment>,
}

impl Scene {
    /// Parse the scene file format without validating invariants.
    pub fn parse(text: &str) -> Result<Scene, SceneError> {
        let mut name = String::new();
        let mut bounds: Option<Aabb> = None;
        let mut open_bounds = false;
        let mut wrap_circles = false;
        let mut start: Option<(Vec2, f64)> = None;
        let mut segments = Vec::new();
        let mut circles = Vec::new();
        let mut finish = None;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let mut fields = line.split_whitespace();
            let Some(directive) = fields.next() else {
                continue;
            };
            let parse_err = |msg: String| SceneError::Parse { line: line_no, msg };
            match directive {
                "name" => {
                    name = line.trim_start().trim_start_matches("name").trim().to_string();
                }
                "bounds" => {
                    let v = parse_numbers(fields, 4, line_no, "bounds")?;
                    bounds = Some(Aabb::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])));
                }
                "open_bounds" => open_bounds = true,
                "wrap_circles" => wrap_circles = true,
                "start" => {
                    let v = parse_numbers(fields, 3, line_no, "start")?;
                    start = Some((Vec2::new(v[0], v[1]), v[2]));
                }
                "segment" => {
                    let v = parse_numbers(fields, 4, line_no, "segment")?;
                    segments.push(Segment::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])));
                }
                "circle" => {
                    let v: Vec<f64> = fields
                        .map(|f| {
                            f.parse::<f64>().map_err(|_| {
                                parse_err_field(line_no, "circle", f)
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if v.len() != 3 && v.len() != 5 {
                        return Err(parse_err(format!(
                            "circle expects 3 or 5 numbers, got {}",
                            v.len()
                        )));
                    }
                    let velocity = if v.len() == 5 {
                        Vec2::new(v[3], v[4])
                    } else {
                        Vec2::ZERO
                    };
                    circles.push(CircleObstacle { center: Vec2::new(v[0], v[1]), radius: v[2], velocity });
                }
                "finish" => {
                    let v = parse_numbers(fields, 4, line_no, "finish")?;
                    finish = Some(Segment::new(Vec2::new(v[0], v[1]), Vec2::new(v[2], v[3])));
                }
                other => {
                    return Err(parse_err(format!("unknown directive `{other}`")));
                }
            }
        }

        let bounds = bounds.ok_or_else(|| SceneError::Validate("missing `bounds` directive".into()))?;
        let (start_position, start_yaw) =
            start.ok_or_else(|| SceneError::Validate("missing `start` directive".into()))?;

        Ok(Scene {
            name,
            bounds,
            open_bounds,
            wrap_circles,
            start_position,
            start_yaw,
            segments,
            circles,
            finish,
        })
    }

    /// Check every scene invariant for the given footprint radius.
    pub fn validate(&self, footprint_radius: f64) -> Result<(), SceneError> {
        let err = |msg: String| Err(SceneError::Validate(msg));
        if !(self.bounds.min.x < self.bounds.max.x && self.bounds.min.y < self.bounds.max.y) {
            return err("bounds must satisfy min < max on both axes".into());
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.a.is_finite() && s.b.is_finite()) {
                return err(format!("segment {i} has non-finite coordinates"));
            }
            if s.a == s.b {
                return err(format!("segment {i} has zero length"));
            }
        }
        for (i, c) in self.circles.iter().enumerate() {
            if !(c.center.is_finite() && c.velocity.is_finite() && c.radius.is_finite()) {
                return err(format!("circle {i} has non-finite fields"));
            }
            if c.radius <= 0.0 {
                return err(format!("circle {i} has non-positive radius"));
            }
        }
        if let Some(f) = &self.finish {
            if f.a == f.b {
                return err("finish line has zero length".into());
            }
        }
        if !self.start_position.is_finite() || !self.start_yaw.is_finite() {
            return err("start pose has non-finite fields".into());
        }
        if !self.bounds.contains(self.start_position) {
            return err("start pose outside bounds".into());
        }
        if collision_check(self, self.start_position, footprint_radius, 0.0) {
            return err("start pose in collision".into());
        }
        Ok(())
    }

    /// Moving-circle center at `time`, wrapped into bounds when enabled.
    pub fn circle_center(&self, circle: &CircleObstacle, time: f64) -> Vec2 {
        let c = circle.center_at(time);
        if !self.wrap_circles {
            return c;
        }
        let w = self.bounds.width();
        let h = self.bounds.height();
        Vec2::new(
            self.bounds.min.x + (c.x - self.bounds.min.x).rem_euclid(w),
            self.bounds.min.y + (c.y - self.bounds.min.y).rem_euclid(h),
        )
    }

    /// Explicit segments plus the implicit boundary walls (when closed).
    pub fn effective_segments(&self) -> impl Iterator<Item = Segment> + '_ {
        let walls = if self.open_bounds {
            Vec::new()
        } else {
            self.bounds.wall_segments().to_vec()
        };
        self.segments.iter().copied().chain(walls)
    }
}

fn parse_err_field(line: usize, directive: &str, field: &str) -> SceneError {
    SceneError::Parse {
        line,
        msg: format!("{directive}: cannot parse number from `{field}`"),
    }
}

fn parse_numbers<'a>(
    fields: impl Iterator<Item = &'a str>,
    expected: usize,
    line: usize,
    directive: &str,
) -> Result<Vec<f64>, SceneError> {
    let mut out = Vec::with_capacity(expected);
    for f in fields {
        out.push(f.parse::<f64>().map_err(|_| parse_err_field(line, directive, f))?);
    }
    if out.len() != expected {
        return Err(SceneError::Parse {
            line,
            msg: format!("{directive} expects {expected} numbers, got {}", out.len()),
        });
    }
    Ok(out)
}

/// Load and validate a scene file using the default footprint radius.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    load_scene_with_footprint(path, DEFAULT_FOOTPRINT_RADIUS)
}

/// Load and validate a scene file for a specific footprint radius.
pub fn load_scene_with_footprint(
    path: impl AsRef<Path>,
    footprint_radius: f64,
) -> Result<Scene, SceneError> {
    let text = std::fs::read_to_string(path)?;
    let scene = Scene::parse(&text)?;
    scene.validate(footprint_radius)?;
    Ok(scene)
}

/// Cast one ray at the scene. Returns the smallest nonnegative hit distance
/// capped at `r_max`, plus a hit flag; `(r_max, false)` when nothing is hit.
///
/// `dir` must be unit length within 1e-9 and `r_max` positive; both are
/// caller contracts.
pub fn ray_cast(scene: &Scene, origin: Vec2, dir: Vec2, r_max: f64, time: f64) -> (f64, bool) {
    assert!(
        (dir.norm() - 1.0).abs() <= UNIT_DIR_TOL,
        "ray direction must be unit length"
    );
    assert!(r_max > 0.0, "r_max must be positive");
    let mut best = f64::INFINITY;
    for seg in scene.effective_segments() {
        if let Some(t) = ray_segment(origin, dir, &seg) {
            best = best.min(t);
        }
    }
    for circle in &scene.circles {
        let center = scene.circle_center(circle, time);
        if let Some(t) = ray_circle(origin, dir, center, circle.radius) {
            best = best.min(t);
        }
    }
    if best <= r_max {
        (best, true)
    } else {
        (r_max, false)
    }
}

/// True iff any primitive is within `footprint_radius` of `position`
/// (boundary inclusive), with moving circles evaluated at `time`.
pub fn collision_check(scene: &Scene, position: Vec2, footprint_radius: f64, time: f64) -> bool {
    assert!(footprint_radius > 0.0, "footprint radius must be positive");
    for seg in scene.effective_segments() {
        if seg.distance_to(position) <= footprint_radius {
            return true;
        }
    }
    for circle in &scene.circles {
        let center = scene.circle_center(circle, time);
        if (position - center).norm() <= footprint_radius + circle.radius {
            return true;
        }
    }
    false
}

impl fmt::Display for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scene `{}`: {} segments, {} circles, bounds [{:.2},{:.2}]x[{:.2},{:.2}]{}{}",
            if self.name.is_empty() { "(unnamed)" } else { &self.name },
            self.segments.len(),
            self.circles.len(),
            self.bounds.min.x,
            self.bounds.max.x,
            self.bounds.min.y,
            self.bounds.max.y,
            if self.open_bounds { ", open" } else { "" },
            if self.finish.is_some() { ", finish line" } else { "" },
        )
    }
}
