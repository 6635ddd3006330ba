//! Exact planar collision primitives: segments, capsules, circles and convex
//! polygons. Shapes separated by exactly the sum of their radii are free;
//! segments that touch always collide.

use serde::{Deserialize, Serialize};

use super::pose::{Pose2, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Self {
        Segment { a, b }
    }
}

/// A segment swept by a disc; arm links are capsules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub seg: Segment,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

/// Convex polygon with counter-clockwise vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ConvexPolygon {
    vertices: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not strictly convex")]
    NotConvex,
    #[error("polygon has non-finite coordinates")]
    NonFinite,
}

impl ConvexPolygon {
    /// Accepts either winding; stores counter-clockwise.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Self, PolygonError> {
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(PolygonError::NonFinite);
        }
        let n = vertices.len();
        let signed_area: f64 = (0..n)
            .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
            .sum();
        if signed_area < 0.0 {
            vertices.reverse();
        }
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if (b - a).cross(c - b) <= 0.0 {
                return Err(PolygonError::NotConvex);
            }
        }
        Ok(ConvexPolygon { vertices })
    }

    pub fn rectangle(center: Vec2, width: f64, height: f64) -> Self {
        let (hw, hh) = (width / 2.0, height / 2.0);
        ConvexPolygon {
            vertices: vec![
                center + Vec2::new(-hw, -hh),
                center + Vec2::new(hw, -hh),
                center + Vec2::new(hw, hh),
                center + Vec2::new(-hw, hh),
            ],
        }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn transformed(&self, pose: &Pose2) -> ConvexPolygon {
        ConvexPolygon {
            vertices: self
                .vertices
                .iter()
                .map(|&v| pose.transform_point(v))
                .collect(),
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Strict interior test.
    pub fn contains(&self, p: Vec2) -> bool {
        self.edges().all(|e| (e.b - e.a).cross(p - e.a) > 0.0)
    }
}

impl TryFrom<Vec<Vec2>> for ConvexPolygon {
    type Error = PolygonError;
    fn try_from(v: Vec<Vec2>) -> Result<Self, Self::Error> {
        ConvexPolygon::new(v)
    }
}

impl From<ConvexPolygon> for Vec<Vec2> {
    fn from(p: ConvexPolygon) -> Self {
        p.vertices
    }
}

/// Static obstacle. JSON: `{"type": "polygon", "vertices": [...]}` or
/// `{"type": "circle", "center": [x, y], "radius": r}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Obstacle {
    Polygon { vertices: ConvexPolygon },
    Circle(Circle),
}

pub fn point_segment_distance(p: Vec2, s: &Segment) -> f64 {
    point_segment_distance_sq(p, s).sqrt()
}

fn point_segment_distance_sq(p: Vec2, s: &Segment) -> f64 {
    let d = s.b - s.a;
    let len_sq = d.norm_sq();
    if len_sq == 0.0 {
        return (p - s.a).norm_sq();
    }
    let t = ((p - s.a).dot(d) / len_sq).clamp(0.0, 1.0);
    (p - (s.a + d * t)).norm_sq()
}

/// Whether the bounding boxes of two segments, grown by `margin`, are apart.
fn boxes_apart(s1: &Segment, s2: &Segment, margin: f64) -> bool {
    s1.a.x.max(s1.b.x) + margin < s2.a.x.min(s2.b.x)
        || s2.a.x.max(s2.b.x) + margin < s1.a.x.min(s1.b.x)
        || s1.a.y.max(s1.b.y) + margin < s2.a.y.min(s2.b.y)
        || s2.a.y.max(s2.b.y) + margin < s1.a.y.min(s1.b.y)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(p: Vec2, s: &Segment) -> bool {
    p.x >= s.a.x.min(s.b.x)
        && p.x <= s.a.x.max(s.b.x)
        && p.y >= s.a.y.min(s.b.y)
        && p.y <= s.a.y.max(s.b.y)
}

/// Closed-segment intersection, including collinear overlap and touching.
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> bool {
    let d1 = orient(s2.a, s2.b, s1.a);
    let d2 = orient(s2.a, s2.b, s1.b);
    let d3 = orient(s1.a, s1.b, s2.a);
    let d4 = orient(s1.a, s1.b, s2.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(s1.a, s2))
        || (d2 == 0.0 && on_segment(s1.b, s2))
        || (d3 == 0.0 && on_segment(s2.a, s1))
        || (d4 == 0.0 && on_segment(s2.b, s1))
}

pub fn segment_distance(s1: &Segment, s2: &Segment) -> f64 {
    segment_distance_sq(s1, s2).sqrt()
}

fn segment_distance_sq(s1: &Segment, s2: &Segment) -> f64 {
    if segments_intersect(s1, s2) {
        return 0.0;
    }
    point_segment_distance_sq(s1.a, s2)
        .min(point_segment_distance_sq(s1.b, s2))
        .min(point_segment_distance_sq(s2.a, s1))
        .min(point_segment_distance_sq(s2.b, s1))
}

/// True when the segments come strictly closer than `r`, or touch.
fn segments_within(s1: &Segment, s2: &Segment, r: f64) -> bool {
    if boxes_apart(s1, s2, r) {
        return false;
    }
    let d = segment_distance_sq(s1, s2);
    d == 0.0 || d < r * r
}

pub fn capsules_overlap(c1: &Capsule, c2: &Capsule) -> bool {
    segments_within(&c1.seg, &c2.seg, c1.radius + c2.radius)
}

pub fn capsule_circle_overlap(c: &Capsule, circle: &Circle) -> bool {
    let r = c.radius + circle.radius;
    point_segment_distance_sq(circle.center, &c.seg) < r * r
}

/// Distance from a segment to a convex polygon (zero when touching or inside).
pub fn segment_polygon_distance(s: &Segment, poly: &ConvexPolygon) -> f64 {
    if poly.contains(s.a) || poly.contains(s.b) {
        return 0.0;
    }
    poly.edges()
        .map(|e| segment_distance(s, &e))
        .fold(f64::INFINITY, f64::min)
}

pub fn capsule_polygon_overlap(c: &Capsule, poly: &ConvexPolygon) -> bool {
    if poly.contains(c.seg.a) || poly.contains(c.seg.b) {
        return true;
    }
    poly.edges().any(|e| segments_within(&c.seg, &e, c.radius))
}

fn project(points: &[Vec2], axis: Vec2) -> (f64, f64) {
    points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.dot(axis);
            (lo.min(d), hi.max(d))
        })
}

/// Separating-axis test over the edge normals of both polygons. Polygons
/// that only touch along an edge or at a vertex do not overlap.
pub fn polygons_overlap(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    for (reference, _) in [(a, b), (b, a)] {
        for e in reference.edges() {
            let axis = (e.b - e.a).perp();
            let (min_a, max_a) = project(a.vertices(), axis);
            let (min_b, max_b) = project(b.vertices(), axis);
            if max_a <= min_b || max_b <= min_a {
                return false;
            }
        }
    }
    true
}

pub fn polygon_circle_overlap(poly: &ConvexPolygon, circle: &Circle) -> bool {
    if poly.contains(circle.center) {
        return true;
    }
    poly.edges()
        .any(|e| point_segment_distance_sq(circle.center, &e) < circle.radius * circle.radius)
}
