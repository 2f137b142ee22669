//! 2D geometry over `f64` with absolute tolerances.
//!
//! Everything downstream (execution, verification, scene description) rests
//! on three tolerances with a strict ordering between them:
//!
//! * [`EPS_DEGENERATE`] — below this, inputs are treated as coincident and
//!   constructions refuse to produce near-degenerate objects.
//! * [`EPS_MATCH`] — object equivalence for goal matching and relation
//!   detection.
//! * [`EPS_SEPARATION`] — minimum spacing enforced between sampled points.
//!
//! Intersection points are returned in lexicographic `(x, y)` order so that
//! multi-output binds are reproducible, and tangency collapses two nearly
//! coincident roots into one point.

use crate::dsl::ToolKind;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

/// Coincidence threshold: inputs closer than this are degenerate.
pub const EPS_DEGENERATE: f64 = 1e-9;
/// Equivalence threshold for matching constructed objects against goals.
pub const EPS_MATCH: f64 = 1e-6;
/// Minimum separation enforced when sampling arbitrary points.
pub const EPS_SEPARATION: f64 = 1e-3;

/// A point of the plane, doubling as a 2-vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Point {
        Point { x, y }
    }

    pub fn add(self, other: Point) -> Point {
        Point::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Z component of the cross product; positive when `other` is
    /// counter-clockwise from `self`.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        self.sub(other).norm()
    }

    /// Unit vector; `None` when shorter than [`EPS_DEGENERATE`].
    pub fn normalize(self) -> Option<Point> {
        let n = self.norm();
        if n < EPS_DEGENERATE {
            None
        } else {
            Some(self.scale(1.0 / n))
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.x, self.y)
    }
}

/// Geometric value of an object.
///
/// Direction vectors of `Line` and `Ray` are unit length by construction;
/// circles have strictly positive radius and segments have separated
/// endpoints. Constructors enforce these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Point(Point),
    Line { anchor: Point, dir: Point },
    Ray { origin: Point, dir: Point },
    Segment { a: Point, b: Point },
    Circle { center: Point, radius: f64 },
}

impl Shape {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Point(_) => "point",
            Shape::Line { .. } => "line",
            Shape::Ray { .. } => "ray",
            Shape::Segment { .. } => "segment",
            Shape::Circle { .. } => "circle",
        }
    }

    pub fn is_point(&self) -> bool {
        matches!(self, Shape::Point(_))
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Shape::Line { .. } | Shape::Ray { .. } | Shape::Segment { .. })
    }

    pub fn as_point(&self) -> Option<Point> {
        match self {
            Shape::Point(p) => Some(*p),
            _ => None,
        }
    }
}

/// A labeled object living in a [`Scene`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoObject {
    pub label: String,
    pub shape: Shape,
}

/// Errors from the construction primitives.
#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum GeomError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("{tool} takes {expected} argument(s), got {got}")]
    ArityMismatch { tool: ToolKind, expected: usize, got: usize },
    #[error("point sampling exhausted after {0} rejections")]
    SamplingExhausted(usize),
}

/// An ordered collection of labeled objects plus the RNG that feeds
/// arbitrary-point sampling during execution.
///
/// Cloning a scene clones the RNG state, so two executions started from the
/// same clone draw identical samples — the property that makes verification
/// reproducible.
#[derive(Debug, Clone)]
pub struct Scene {
    objects: Vec<GeoObject>,
    index: HashMap<String, usize>,
    rng: ChaCha8Rng,
    rng_seed: u64,
}

impl Scene {
    pub fn new(rng_seed: u64) -> Scene {
        Scene {
            objects: Vec::new(),
            index: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
            rng_seed,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn get(&self, label: &str) -> Option<&Shape> {
        self.index.get(label).map(|i| &self.objects[*i].shape)
    }

    pub fn objects(&self) -> &[GeoObject] {
        &self.objects
    }

    /// Append a labeled object. Labels are unique within a scene.
    pub fn push(&mut self, label: &str, shape: Shape) -> Result<(), GeomError> {
        if self.index.contains_key(label) {
            return Err(GeomError::DegenerateInput(format!(
                "label `{label}` is already bound"
            )));
        }
        self.index.insert(label.to_string(), self.objects.len());
        self.objects.push(GeoObject { label: label.to_string(), shape });
        Ok(())
    }

    /// Every point currently bound, used as the avoid list when sampling.
    pub fn points(&self) -> Vec<Point> {
        self.objects
            .iter()
            .filter_map(|o| o.shape.as_point())
            .collect()
    }
}

fn require_point(shape: &Shape, tool: ToolKind) -> Result<Point, GeomError> {
    shape.as_point().ok_or_else(|| {
        GeomError::DegenerateInput(format!("{tool} expects a point, got {}", shape.kind_name()))
    })
}

fn require_linear(shape: &Shape, tool: ToolKind) -> Result<(Point, Point), GeomError> {
    match shape {
        Shape::Line { anchor, dir } => Ok((*anchor, *dir)),
        Shape::Ray { origin, dir } => Ok((*origin, *dir)),
        Shape::Segment { a, b } => {
            let dir = b.sub(*a).normalize().expect("segment endpoints are separated");
            Ok((*a, dir))
        }
        other => Err(GeomError::DegenerateInput(format!(
            "{tool} expects a line, ray, or segment, got {}",
            other.kind_name()
        ))),
    }
}

/// Apply a deterministic construction tool to its arguments.
///
/// Covers the nine object-producing tools. `intersect` goes through
/// [`intersect`], and the two sampling tools go through [`sample_point`];
/// passing them here is an arity error at best.
pub fn construct(tool: ToolKind, args: &[&Shape]) -> Result<Shape, GeomError> {
    let expect = tool.arity();
    if args.len() != expect {
        return Err(GeomError::ArityMismatch { tool, expected: expect, got: args.len() });
    }
    match tool {
        ToolKind::Line | ToolKind::Ray | ToolKind::Segment => {
            let a = require_point(args[0], tool)?;
            let b = require_point(args[1], tool)?;
            let dir = b.sub(a).normalize().ok_or_else(|| {
                GeomError::DegenerateInput("coincident defining points".to_string())
            })?;
            Ok(match tool {
                ToolKind::Line => Shape::Line { anchor: a, dir },
                ToolKind::Ray => Shape::Ray { origin: a, dir },
                _ => Shape::Segment { a, b },
            })
        }
        ToolKind::Circle => {
            let center = require_point(args[0], tool)?;
            let through = require_point(args[1], tool)?;
            let radius = center.dist(through);
            if radius < EPS_DEGENERATE {
                return Err(GeomError::DegenerateInput("zero radius".to_string()));
            }
            Ok(Shape::Circle { center, radius })
        }
        ToolKind::Compass => {
            let center = require_point(args[0], tool)?;
            let a = require_point(args[1], tool)?;
            let b = require_point(args[2], tool)?;
            let radius = a.dist(b);
            if radius < EPS_DEGENERATE {
                return Err(GeomError::DegenerateInput("zero compass span".to_string()));
            }
            Ok(Shape::Circle { center, radius })
        }
        ToolKind::PerpBisector => {
            let a = require_point(args[0], tool)?;
            let b = require_point(args[1], tool)?;
            let dir = b.sub(a).normalize().ok_or_else(|| {
                GeomError::DegenerateInput("coincident defining points".to_string())
            })?;
            Ok(Shape::Line { anchor: a.add(b).scale(0.5), dir: dir.perp() })
        }
        ToolKind::Perpendicular => {
            let (_, dir) = require_linear(args[0], tool)?;
            let through = require_point(args[1], tool)?;
            Ok(Shape::Line { anchor: through, dir: dir.perp() })
        }
        ToolKind::Parallel => {
            let (_, dir) = require_linear(args[0], tool)?;
            let through = require_point(args[1], tool)?;
            Ok(Shape::Line { anchor: through, dir })
        }
        ToolKind::AngleBisector => {
            let a = require_point(args[0], tool)?;
            let v = require_point(args[1], tool)?;
            let b = require_point(args[2], tool)?;
            let u1 = a.sub(v).normalize().ok_or_else(|| {
                GeomError::DegenerateInput("angle arm through the vertex".to_string())
            })?;
            let u2 = b.sub(v).normalize().ok_or_else(|| {
                GeomError::DegenerateInput("angle arm through the vertex".to_string())
            })?;
            let dir = u1.add(u2).normalize().ok_or_else(|| {
                GeomError::DegenerateInput("straight angle has no unique bisector".to_string())
            })?;
            Ok(Shape::Ray { origin: v, dir })
        }
        ToolKind::Intersect | ToolKind::PointOn | ToolKind::FreePoint => {
            Err(GeomError::DegenerateInput(format!("{tool} is not a direct construction")))
        }
    }
}

/// Parameter interval of a linear object along its unit direction.
fn linear_span(shape: &Shape) -> Option<(Point, Point, f64, f64)> {
    match shape {
        Shape::Line { anchor, dir } => Some((*anchor, *dir, f64::NEG_INFINITY, f64::INFINITY)),
        Shape::Ray { origin, dir } => Some((*origin, *dir, 0.0, f64::INFINITY)),
        Shape::Segment { a, b } => {
            let dir = b.sub(*a).normalize()?;
            Some((*a, dir, 0.0, b.sub(*a).norm()))
        }
        _ => None,
    }
}

fn in_span(t: f64, lo: f64, hi: f64) -> bool {
    t >= lo - EPS_DEGENERATE && t <= hi + EPS_DEGENERATE
}

/// Intersect two non-point objects.
///
/// Returns zero, one, or two points in lexicographic `(x, y)` order.
/// Parallel (or coincident) linear objects yield nothing; a chord whose two
/// roots sit within [`EPS_DEGENERATE`] of each other collapses to the single
/// tangency point.
pub fn intersect(a: &Shape, b: &Shape) -> Vec<Point> {
    let mut points = match (a, b) {
        (Shape::Point(_), _) | (_, Shape::Point(_)) => Vec::new(),
        (Shape::Circle { center: c1, radius: r1 }, Shape::Circle { center: c2, radius: r2 }) => {
            circle_circle(*c1, *r1, *c2, *r2)
        }
        (Shape::Circle { center, radius }, lin) => linear_circle(lin, *center, *radius),
        (lin, Shape::Circle { center, radius }) => linear_circle(lin, *center, *radius),
        (lin1, lin2) => linear_linear(lin1, lin2),
    };
    points.sort_by(|p, q| {
        p.x.partial_cmp(&q.x)
            .unwrap()
            .then(p.y.partial_cmp(&q.y).unwrap())
    });
    points
}

fn linear_linear(a: &Shape, b: &Shape) -> Vec<Point> {
    let Some((o1, d1, lo1, hi1)) = linear_span(a) else { return Vec::new() };
    let Some((o2, d2, lo2, hi2)) = linear_span(b) else { return Vec::new() };
    let denom = d1.cross(d2);
    if denom.abs() < EPS_DEGENERATE {
        // Parallel or coincident: no unique intersection point.
        return Vec::new();
    }
    let delta = o2.sub(o1);
    let t1 = delta.cross(d2) / denom;
    let t2 = delta.cross(d1) / denom;
    if in_span(t1, lo1, hi1) && in_span(t2, lo2, hi2) {
        vec![o1.add(d1.scale(t1))]
    } else {
        Vec::new()
    }
}

fn linear_circle(lin: &Shape, center: Point, radius: f64) -> Vec<Point> {
    let Some((origin, dir, lo, hi)) = linear_span(lin) else { return Vec::new() };
    // |origin + t*dir - center|^2 = r^2, with |dir| = 1:
    // t^2 + 2 b t + c = 0.
    let rel = origin.sub(center);
    let b = dir.dot(rel);
    let c = rel.dot(rel) - radius * radius;
    let disc = b * b - c;
    let tangent_window = (EPS_DEGENERATE / 2.0) * (EPS_DEGENERATE / 2.0);
    let roots: Vec<f64> = if disc < -tangent_window {
        Vec::new()
    } else if disc < tangent_window {
        vec![-b]
    } else {
        let sq = disc.sqrt();
        vec![-b - sq, -b + sq]
    };
    roots
        .into_iter()
        .filter(|t| in_span(*t, lo, hi))
        .map(|t| origin.add(dir.scale(t)))
        .collect()
}

fn circle_circle(c1: Point, r1: f64, c2: Point, r2: f64) -> Vec<Point> {
    let d = c1.dist(c2);
    if d < EPS_DEGENERATE {
        // Concentric (coincident or nested): no unique points.
        return Vec::new();
    }
    let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
    let h2 = r1 * r1 - a * a;
    let tangent_window = (EPS_DEGENERATE / 2.0) * (EPS_DEGENERATE / 2.0);
    let dir = c2.sub(c1).scale(1.0 / d);
    let foot = c1.add(dir.scale(a));
    if h2 < -tangent_window {
        Vec::new()
    } else if h2 < tangent_window {
        vec![foot]
    } else {
        let h = h2.sqrt();
        let off = dir.perp().scale(h);
        vec![foot.add(off), foot.sub(off)]
    }
}

/// Distance from a point to the nearest point of an object.
///
/// For circles this is the distance to the circle itself (not the disk), so
/// the center of a circle is *not* incident to it.
pub fn distance_to(shape: &Shape, p: Point) -> f64 {
    match shape {
        Shape::Point(q) => p.dist(*q),
        Shape::Line { anchor, dir } => dir.cross(p.sub(*anchor)).abs(),
        Shape::Ray { origin, dir } => {
            let t = p.sub(*origin).dot(*dir);
            if t <= 0.0 {
                p.dist(*origin)
            } else {
                dir.cross(p.sub(*origin)).abs()
            }
        }
        Shape::Segment { a, b } => {
            let ab = b.sub(*a);
            let t = (p.sub(*a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            p.dist(a.add(ab.scale(t)))
        }
        Shape::Circle { center, radius } => (p.dist(*center) - radius).abs(),
    }
}

/// Where an arbitrary point may be sampled from.
pub enum SampleTarget<'a> {
    /// Uniform over the unit box.
    FreePlane,
    /// Uniform over the object: segment by parameter, circle by angle,
    /// line/ray by parameter over the part crossing the `[-0.5, 1.5]^2`
    /// viewport.
    On(&'a Shape),
}

const VIEW_LO: f64 = -0.5;
const VIEW_HI: f64 = 1.5;
const SAMPLE_RETRIES: usize = 100;

/// Sample a point, rejecting anything within [`EPS_SEPARATION`] of a point
/// in `avoid`. Gives up after 100 rejections.
pub fn sample_point(
    target: &SampleTarget<'_>,
    rng: &mut ChaCha8Rng,
    avoid: &[Point],
) -> Result<Point, GeomError> {
    for _ in 0..SAMPLE_RETRIES {
        let candidate = match target {
            SampleTarget::FreePlane => {
                Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0))
            }
            SampleTarget::On(shape) => match shape {
                Shape::Segment { a, b } => {
                    let t = rng.gen_range(0.0..1.0);
                    a.add(b.sub(*a).scale(t))
                }
                Shape::Circle { center, radius } => {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    center.add(Point::new(theta.cos() * radius, theta.sin() * radius))
                }
                Shape::Line { anchor, dir } => {
                    let (lo, hi) = viewport_span(*anchor, *dir, f64::NEG_INFINITY, f64::INFINITY);
                    let t = rng.gen_range(lo..hi);
                    anchor.add(dir.scale(t))
                }
                Shape::Ray { origin, dir } => {
                    let (lo, hi) = viewport_span(*origin, *dir, 0.0, f64::INFINITY);
                    let t = rng.gen_range(lo..hi);
                    origin.add(dir.scale(t))
                }
                Shape::Point(p) => *p,
            },
        };
        if avoid.iter().all(|p| p.dist(candidate) > EPS_SEPARATION) {
            return Ok(candidate);
        }
    }
    Err(GeomError::SamplingExhausted(SAMPLE_RETRIES))
}

/// Clip the parameter range of a line/ray to the sampling viewport. Falls
/// back to a unit-scale window when the object misses the viewport entirely.
fn viewport_span(origin: Point, dir: Point, lo: f64, hi: f64) -> (f64, f64) {
    let mut t_lo = lo;
    let mut t_hi = hi;
    for (o, d) in [(origin.x, dir.x), (origin.y, dir.y)] {
        if d.abs() < EPS_DEGENERATE {
            if o < VIEW_LO || o > VIEW_HI {
                return fallback_span(lo);
            }
            continue;
        }
        let (mut a, mut b) = ((VIEW_LO - o) / d, (VIEW_HI - o) / d);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        t_lo = t_lo.max(a);
        t_hi = t_hi.min(b);
    }
    if t_lo >= t_hi {
        return fallback_span(lo);
    }
    (t_lo, t_hi)
}

fn fallback_span(lo: f64) -> (f64, f64) {
    if lo.is_finite() {
        (0.0, 2.0)
    } else {
        (-1.0, 1.0)
    }
}

/// Tolerant equivalence between objects.
///
/// Same-kind objects compare by their defining data; the one cross-kind rule
/// is that a segment matches a line it is collinear with (both endpoints on
/// the line), because drawing a longer or shorter stroke of the same line is
/// the same construction.
pub fn equivalent(a: &Shape, b: &Shape, tol: f64) -> bool {
    match (a, b) {
        (Shape::Point(p), Shape::Point(q)) => p.dist(*q) < tol,
        (Shape::Line { anchor: a1, dir: d1 }, Shape::Line { anchor: a2, dir: d2 }) => {
            d1.cross(*d2).abs() < tol
                && distance_to(b, *a1) < tol
                && distance_to(a, *a2) < tol
        }
        (Shape::Ray { origin: o1, dir: d1 }, Shape::Ray { origin: o2, dir: d2 }) => {
            o1.dist(*o2) < tol && d1.cross(*d2).abs() < tol && d1.dot(*d2) > 0.0
        }
        (Shape::Segment { a: a1, b: b1 }, Shape::Segment { a: a2, b: b2 }) => {
            (a1.dist(*a2) < tol && b1.dist(*b2) < tol)
                || (a1.dist(*b2) < tol && b1.dist(*a2) < tol)
        }
        (Shape::Circle { center: c1, radius: r1 }, Shape::Circle { center: c2, radius: r2 }) => {
            c1.dist(*c2) < tol && (r1 - r2).abs() < tol
        }
        (Shape::Segment { a: sa, b: sb }, line @ Shape::Line { .. })
        | (line @ Shape::Line { .. }, Shape::Segment { a: sa, b: sb }) => {
            distance_to(line, *sa) < tol && distance_to(line, *sb) < tol
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(x: f64, y: f64) -> Shape {
        Shape::Point(Point::new(x, y))
    }

    #[test]
    fn compass_copies_a_distance() {
        let out = construct(
            ToolKind::Compass,
            &[&pt(5.0, 5.0), &pt(0.0, 0.0), &pt(3.0, 4.0)],
        )
        .unwrap();
        match out {
            Shape::Circle { center, radius } => {
                assert_abs_diff_eq!(center.x, 5.0);
                assert_abs_diff_eq!(center.y, 5.0);
                assert_abs_diff_eq!(radius, 5.0, epsilon = 1e-12);
            }
            other => panic!("expected circle, got {other:?}"),
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let err = construct(ToolKind::Line, &[&pt(0.25, 0.5), &pt(0.25, 0.5)]).unwrap_err();
        assert!(matches!(err, GeomError::DegenerateInput(_)));
    }

    #[test]
    fn unit_circles_intersect_in_canonical_order() {
        let c1 = Shape::Circle { center: Point::new(0.0, 0.0), radius: 1.0 };
        let c2 = Shape::Circle { center: Point::new(1.0, 0.0), radius: 1.0 };
        let pts = intersect(&c1, &c2);
        assert_eq!(pts.len(), 2);
        let h = 0.75f64.sqrt();
        assert_abs_diff_eq!(pts[0].x, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pts[0].y, -h, epsilon = 1e-12);
        assert_abs_diff_eq!(pts[1].y, h, epsilon = 1e-12);
    }

    #[test]
    fn ray_pointing_away_misses_circle() {
        let ray = Shape::Ray { origin: Point::new(0.0, 0.0), dir: Point::new(1.0, 0.0) };
        let circle = Shape::Circle { center: Point::new(-3.0, 0.0), radius: 1.0 };
        assert!(intersect(&ray, &circle).is_empty());
    }

    #[test]
    fn tangency_collapses_to_one_point() {
        let line = Shape::Line { anchor: Point::new(1.0, 0.0), dir: Point::new(0.0, 1.0) };
        let circle = Shape::Circle { center: Point::new(0.0, 0.0), radius: 1.0 };
        let pts = intersect(&line, &circle);
        assert_eq!(pts.len(), 1);
        assert_abs_diff_eq!(pts[0].x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pts[0].y, 0.0, epsilon = 1e-12);

        let c2 = Shape::Circle { center: Point::new(2.0, 0.0), radius: 1.0 };
        let touching = intersect(&circle, &c2);
        assert_eq!(touching.len(), 1);
        assert_abs_diff_eq!(touching[0].x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn parallel_lines_have_no_intersection() {
        let l1 = Shape::Line { anchor: Point::new(0.0, 0.0), dir: Point::new(1.0, 0.0) };
        let l2 = Shape::Line { anchor: Point::new(0.0, 1.0), dir: Point::new(1.0, 0.0) };
        assert!(intersect(&l1, &l2).is_empty());
    }

    #[test]
    fn segment_bounds_clip_intersections() {
        let seg = Shape::Segment { a: Point::new(0.0, 0.0), b: Point::new(0.4, 0.0) };
        let line = Shape::Line { anchor: Point::new(0.7, -1.0), dir: Point::new(0.0, 1.0) };
        assert!(intersect(&seg, &line).is_empty());
        let line2 = Shape::Line { anchor: Point::new(0.2, -1.0), dir: Point::new(0.0, 1.0) };
        assert_eq!(intersect(&seg, &line2).len(), 1);
    }

    #[test]
    fn angle_bisector_is_a_ray_from_the_vertex() {
        let out = construct(
            ToolKind::AngleBisector,
            &[&pt(1.0, 0.0), &pt(0.0, 0.0), &pt(0.0, 1.0)],
        )
        .unwrap();
        match out {
            Shape::Ray { origin, dir } => {
                assert_abs_diff_eq!(origin.x, 0.0);
                let expected = std::f64::consts::FRAC_1_SQRT_2;
                assert_abs_diff_eq!(dir.x, expected, epsilon = 1e-12);
                assert_abs_diff_eq!(dir.y, expected, epsilon = 1e-12);
            }
            other => panic!("expected ray, got {other:?}"),
        }
    }

    #[test]
    fn straight_angle_has_no_bisector() {
        let err = construct(
            ToolKind::AngleBisector,
            &[&pt(1.0, 0.0), &pt(0.0, 0.0), &pt(-1.0, 0.0)],
        )
        .unwrap_err();
        assert!(matches!(err, GeomError::DegenerateInput(_)));
    }

    #[test]
    fn equivalence_accepts_collinear_segment_and_line() {
        let line = Shape::Line { anchor: Point::new(0.0, 0.0), dir: Point::new(1.0, 0.0) };
        let seg = Shape::Segment { a: Point::new(0.2, 0.0), b: Point::new(0.9, 0.0) };
        assert!(equivalent(&seg, &line, EPS_MATCH));
        assert!(equivalent(&line, &seg, EPS_MATCH));
        let off = Shape::Segment { a: Point::new(0.2, 0.1), b: Point::new(0.9, 0.1) };
        assert!(!equivalent(&off, &line, EPS_MATCH));
    }

    #[test]
    fn equivalence_is_direction_insensitive_for_lines_but_not_rays() {
        let l1 = Shape::Line { anchor: Point::new(0.0, 0.0), dir: Point::new(1.0, 0.0) };
        let l2 = Shape::Line { anchor: Point::new(2.0, 0.0), dir: Point::new(-1.0, 0.0) };
        assert!(equivalent(&l1, &l2, EPS_MATCH));
        let r1 = Shape::Ray { origin: Point::new(0.0, 0.0), dir: Point::new(1.0, 0.0) };
        let r2 = Shape::Ray { origin: Point::new(0.0, 0.0), dir: Point::new(-1.0, 0.0) };
        assert!(!equivalent(&r1, &r2, EPS_MATCH));
    }

    #[test]
    fn sampling_respects_the_avoid_list() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let avoid = vec![Point::new(0.5, 0.5)];
        for _ in 0..100 {
            let p = sample_point(&SampleTarget::FreePlane, &mut rng, &avoid).unwrap();
            assert!(p.dist(avoid[0]) > EPS_SEPARATION);
        }
    }

    #[test]
    fn sampling_a_crowded_segment_exhausts() {
        // Every point of this tiny segment is within the separation radius of
        // its midpoint, so rejection can never succeed.
        let seg = Shape::Segment { a: Point::new(0.0, 0.0), b: Point::new(1e-4, 0.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let avoid = vec![Point::new(5e-5, 0.0)];
        let err = sample_point(&SampleTarget::On(&seg), &mut rng, &avoid).unwrap_err();
        assert!(matches!(err, GeomError::SamplingExhausted(100)));
    }

    #[test]
    fn scene_rejects_duplicate_labels() {
        let mut scene = Scene::new(0);
        scene.push("A", pt(0.1, 0.2)).unwrap();
        assert!(scene.push("A", pt(0.3, 0.4)).is_err());
        assert!(scene.get("A").is_some());
    }

    #[test]
    fn cloned_scenes_draw_identical_samples() {
        let mut s1 = Scene::new(99);
        let mut s2 = s1.clone();
        let p1 = sample_point(&SampleTarget::FreePlane, s1.rng_mut(), &[]).unwrap();
        let p2 = sample_point(&SampleTarget::FreePlane, s2.rng_mut(), &[]).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn tolerance_ladder_is_ordered() {
        assert!(EPS_DEGENERATE < EPS_MATCH);
        assert!(EPS_MATCH < EPS_SEPARATION);
    }
}
