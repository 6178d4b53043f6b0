//! Convex polygon primitives: splitting by a line, support and width
//! functions, intrinsic volumes, containment, clipping and uniform sampling.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative snap tolerance for vertex deduplication and near-vertex hits.
pub const SNAP_TOLERANCE: f64 = 1e-12;

/// A split piece smaller than this fraction of the parent area is degenerate.
pub const DEGENERATE_AREA_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GeometryError {
    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
    #[error("hyperplane angle {0} outside [0, pi)")]
    InvalidAngle(f64),
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("degenerate split: piece area fraction {fraction:e}")]
    DegenerateSplit { fraction: f64 },
    #[error("containment violation: {0}")]
    ContainmentViolation(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Unit normal of the line family at angle `theta`.
    pub fn unit(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Point::new(c, s)
    }

    fn lex_cmp(&self, other: &Point) -> std::cmp::Ordering {
        self.x.total_cmp(&other.x).then(self.y.total_cmp(&other.y))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// The line `{x : <x, u> = a}` with `u = (cos theta, sin theta)` in the upper
/// half-circle. The closed half-plane `<x, u> >= a` is the plus side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperplane {
    theta: f64,
    a: f64,
}

impl Hyperplane {
    pub fn new(theta: f64, a: f64) -> Result<Self> {
        if !(0.0..PI).contains(&theta) {
            return Err(GeometryError::InvalidAngle(theta));
        }
        if !a.is_finite() {
            return Err(GeometryError::NonFinite("hyperplane offset"));
        }
        Ok(Hyperplane { theta, a })
    }

    /// The line with normal angle `theta` passing through `p`.
    pub fn through(theta: f64, p: Point) -> Result<Self> {
        Self::new(theta, p.dot(Point::unit(theta)))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn offset(&self) -> f64 {
        self.a
    }

    pub fn normal(&self) -> Point {
        Point::unit(self.theta)
    }

    /// `<p, u> - a`; positive on the plus side.
    pub fn signed_distance(&self, p: Point) -> f64 {
        p.dot(self.normal()) - self.a
    }

    /// True iff the line meets the interior of `c`, i.e. lies strictly inside
    /// the offset interval `[-h_C(-u), h_C(u)]`.
    pub fn hits_interior(&self, c: &Polygon) -> bool {
        let (lo, hi) = c.offset_interval(self.theta);
        lo < self.a && self.a < hi
    }

    /// True iff the line meets the closed polygon.
    pub fn hits(&self, c: &Polygon) -> bool {
        let (lo, hi) = c.offset_interval(self.theta);
        lo <= self.a && self.a <= hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p: Point,
    pub q: Point,
}

impl Segment {
    pub fn new(p: Point, q: Point) -> Result<Self> {
        if !p.is_finite() || !q.is_finite() {
            return Err(GeometryError::NonFinite("segment"));
        }
        let scale = p.norm().max(q.norm()).max(1.0);
        if p.dist(q) <= SNAP_TOLERANCE * scale {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(Segment { p, q })
    }

    pub fn length(&self) -> f64 {
        self.p.dist(self.q)
    }

    pub fn direction(&self) -> Point {
        self.q - self.p
    }

    pub fn midpoint(&self) -> Point {
        (self.p + self.q) * 0.5
    }

    /// Same segment with endpoints in lexicographic order.
    pub fn canonical(&self) -> Segment {
        if self.p.lex_cmp(&self.q).is_gt() {
            Segment { p: self.q, q: self.p }
        } else {
            *self
        }
    }

    /// Closed-segment intersection test, with `tol` slack on orientation tests.
    pub fn intersects(&self, other: &Segment, tol: f64) -> bool {
        let d1 = self.direction();
        let d2 = other.direction();
        let o1 = d1.cross(other.p - self.p);
        let o2 = d1.cross(other.q - self.p);
        let o3 = d2.cross(self.p - other.p);
        let o4 = d2.cross(self.q - other.p);
        let t1 = tol * d1.norm();
        let t2 = tol * d2.norm();
        let straddle1 = (o1 <= t1 && o2 >= -t1) || (o1 >= -t1 && o2 <= t1);
        let straddle2 = (o3 <= t2 && o4 >= -t2) || (o3 >= -t2 && o4 <= t2);
        if !(straddle1 && straddle2) {
            return false;
        }
        if o1.abs() <= t1 && o2.abs() <= t1 {
            // Collinear: compare projections on d1.
            let len2 = d1.dot(d1);
            let s0 = (other.p - self.p).dot(d1) / len2;
            let s1 = (other.q - self.p).dot(d1) / len2;
            let slack = tol / d1.norm();
            return s0.max(s1) >= -slack && s0.min(s1) <= 1.0 + slack;
        }
        true
    }
}

/// Result of splitting a polygon by a line.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    /// `C ∩ h⁺`, `None` when it has empty interior.
    pub plus: Option<Polygon>,
    /// `C ∩ h⁻`, `None` when it has empty interior.
    pub minus: Option<Polygon>,
    /// `h ∩ C` when both pieces are nonempty.
    pub trace: Option<Segment>,
}

impl Split {
    pub fn is_proper(&self) -> bool {
        self.plus.is_some() && self.minus.is_some()
    }
}

/// Convex polygon with counter-clockwise vertices, starting at the
/// lexicographically smallest vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point>,
}

impl Polygon {
    /// Validates and canonicalizes a counter-clockwise vertex list.
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        let poly = Polygon::canonicalized(vertices);
        poly.validate()?;
        Ok(poly)
    }

    pub fn from_coords(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    /// Axis-parallel rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::from_coords(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    }

    /// Square of side `side` centered at `center`.
    pub fn square(center: Point, side: f64) -> Result<Self> {
        let h = side / 2.0;
        Self::rectangle(center.x - h, center.y - h, center.x + h, center.y + h)
    }

    /// Regular `n`-gon inscribed in the circle of radius `r` around `center`.
    pub fn regular(center: Point, r: f64, n: usize) -> Result<Self> {
        let verts = (0..n)
            .map(|k| center + Point::unit(2.0 * PI * k as f64 / n as f64) * r)
            .collect();
        Self::new(verts)
    }

    /// Convex hull (monotone chain), collinear points dropped.
    pub fn convex_hull(points: &[Point]) -> Result<Self> {
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.lex_cmp(b));
        pts.dedup();
        if pts.len() < 3 {
            return Err(GeometryError::InvalidPolygon("hull of fewer than 3 points".into()));
        }
        let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for &p in iter {
                while hull.len() >= start + 2 {
                    let a = hull[hull.len() - 2];
                    let b = hull[hull.len() - 1];
                    if (b - a).cross(p - b) <= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(p);
            }
            hull.pop();
        }
        Self::new(hull)
    }

    fn canonicalized(mut vertices: Vec<Point>) -> Self {
        if let Some(start) = vertices
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.lex_cmp(b.1))
            .map(|(i, _)| i)
        {
            vertices.rotate_left(start);
        }
        Polygon { vertices }
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return Err(GeometryError::InvalidPolygon(format!(
                "{n} vertices, need at least 3"
            )));
        }
        if v.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite("polygon vertex"));
        }
        let tol = SNAP_TOLERANCE * self.scale();
        for i in 0..n {
            let a = v[i];
            let b = v[(i + 1) % n];
            let c = v[(i + 2) % n];
            if a.dist(b) <= tol {
                return Err(GeometryError::InvalidPolygon(format!(
                    "repeated vertex {a}"
                )));
            }
            if (b - a).cross(c - b) <= 0.0 {
                return Err(GeometryError::InvalidPolygon(format!(
                    "not strictly convex counter-clockwise at {b}"
                )));
            }
        }
        // Turning number must be one: rules out star-shaped self-intersections.
        let total_turn: f64 = (0..n)
            .map(|i| {
                let e1 = v[(i + 1) % n] - v[i];
                let e2 = v[(i + 2) % n] - v[(i + 1) % n];
                e1.cross(e2).atan2(e1.dot(e2))
            })
            .sum();
        if (total_turn - 2.0 * PI).abs() > 1e-6 {
            return Err(GeometryError::InvalidPolygon(
                "self-intersecting vertex list".into(),
            ));
        }
        if self.area() <= 0.0 {
            return Err(GeometryError::InvalidPolygon("non-positive area".into()));
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn perimeter(&self) -> f64 {
        self.edges().map(|(a, b)| a.dist(b)).sum()
    }

    /// `(v0, v1, v2)` with `v1 = perimeter / 2` and `v2 = area`.
    pub fn intrinsic_volumes(&self) -> [f64; 3] {
        [1.0, 0.5 * self.perimeter(), self.area()]
    }

    /// Diagonal of the bounding box; the length scale for tolerances.
    pub fn scale(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.dist(hi)
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        self.vertices.iter().fold(
            (
                Point::new(f64::INFINITY, f64::INFINITY),
                Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
            ),
            |(lo, hi), p| {
                (
                    Point::new(lo.x.min(p.x), lo.y.min(p.y)),
                    Point::new(hi.x.max(p.x), hi.y.max(p.y)),
                )
            },
        )
    }

    /// Largest vertex-pair distance.
    pub fn diameter(&self) -> f64 {
        let v = &self.vertices;
        let mut best = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                best = best.max(v[i].dist(v[j]));
            }
        }
        best
    }

    pub fn centroid(&self) -> Point {
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        for (p, q) in self.edges() {
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
            a2 += c;
        }
        Point::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }

    pub fn translate(&self, by: Point) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|&p| p + by).collect(),
        }
    }

    /// Support function `h_C(sign * u(theta)) = max_v <v, sign * u>`.
    pub fn support(&self, theta: f64, sign: f64) -> f64 {
        let u = Point::unit(theta) * sign;
        self.vertices
            .iter()
            .map(|v| v.dot(u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Offsets `a` for which the line at angle `theta` meets the polygon:
    /// `[-h_C(-u), h_C(u)]`.
    pub fn offset_interval(&self, theta: f64) -> (f64, f64) {
        let u = Point::unit(theta);
        self.vertices
            .iter()
            .map(|v| v.dot(u))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s), hi.max(s))
            })
    }

    pub fn width(&self, theta: f64) -> f64 {
        self.support(theta, 1.0) + self.support(theta, -1.0)
    }

    /// Point-in-polygon with `tol` (absolute) slack outward.
    pub fn contains_point(&self, p: Point, tol: f64) -> bool {
        self.edges().all(|(a, b)| {
            let e = b - a;
            e.cross(p - a) >= -tol * e.norm()
        })
    }

    /// Vertex-wise containment check, tolerant to `SNAP_TOLERANCE` of the
    /// container's scale.
    pub fn contains_polygon(&self, other: &Polygon) -> bool {
        let tol = SNAP_TOLERANCE * self.scale();
        other.vertices.iter().all(|&p| self.contains_point(p, tol))
    }

    /// True iff `p` lies on the boundary within `tol`.
    pub fn on_boundary(&self, p: Point, tol: f64) -> bool {
        self.contains_point(p, tol)
            && self.edges().any(|(a, b)| {
                let e = b - a;
                (e.cross(p - a) / e.norm()).abs() <= tol
            })
    }

    /// Splits the polygon into `C ∩ h⁺` and `C ∩ h⁻`.
    pub fn split(&self, h: &Hyperplane) -> Result<Split> {
        let tol = SNAP_TOLERANCE * self.scale();
        let dist: Vec<f64> = self
            .vertices
            .iter()
            .map(|&p| h.signed_distance(p))
            .collect();
        let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
        let dmax = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if dmin >= -tol {
            return Ok(Split {
                plus: Some(self.clone()),
                minus: None,
                trace: None,
            });
        }
        if dmax <= tol {
            return Ok(Split {
                plus: None,
                minus: Some(self.clone()),
                trace: None,
            });
        }
        if dist.iter().any(|d| d.abs() <= tol) {
            return Err(GeometryError::DegenerateSplit { fraction: 0.0 });
        }

        let n = self.vertices.len();
        let mut plus = Vec::with_capacity(n + 2);
        let mut minus = Vec::with_capacity(n + 2);
        let mut cuts = Vec::with_capacity(2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (self.vertices[i], self.vertices[j]);
            let (dp, dq) = (dist[i], dist[j]);
            if dp > 0.0 {
                plus.push(p);
            } else {
                minus.push(p);
            }
            if (dp > 0.0) != (dq > 0.0) {
                let t = dp / (dp - dq);
                let x = p + (q - p) * t;
                plus.push(x);
                minus.push(x);
                cuts.push(x);
            }
        }
        if cuts.len() != 2 {
            return Err(GeometryError::DegenerateSplit { fraction: 0.0 });
        }
        let plus = Polygon::canonicalized(plus);
        let minus = Polygon::canonicalized(minus);
        let total = self.area();
        let fraction = plus.area().min(minus.area()) / total;
        if !(fraction >= DEGENERATE_AREA_FRACTION) {
            return Err(GeometryError::DegenerateSplit { fraction });
        }
        if plus.validate().is_err() || minus.validate().is_err() {
            return Err(GeometryError::DegenerateSplit { fraction });
        }
        let trace =
            Segment::new(cuts[0], cuts[1]).map_err(|_| GeometryError::DegenerateSplit { fraction })?;
        Ok(Split {
            plus: Some(plus),
            minus: Some(minus),
            trace: Some(trace),
        })
    }

    /// Clips a segment to the closed polygon. Endpoints already inside (within
    /// `tol`) are returned bit-for-bit, so clipping is idempotent.
    pub fn clip_segment(&self, s: &Segment, tol: f64) -> Option<Segment> {
        let d = s.direction();
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        for (a, b) in self.edges() {
            let e = b - a;
            let en = e.norm();
            // Inward distance of p and rate of change along d.
            let num = e.cross(s.p - a) / en;
            let den = e.cross(d) / en;
            let num_q = num + den;
            if num < -tol && num_q < -tol {
                return None;
            }
            if num < -tol {
                t0 = t0.max(-num / den);
            } else if num_q < -tol {
                t1 = t1.min(-num / den);
            }
        }
        if t1 - t0 <= 0.0 {
            return None;
        }
        let p = if t0 == 0.0 { s.p } else { s.p + d * t0 };
        let q = if t1 == 1.0 { s.q } else { s.p + d * t1 };
        if p.dist(q) <= tol {
            return None;
        }
        Some(Segment { p, q })
    }

    /// Closed segment meets closed polygon.
    pub fn intersects_segment(&self, s: &Segment, tol: f64) -> bool {
        if self.contains_point(s.p, tol) || self.contains_point(s.q, tol) {
            return true;
        }
        self.edges().any(|(a, b)| {
            Segment { p: a, q: b }.intersects(s, tol)
        })
    }

    /// Uniform point: fan-triangulate from vertex 0, choose a triangle with
    /// probability proportional to its area, then use the square-root map.
    pub fn sample_uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let v = &self.vertices;
        let o = v[0];
        let areas: Vec<f64> = (1..v.len() - 1)
            .map(|i| 0.5 * (v[i] - o).cross(v[i + 1] - o))
            .collect();
        let total: f64 = areas.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut k = areas.len() - 1;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                k = i;
                break;
            }
            pick -= a;
        }
        let (b, c) = (v[k + 1], v[k + 2]);
        let r1 = rng.random::<f64>().sqrt();
        let r2 = rng.random::<f64>();
        o * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
    }
}
