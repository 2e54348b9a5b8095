//! Planar and spatial primitives shared by the planner, encoder and simulator.
//!
//! Polygons are plain vertex lists, counter-clockwise, without a repeated
//! closing vertex. Most helpers assume convexity because every feature
//! boundary handled by the planner is convex.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Geometric comparison tolerance in millimetres.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    pub fn with_z(self, z: f64) -> Point3 {
        Point3::new(self.x, self.y, z)
    }

    pub fn rotated(self, angle_rad: f64) -> Point2 {
        let (s, c) = angle_rad.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Lexicographic order on (x, y).
    pub fn lex_cmp(&self, o: &Point2) -> std::cmp::Ordering {
        self.x.total_cmp(&o.x).then(self.y.total_cmp(&o.y))
    }
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Point3, t: f64) -> Point3 {
        self + (o - self) * t
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
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

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Distance from `p` to the closed segment `a`-`b`.
pub fn distance_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Distance from `p` to the closed 3D segment `a`-`b`.
pub fn distance_to_segment3(p: Point3, a: Point3, b: Point3) -> f64 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y + ab.z * ab.z;
    if len2 <= 0.0 {
        return p.distance(a);
    }
    let ap = p - a;
    let t = ((ap.x * ab.x + ap.y * ab.y + ap.z * ab.z) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Iterator over the closed edges of a polygon.
pub fn edges(poly: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

pub fn signed_area(poly: &[Point2]) -> f64 {
    edges(poly).map(|(a, b)| a.cross(b)).sum::<f64>() * 0.5
}

/// Area centroid; falls back to the vertex mean for degenerate polygons.
pub fn centroid(poly: &[Point2]) -> Point2 {
    let a = signed_area(poly);
    if a.abs() < EPS {
        let n = poly.len().max(1) as f64;
        let s = poly.iter().fold(Point2::default(), |acc, &p| acc + p);
        return s * (1.0 / n);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for (p, q) in edges(poly) {
        let c = p.cross(q);
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    Point2::new(cx / (6.0 * a), cy / (6.0 * a))
}

pub fn perimeter(poly: &[Point2]) -> f64 {
    edges(poly).map(|(a, b)| a.distance(b)).sum()
}

/// True when no two non-adjacent edges touch.
pub fn is_simple(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if poly[i].distance(poly[(i + 1) % n]) < EPS {
            return false;
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) - EPS
        && p.x <= a.x.max(b.x) + EPS
        && p.y >= a.y.min(b.y) - EPS
        && p.y <= a.y.max(b.y) + EPS
}

pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    (d1.abs() <= EPS && on_segment(c, d, a))
        || (d2.abs() <= EPS && on_segment(c, d, b))
        || (d3.abs() <= EPS && on_segment(a, b, c))
        || (d4.abs() <= EPS && on_segment(a, b, d))
}

/// Strict convexity for a counter-clockwise polygon (collinear vertices rejected).
pub fn is_convex_ccw(poly: &[Point2]) -> bool {
    let n = poly.len();
    n >= 3
        && (0..n).all(|i| orient(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) > EPS)
}

/// Point-in-polygon by crossing number; boundary points count as inside.
pub fn contains(poly: &[Point2], p: Point2) -> bool {
    if edges(poly).any(|(a, b)| distance_to_segment(p, a, b) <= 1e-9) {
        return true;
    }
    let mut inside = false;
    for (a, b) in edges(poly) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from `p` to the polygon outline.
pub fn distance_to_boundary(poly: &[Point2], p: Point2) -> f64 {
    edges(poly)
        .map(|(a, b)| distance_to_segment(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Index of the lexicographically smallest vertex.
pub fn lex_min_index(poly: &[Point2]) -> usize {
    (0..poly.len())
        .min_by(|&i, &j| poly[i].lex_cmp(&poly[j]))
        .unwrap_or(0)
}

/// Rotates the vertex list so it starts at the lexicographically smallest vertex.
pub fn canonical_start(poly: &[Point2]) -> Vec<Point2> {
    let k = lex_min_index(poly);
    poly[k..].iter().chain(poly[..k].iter()).copied().collect()
}

/// Outward unit normal of the edge `a`-`b` of a counter-clockwise polygon.
pub fn outward_normal(a: Point2, b: Point2) -> Point2 {
    let d = (b - a).normalized();
    Point2::new(d.y, -d.x)
}

/// Keeps the part of a convex polygon where `n·p <= c`.
pub fn clip_halfplane(poly: &[Point2], n: Point2, c: f64) -> Vec<Point2> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let len = poly.len();
    for i in 0..len {
        let p = poly[i];
        let q = poly[(i + 1) % len];
        let dp = n.dot(p) - c;
        let dq = n.dot(q) - c;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Removes consecutive near-duplicate and collinear vertices.
pub fn cleanup(poly: &[Point2], tol: f64) -> Vec<Point2> {
    let mut pts: Vec<Point2> = Vec::with_capacity(poly.len());
    for &p in poly {
        if pts.last().map_or(true, |q: &Point2| q.distance(p) > tol) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts[0].distance(pts[pts.len() - 1]) <= tol {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let a = pts[(i + n - 1) % n];
            let b = pts[i];
            let c = pts[(i + 1) % n];
            let area2 = (b - a).cross(c - b);
            if area2.abs() <= tol * (a.distance(c)).max(tol) {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

/// Shrinks a convex ccw polygon by moving every edge inward by `d`.
/// Returns an empty vector when nothing of positive area is left.
pub fn inset_convex(poly: &[Point2], d: f64) -> Vec<Point2> {
    let (lo, hi) = bbox(poly);
    let pad = (hi.x - lo.x).max(hi.y - lo.y) + d.abs() + 1.0;
    let mut region = vec![
        Point2::new(lo.x - pad, lo.y - pad),
        Point2::new(hi.x + pad, lo.y - pad),
        Point2::new(hi.x + pad, hi.y + pad),
        Point2::new(lo.x - pad, hi.y + pad),
    ];
    for (a, b) in edges(poly) {
        let n = outward_normal(a, b);
        region = clip_halfplane(&region, n, n.dot(a) - d);
        if region.len() < 3 {
            return Vec::new();
        }
    }
    let out = cleanup(&region, 1e-9);
    if out.len() < 3 || signed_area(&out) <= 1e-12 {
        Vec::new()
    } else {
        out
    }
}

/// True when some point lies at least `d` inside every edge.
fn inset_feasible(poly: &[Point2], d: f64) -> bool {
    let (lo, hi) = bbox(poly);
    let mut region = rectangle(lo, hi);
    for (a, b) in edges(poly) {
        let n = outward_normal(a, b);
        region = clip_halfplane(&region, n, n.dot(a) - d);
        if region.is_empty() {
            return false;
        }
    }
    true
}

/// Radius of the largest inscribed circle of a convex polygon.
pub fn inradius_convex(poly: &[Point2]) -> f64 {
    let (lo, hi) = bbox(poly);
    let (mut a, mut b) = (0.0, 0.5 * (hi.x - lo.x).max(hi.y - lo.y));
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if !inset_feasible(poly, m) {
            b = m;
        } else {
            a = m;
        }
        if b - a < 1e-13 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Minimal width of a convex polygon (smallest caliper distance).
pub fn min_width_convex(poly: &[Point2]) -> f64 {
    edges(poly)
        .map(|(a, b)| {
            let n = outward_normal(a, b);
            poly.iter()
                .map(|&p| n.dot(a - p))
                .fold(0.0_f64, f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn bbox(poly: &[Point2]) -> (Point2, Point2) {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in poly {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

pub fn rectangle(lo: Point2, hi: Point2) -> Vec<Point2> {
    vec![
        lo,
        Point2::new(hi.x, lo.y),
        hi,
        Point2::new(lo.x, hi.y),
    ]
}

/// Round half up to an integer.
pub fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}
