//! Planar primitives shared by the path, corridor and perception code.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Absolute tolerance used for incidence tests (meters).
pub const GEOM_EPS: f64 = 1e-9;

/// A point or direction in the world frame. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Closed polygon given by its vertices; the closing edge is implicit.
pub type Polygon = Vec<Vec2>;

pub fn edges(poly: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    let n = poly.len();
    (0..n).map(move |i| (poly[i], poly[(i + 1) % n]))
}

/// Shoelace area, positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    edges(poly).map(|(a, b)| a.cross(b)).sum::<f64>() * 0.5
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * s)
}

fn orientation(a: Vec2, b: Vec2, c: Vec2) -> i8 {
    let v = (b - a).cross(c - a);
    if v > GEOM_EPS {
        1
    } else if v < -GEOM_EPS {
        -1
    } else {
        0
    }
}

fn on_segment(p: Vec2, a: Vec2, b: Vec2) -> bool {
    point_segment_distance(p, a, b) <= GEOM_EPS
}

/// Closed-segment intersection test, touching counts.
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    on_segment(c, a, b) || on_segment(d, a, b) || on_segment(a, c, d) || on_segment(b, c, d)
}

/// Intersection point of two closed segments if they cross at a single point.
pub fn segment_intersection(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<Vec2> {
    let r = b - a;
    let s = d - c;
    let denom = r.cross(s);
    if denom.abs() < 1e-15 {
        return None;
    }
    let t = (c - a).cross(s) / denom;
    let u = (c - a).cross(r) / denom;
    let tol = 1e-12;
    if (-tol..=1.0 + tol).contains(&t) && (-tol..=1.0 + tol).contains(&u) {
        Some(a + r * t)
    } else {
        None
    }
}

/// A polygon is simple when it has at least three vertices, non-zero area
/// and no two non-adjacent edges touch.
pub fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    if n < 3 || signed_area(poly).abs() <= GEOM_EPS {
        return false;
    }
    if poly.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a.distance(b) <= GEOM_EPS {
            return false;
        }
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
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

/// Point-in-polygon with the boundary counted as inside.
pub fn contains_point(poly: &[Vec2], p: Vec2) -> bool {
    if edges(poly).any(|(a, b)| point_segment_distance(p, a, b) <= GEOM_EPS) {
        return true;
    }
    let mut inside = false;
    for (a, b) in edges(poly) {
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Parameter intervals `[t0, t1]` for which `origin + t * dir` lies inside the
/// closed polygon. `dir` must be unit length. Intervals are sorted and
/// disjoint; isolated tangent points are dropped.
pub fn line_intervals(poly: &[Vec2], origin: Vec2, dir: Vec2) -> Vec<(f64, f64)> {
    let mut params: Vec<f64> = Vec::new();
    for (a, b) in edges(poly) {
        let e = b - a;
        let denom = dir.cross(e);
        let scale = e.norm().max(1.0);
        if denom.abs() <= 1e-12 * scale {
            if (a - origin).cross(dir).abs() <= GEOM_EPS {
                params.push((a - origin).dot(dir));
                params.push((b - origin).dot(dir));
            }
            continue;
        }
        let w = a - origin;
        let t = w.cross(e) / denom;
        let s = w.cross(dir) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&s) {
            params.push(t);
        }
    }
    params.sort_by(|a, b| a.total_cmp(b));
    params.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    let mut out: Vec<(f64, f64)> = Vec::new();
    for w in params.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mid = origin + dir * (0.5 * (t0 + t1));
        if !contains_point(poly, mid) {
            continue;
        }
        match out.last_mut() {
            Some(last) if (last.1 - t0).abs() <= 1e-12 => last.1 = t1,
            _ => out.push((t0, t1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ]
    }

    #[test]
    fn simple_polygons() {
        assert!(is_simple(&square(0.0, 0.0, 1.0, 1.0)));
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(!is_simple(&bowtie));
        assert!(!is_simple(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]));
    }

    #[test]
    fn line_through_square() {
        let sq = square(10.0, -3.0, 20.0, 1.0);
        let iv = line_intervals(&sq, Vec2::new(15.0, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 + 3.0).abs() < 1e-12 && (iv[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn line_along_edge_is_inside() {
        let sq = square(10.0, -3.0, 20.0, 1.0);
        let iv = line_intervals(&sq, Vec2::new(10.0, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 + 3.0).abs() < 1e-12 && (iv[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concave_polygon_yields_two_intervals() {
        // U shape opening upwards
        let u = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 3.0),
            Vec2::new(2.0, 3.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 3.0),
            Vec2::new(0.0, 3.0),
        ];
        let iv = line_intervals(&u, Vec2::new(-1.0, 2.0), Vec2::new(1.0, 0.0));
        assert_eq!(iv.len(), 2);
        let iv = line_intervals(&u, Vec2::new(-1.0, 0.5), Vec2::new(1.0, 0.0));
        assert_eq!(iv.len(), 1);
    }
}
