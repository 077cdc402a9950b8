//! Arc-length parameterized reference polyline.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("reference path needs at least two vertices, got {0}")]
    TooFewVertices(usize),
    #[error("reference path segment {0} has zero length or non-finite coordinates")]
    DegenerateSegment(usize),
}

/// Local frame of the path at a progress value together with its
/// derivatives with respect to progress.
#[derive(Debug, Clone, Copy)]
pub struct PathFrame {
    pub point: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
    pub d_point: Vec2,
    pub d_tangent: Vec2,
    pub d_normal: Vec2,
}

/// Polyline with cumulative arc length and smoothed per-vertex tangents.
///
/// Positions interpolate linearly between vertices; tangents and normals
/// interpolate the vertex tangents and renormalize, which makes the frame
/// continuous in progress. Outside `[0, length]` the path is extended along
/// its end tangents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec2>", into = "Vec<Vec2>")]
pub struct ReferencePath {
    points: Vec<Vec2>,
    arc: Vec<f64>,
    tangents: Vec<Vec2>,
}

impl TryFrom<Vec<Vec2>> for ReferencePath {
    type Error = PathError;
    fn try_from(points: Vec<Vec2>) -> Result<Self, PathError> {
        ReferencePath::new(points)
    }
}

impl From<ReferencePath> for Vec<Vec2> {
    fn from(p: ReferencePath) -> Self {
        p.points
    }
}

impl ReferencePath {
    pub fn new(points: Vec<Vec2>) -> Result<Self, PathError> {
        if points.len() < 2 {
            return Err(PathError::TooFewVertices(points.len()));
        }
        let mut arc = Vec::with_capacity(points.len());
        arc.push(0.0);
        let mut dirs = Vec::with_capacity(points.len() - 1);
        for (i, w) in points.windows(2).enumerate() {
            let d = w[1] - w[0];
            let len = d.norm();
            if !(len > 0.0 && len.is_finite()) {
                return Err(PathError::DegenerateSegment(i));
            }
            dirs.push(d * (1.0 / len));
            arc.push(arc[i] + len);
        }
        let n = points.len();
        let mut tangents = Vec::with_capacity(n);
        tangents.push(dirs[0]);
        for i in 1..n - 1 {
            let sum = dirs[i - 1] + dirs[i];
            if sum.norm() < 1e-9 {
                tangents.push(dirs[i]);
            } else {
                tangents.push(sum.normalized());
            }
        }
        tangents.push(dirs[n - 2]);
        Ok(Self { points, arc, tangents })
    }

    /// Straight path from `start` in direction `heading` (radians).
    pub fn straight(start: Vec2, heading: f64, length: f64) -> Result<Self, PathError> {
        let dir = Vec2::new(libm::cos(heading), libm::sin(heading));
        Self::new(alloc::vec![start, start + dir * length])
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.points
    }

    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc
    }

    pub fn vertex_tangents(&self) -> &[Vec2] {
        &self.tangents
    }

    pub fn length(&self) -> f64 {
        self.arc[self.arc.len() - 1]
    }

    /// Index `i` of the segment `[arc[i], arc[i+1]]` containing `theta`
    /// (clamped to the first/last segment).
    fn segment(&self, theta: f64) -> usize {
        let last = self.arc.len() - 2;
        if theta <= 0.0 {
            return 0;
        }
        match self.arc.binary_search_by(|s| s.total_cmp(&theta)) {
            Ok(i) => i.min(last),
            Err(i) => (i - 1).min(last),
        }
    }

    pub fn point(&self, theta: f64) -> Vec2 {
        self.frame(theta).point
    }

    pub fn tangent(&self, theta: f64) -> Vec2 {
        self.frame(theta).tangent
    }

    pub fn normal(&self, theta: f64) -> Vec2 {
        self.frame(theta).normal
    }

    pub fn frame(&self, theta: f64) -> PathFrame {
        let len = self.length();
        let n = self.points.len();
        if theta < 0.0 || theta > len {
            let (anchor, t, s0) = if theta < 0.0 {
                (self.points[0], self.tangents[0], 0.0)
            } else {
                (self.points[n - 1], self.tangents[n - 1], len)
            };
            return PathFrame {
                point: anchor + t * (theta - s0),
                tangent: t,
                normal: t.perp(),
                d_point: t,
                d_tangent: Vec2::default(),
                d_normal: Vec2::default(),
            };
        }
        let i = self.segment(theta);
        let seg_len = self.arc[i + 1] - self.arc[i];
        let lambda = (theta - self.arc[i]) / seg_len;
        let (p0, p1) = (self.points[i], self.points[i + 1]);
        let d_point = (p1 - p0) * (1.0 / seg_len);
        let point = p0 + (p1 - p0) * lambda;

        let (t0, t1) = (self.tangents[i], self.tangents[i + 1]);
        let raw = t0 * (1.0 - lambda) + t1 * lambda;
        let d_raw = (t1 - t0) * (1.0 / seg_len);
        let r = raw.norm();
        let tangent = raw * (1.0 / r);
        // derivative of raw / |raw|
        let d_tangent = (d_raw - tangent * tangent.dot(d_raw)) * (1.0 / r);
        PathFrame {
            point,
            tangent,
            normal: tangent.perp(),
            d_point,
            d_tangent,
            d_normal: d_tangent.perp(),
        }
    }

    /// Nearest point on the polyline: returns `(theta, signed lateral
    /// offset)` where the offset is measured along the left normal at
    /// `theta`. Endpoints clamp.
    pub fn project(&self, position: Vec2) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let ab = b - a;
            let len = self.arc[i + 1] - self.arc[i];
            let s = ((position - a).dot(ab) / (len * len)).clamp(0.0, 1.0);
            let d = position.distance(a + ab * s);
            if d < best.0 {
                best = (d, self.arc[i] + s * len);
            }
        }
        let theta = best.1;
        let f = self.frame(theta);
        (theta, f.normal.dot(position - f.point))
    }
}

/// Free-function form of [`ReferencePath::project`].
pub fn project_to_path(path: &ReferencePath, position: Vec2) -> (f64, f64) {
    path.project(position)
}
