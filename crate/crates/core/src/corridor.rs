//! Drivable corridor: sampled lateral bounds over progress plus a
//! longitudinal stop limit, and the operator-facing edit operations.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, Vec2};
use crate::path::ReferencePath;

/// Default spacing of corridor samples along the path (meters).
pub const DEFAULT_SAMPLE_SPACING: f64 = 0.5;
/// Clearance required on top of the vehicle disc diameter.
pub const WIDTH_MARGIN: f64 = 0.2;

/// Longitudinal progress limit. Serialized as a number or `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "Option<f64>", into = "Option<f64>")]
pub enum StopLimit {
    Unbounded,
    At(f64),
}

impl StopLimit {
    pub fn value(self) -> Option<f64> {
        match self {
            StopLimit::Unbounded => None,
            StopLimit::At(v) => Some(v),
        }
    }

    pub fn is_bounded(self) -> bool {
        matches!(self, StopLimit::At(_))
    }
}

impl From<Option<f64>> for StopLimit {
    fn from(v: Option<f64>) -> Self {
        v.map_or(StopLimit::Unbounded, StopLimit::At)
    }
}

impl From<StopLimit> for Option<f64> {
    fn from(s: StopLimit) -> Self {
        s.value()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModificationError {
    #[error("modification polygon must be simple with at least three vertices")]
    InvalidPolygon,
    #[error("union with the polygon is disconnected along the normal at theta = {theta:.2}")]
    Disconnected { theta: f64 },
    #[error("corridor width {width:.3} m at theta = {theta:.2} is below the minimum {min:.3} m")]
    TooNarrow { theta: f64, width: f64, min: f64 },
    #[error("stop limit {0} is outside the path domain")]
    StopOutOfDomain(f64),
}

/// Piecewise-linear lateral bounds sampled every `spacing` meters of
/// progress, starting at zero. Offsets are signed, positive to the left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub(crate) spacing: f64,
    pub(crate) left: Vec<f64>,
    pub(crate) right: Vec<f64>,
    pub(crate) stop: StopLimit,
}

impl Corridor {
    /// Constant-width corridor covering `[0, length]`.
    pub fn uniform(length: f64, spacing: f64, left: f64, right: f64) -> Self {
        let n = libm::ceil(length / spacing) as usize + 1;
        Self {
            spacing,
            left: alloc::vec![left; n],
            right: alloc::vec![right; n],
            stop: StopLimit::Unbounded,
        }
    }

    pub fn from_samples(spacing: f64, left: Vec<f64>, right: Vec<f64>, stop: StopLimit) -> Self {
        assert!(
            left.len() == right.len() && left.len() >= 2,
            "corridor needs >= 2 samples"
        );
        Self {
            spacing,
            left,
            right,
            stop,
        }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn left_samples(&self) -> &[f64] {
        &self.left
    }

    pub fn right_samples(&self) -> &[f64] {
        &self.right
    }

    pub fn stop(&self) -> StopLimit {
        self.stop
    }

    pub fn sample_theta(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    pub(crate) fn set_band(&mut self, i: usize, right: f64, left: f64) {
        self.right[i] = right;
        self.left[i] = left;
    }

    fn interp(&self, values: &[f64], theta: f64) -> (f64, f64) {
        let last = values.len() - 1;
        let max_theta = last as f64 * self.spacing;
        if theta <= 0.0 {
            return (values[0], 0.0);
        }
        if theta >= max_theta {
            return (values[last], 0.0);
        }
        let x = theta / self.spacing;
        let i = (libm::floor(x) as usize).min(last - 1);
        let lambda = x - i as f64;
        let slope = (values[i + 1] - values[i]) / self.spacing;
        (values[i] + (values[i + 1] - values[i]) * lambda, slope)
    }

    /// Left bound and its derivative with respect to progress.
    pub fn left_at(&self, theta: f64) -> (f64, f64) {
        self.interp(&self.left, theta)
    }

    /// Right bound and its derivative with respect to progress.
    pub fn right_at(&self, theta: f64) -> (f64, f64) {
        self.interp(&self.right, theta)
    }

    pub fn width_at(&self, theta: f64) -> f64 {
        self.left_at(theta).0 - self.right_at(theta).0
    }

    /// Smallest sampled width and where it occurs.
    pub fn min_width(&self) -> (f64, f64) {
        self.left
            .iter()
            .zip(&self.right)
            .enumerate()
            .map(|(i, (l, r))| (l - r, self.sample_theta(i)))
            .fold((f64::INFINITY, 0.0), |acc, w| if w.0 < acc.0 { w } else { acc })
    }

    /// Checks that every sample admits a disc of radius `r_c`.
    pub fn check_width(&self, r_c: f64) -> Result<(), ModificationError> {
        let min = 2.0 * r_c + WIDTH_MARGIN;
        let (width, theta) = self.min_width();
        if width + 1e-9 < min {
            return Err(ModificationError::TooNarrow { theta, width, min });
        }
        Ok(())
    }

    /// Replaces the stop limit, leaving the lateral bounds untouched.
    pub fn apply_longitudinal_modification(
        &self,
        stop: StopLimit,
        path_length: f64,
    ) -> Result<Corridor, ModificationError> {
        if let StopLimit::At(v) = stop {
            if !(0.0..=path_length).contains(&v) {
                return Err(ModificationError::StopOutOfDomain(v));
            }
        }
        let mut out = self.clone();
        out.stop = stop;
        Ok(out)
    }

    /// Unions the corridor footprint with a world-frame polygon.
    ///
    /// At every sample the normal line through the path is intersected with
    /// the polygon; the intervals connected to the current band are merged
    /// into it. A polygon interval that does not touch the band makes the
    /// result ambiguous and the edit is rejected.
    pub fn apply_lateral_modification(
        &self,
        path: &ReferencePath,
        polygon: &[Vec2],
        r_c: f64,
    ) -> Result<Corridor, ModificationError> {
        if !geometry::is_simple(polygon) {
            return Err(ModificationError::InvalidPolygon);
        }
        let mut out = self.clone();
        for i in 0..self.len() {
            let theta = self.sample_theta(i);
            let frame = path.frame(theta);
            let intervals = geometry::line_intervals(polygon, frame.point, frame.normal);
            if intervals.is_empty() {
                continue;
            }
            let (mut lo, mut hi) = (self.right[i], self.left[i]);
            let mut merged = alloc::vec![false; intervals.len()];
            // intervals are sorted; sweep until no more growth
            loop {
                let mut grew = false;
                for (k, &(a, b)) in intervals.iter().enumerate() {
                    if merged[k] {
                        continue;
                    }
                    if a <= hi + geometry::GEOM_EPS && b >= lo - geometry::GEOM_EPS {
                        lo = lo.min(a);
                        hi = hi.max(b);
                        merged[k] = true;
                        grew = true;
                    }
                }
                if !grew {
                    break;
                }
            }
            if merged.iter().any(|m| !m) {
                return Err(ModificationError::Disconnected { theta });
            }
            out.set_band(i, lo, hi);
        }
        out.check_width(r_c)?;
        Ok(out)
    }
}

/// Free-function form of [`Corridor::apply_lateral_modification`].
pub fn apply_lateral_modification(
    corridor: &Corridor,
    path: &ReferencePath,
    polygon: &[Vec2],
    r_c: f64,
) -> Result<Corridor, ModificationError> {
    corridor.apply_lateral_modification(path, polygon, r_c)
}

/// Free-function form of [`Corridor::apply_longitudinal_modification`].
pub fn apply_longitudinal_modification(
    corridor: &Corridor,
    stop: StopLimit,
    path_length: f64,
) -> Result<Corridor, ModificationError> {
    corridor.apply_longitudinal_modification(stop, path_length)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn straight() -> (ReferencePath, Corridor) {
        let path = ReferencePath::straight(Vec2::new(0.0, 0.0), 0.0, 40.0).unwrap();
        let c = Corridor::uniform(40.0, DEFAULT_SAMPLE_SPACING, 1.75, -1.75);
        (path, c)
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Vec2> {
        vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ]
    }

    #[test]
    fn interpolation_and_slope() {
        let c = Corridor::from_samples(0.5, vec![2.0, 3.0, 3.0], vec![-2.0, -2.0, -1.0], StopLimit::Unbounded);
        assert_eq!(c.left_at(0.25), (2.5, 2.0));
        assert_eq!(c.right_at(0.75), (-1.5, 2.0));
        assert_eq!(c.left_at(5.0), (3.0, 0.0));
    }

    #[test]
    fn polygon_inside_corridor_is_identity() {
        let (path, c) = straight();
        let out = c
            .apply_lateral_modification(&path, &rect(5.0, -1.0, 9.0, 1.0), 1.0)
            .unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn rectangle_right_lowers_right_bound_on_its_span() {
        let (path, c) = straight();
        let out = c
            .apply_lateral_modification(&path, &rect(10.0, -3.75, 20.0, -1.0), 1.0)
            .unwrap();
        for i in 0..c.len() {
            let theta = c.sample_theta(i);
            let expected = if (10.0..=20.0).contains(&theta) { -3.75 } else { -1.75 };
            assert!((out.right_samples()[i] - expected).abs() < 1e-12, "theta {theta}");
            assert_eq!(out.left_samples()[i], c.left_samples()[i]);
        }
    }

    #[test]
    fn detached_polygon_is_rejected() {
        let (path, c) = straight();
        let err = c
            .apply_lateral_modification(&path, &rect(10.0, -6.0, 20.0, -4.0), 1.0)
            .unwrap_err();
        assert!(matches!(err, ModificationError::Disconnected { .. }));
    }

    #[test]
    fn degenerate_polygon_is_rejected() {
        let (path, c) = straight();
        let err = c
            .apply_lateral_modification(&path, &[Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0)], 1.0)
            .unwrap_err();
        assert_eq!(err, ModificationError::InvalidPolygon);
    }

    #[test]
    fn longitudinal_round_trip_restores_corridor() {
        let (_, mut c) = straight();
        c.stop = StopLimit::At(32.0);
        let lifted = c.apply_longitudinal_modification(StopLimit::Unbounded, 40.0).unwrap();
        assert_eq!(lifted.stop(), StopLimit::Unbounded);
        assert_eq!(lifted.left_samples(), c.left_samples());
        let back = lifted
            .apply_longitudinal_modification(StopLimit::At(32.0), 40.0)
            .unwrap();
        assert_eq!(back, c);
        assert!(c.apply_longitudinal_modification(StopLimit::At(41.0), 40.0).is_err());
    }

    #[test]
    fn too_narrow_corridor_is_reported() {
        let c = Corridor::uniform(10.0, 0.5, 1.0, -1.0);
        assert!(matches!(c.check_width(1.0), Err(ModificationError::TooNarrow { .. })));
        assert!(c.check_width(0.5).is_ok());
    }
}
