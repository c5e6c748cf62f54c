//! Two-lane road described in the Frenet frame.
//!
//! The centerline curvature is piecewise constant in the path coordinate `s`.
//! Lookups are right-continuous: at a breakpoint the curvature of the segment
//! that starts there is returned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constant-curvature stretch of road, `s_start <= s < s_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSegment {
    pub s_start_m: f64,
    pub s_end_m: f64,
    pub curvature_per_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lane {
    Right,
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    segments: Vec<CurvatureSegment>,
    lane_width: f64,
}

impl RoadProfile {
    pub fn new(segments: Vec<CurvatureSegment>, lane_width: f64) -> Result<Self> {
        if !(lane_width > 0.0) {
            return Err(Error::invalid("road.lane_width_m", "must be positive"));
        }
        if segments.is_empty() {
            return Err(Error::invalid("road.segments", "at least one segment required"));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.s_end_m > seg.s_start_m) || !seg.curvature_per_m.is_finite() {
                return Err(Error::invalid(
                    "road.segments",
                    format!("segment {i} must have s_end_m > s_start_m and finite curvature"),
                ));
            }
            if i > 0 && segments[i - 1].s_end_m != seg.s_start_m {
                return Err(Error::invalid(
                    "road.segments",
                    format!("segment {i} does not start where segment {} ends", i - 1),
                ));
            }
        }
        let profile = Self { segments, lane_width };
        // Lateral offsets up to one lane width from the centerline must stay
        // away from the 1 - dy * kappa = 0 singularity.
        if profile.max_abs_curvature() * lane_width >= 1.0 {
            return Err(Error::invalid(
                "road.segments",
                "curvature too large for the lane width (1 - dy*kappa must stay positive)",
            ));
        }
        Ok(profile)
    }

    /// Straight road over `[s_start, s_end)`.
    pub fn straight(s_start: f64, s_end: f64, lane_width: f64) -> Result<Self> {
        Self::constant(s_start, s_end, 0.0, lane_width)
    }

    pub fn constant(s_start: f64, s_end: f64, curvature: f64, lane_width: f64) -> Result<Self> {
        Self::new(
            vec![CurvatureSegment { s_start_m: s_start, s_end_m: s_end, curvature_per_m: curvature }],
            lane_width,
        )
    }

    pub fn segments(&self) -> &[CurvatureSegment] {
        &self.segments
    }

    pub fn lane_width(&self) -> f64 {
        self.lane_width
    }

    pub fn s_range(&self) -> (f64, f64) {
        (self.segments[0].s_start_m, self.segments[self.segments.len() - 1].s_end_m)
    }

    pub fn curvature_at(&self, s: f64) -> Result<f64> {
        let (lo, hi) = self.s_range();
        if !(s >= lo && s < hi) {
            return Err(Error::OutOfRange { s, lo, hi });
        }
        // First segment whose end lies strictly beyond s.
        let idx = self.segments.partition_point(|seg| seg.s_end_m <= s);
        Ok(self.segments[idx].curvature_per_m)
    }

    pub fn lane_center(&self, lane: Lane) -> f64 {
        match lane {
            Lane::Right => -0.5 * self.lane_width,
            Lane::Left => 0.5 * self.lane_width,
        }
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.segments.iter().map(|seg| seg.curvature_per_m.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_segment() -> RoadProfile {
        RoadProfile::new(
            vec![
                CurvatureSegment { s_start_m: 0.0, s_end_m: 500.0, curvature_per_m: 0.005 },
                CurvatureSegment { s_start_m: 500.0, s_end_m: 1000.0, curvature_per_m: 0.0 },
            ],
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn curvature_lookup() {
        let straight = RoadProfile::straight(0.0, 100.0, 4.0).unwrap();
        assert_eq!(straight.curvature_at(10.0).unwrap(), 0.0);
        let road = two_segment();
        assert_eq!(road.curvature_at(100.0).unwrap(), 0.005);
        assert_eq!(road.curvature_at(0.0).unwrap(), 0.005);
    }

    #[test]
    fn breakpoints_are_right_continuous() {
        let road = two_segment();
        assert_eq!(road.curvature_at(500.0).unwrap(), 0.0);
        assert_eq!(road.curvature_at(499.999_999).unwrap(), 0.005);
    }

    #[test]
    fn out_of_range_is_an_error() {
        let road = two_segment();
        assert!(matches!(road.curvature_at(-0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(road.curvature_at(1000.0), Err(Error::OutOfRange { .. })));
        assert!(road.curvature_at(f64::NAN).is_err());
    }

    #[test]
    fn lane_centers() {
        let road = two_segment();
        assert_eq!(road.lane_center(Lane::Right), -2.0);
        assert_eq!(road.lane_center(Lane::Left), 2.0);
        let narrow = RoadProfile::straight(0.0, 10.0, 3.0).unwrap();
        assert_eq!(narrow.lane_center(Lane::Right), -1.5);
    }

    #[test]
    fn rejects_bad_profiles() {
        assert!(RoadProfile::straight(0.0, 10.0, 0.0).is_err());
        assert!(RoadProfile::straight(10.0, 0.0, 4.0).is_err());
        let gap = RoadProfile::new(
            vec![
                CurvatureSegment { s_start_m: 0.0, s_end_m: 5.0, curvature_per_m: 0.0 },
                CurvatureSegment { s_start_m: 6.0, s_end_m: 9.0, curvature_per_m: 0.0 },
            ],
            4.0,
        );
        assert!(gap.is_err());
        assert!(RoadProfile::constant(0.0, 10.0, 0.3, 4.0).is_err());
    }

    #[test]
    fn no_singularity_within_one_lane_width() {
        let road = two_segment();
        let w = road.lane_width();
        for i in 0..=100 {
            let s = 10.0 * i as f64 - 0.5;
            let Ok(kappa) = road.curvature_at(s) else { continue };
            for dy in [-w, -0.5 * w, 0.0, 0.5 * w, w] {
                assert!(1.0 - dy * kappa > 0.0);
            }
        }
    }
}
