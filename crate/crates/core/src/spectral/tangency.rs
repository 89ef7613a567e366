//! Tangency of an approach to the saddle with the `(x, y)` eigenplane.

use serde::{Deserialize, Serialize};

use super::{FieldState, ModalFrame};
use crate::normal_form::NormalFormPoint;

/// Deviations smaller than this have no meaningful direction.
pub const ANGLE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangencySample {
    pub t: f64,
    /// `None` when the deviation norm is below [`ANGLE_FLOOR`].
    pub angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangencyReport {
    pub samples: Vec<TangencySample>,
}

/// Angle in `[0, π/2]` between a normal-form deviation and the `(x, y)` plane.
pub fn tangency_angle(p: &NormalFormPoint) -> Option<f64> {
    let planar = p.x.hypot(p.y);
    let normal = p.tail.iter().fold(p.z1.hypot(p.z2), |acc, v| acc.hypot(*v));
    if planar.hypot(normal) < ANGLE_FLOOR {
        None
    } else {
        Some(normal.atan2(planar))
    }
}

pub fn tangency_diagnostic(trajectory: &[FieldState], frame: &ModalFrame) -> TangencyReport {
    TangencyReport {
        samples: trajectory
            .iter()
            .map(|s| TangencySample {
                t: s.time,
                angle: tangency_angle(&frame.project(s)),
            })
            .collect(),
    }
}

impl TangencyReport {
    pub fn from_points<'a, I>(points: I) -> Self
    where
        I: IntoIterator<Item = (f64, &'a NormalFormPoint)>,
    {
        Self {
            samples: points
                .into_iter()
                .map(|(t, p)| TangencySample {
                    t,
                    angle: tangency_angle(p),
                })
                .collect(),
        }
    }

    /// Least-squares slope of `−ln tan(angle)` against `t`.
    ///
    /// A positive value is the rate at which the approach flattens onto the
    /// `(x, y)` plane. Samples with undefined or zero angle are skipped.
    pub fn decay_exponent(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter_map(|s| {
                s.angle
                    .filter(|a| *a > 0.0 && *a < std::f64::consts::FRAC_PI_2)
                    .map(|a| (s.t, -a.tan().ln()))
            })
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn point(x: f64, y: f64, z1: f64) -> NormalFormPoint {
        NormalFormPoint {
            x,
            y,
            z1,
            z2: 0.0,
            tail: vec![0.0; 4],
        }
    }

    #[test]
    fn planar_deviation_has_zero_angle() {
        assert_eq!(tangency_angle(&point(0.3, -0.4, 0.0)), Some(0.0));
    }

    #[test]
    fn z1_deviation_is_perpendicular() {
        let a = tangency_angle(&point(0.0, 0.0, 0.2)).unwrap();
        assert!((a - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn tiny_deviation_is_undefined() {
        assert_eq!(tangency_angle(&point(1e-14, 0.0, 0.0)), None);
    }
}
