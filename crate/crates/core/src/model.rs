//! Planar state, nominal transition model and the distance-to-goal cost.
//!
//! Units are centimeters and radians. Heading `theta = 0` points along world
//! +X and increases counterclockwise; a primitive with heading offset `phi`
//! moves the body along `theta + phi`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primitives::MotionPrimitive;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("non-finite angle")]
    NonFiniteAngle,
    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
}

/// Wraps an angle into `(-π, π]`.
///
/// Values already inside the interval are returned unchanged, bit for bit.
pub fn wrap_angle<T: Scalar>(theta: T) -> Result<T, ModelError> {
    if !theta.is_finite() {
        return Err(ModelError::NonFiniteAngle);
    }
    let pi = T::PI();
    if theta > -pi && theta <= pi {
        return Ok(theta);
    }
    let tau = T::two_pi();
    let mut wrapped = theta - tau * ((theta + pi) / tau).floor();
    // floor() lands on [-π, π); the open end moves across.
    if wrapped <= -pi {
        wrapped += tau;
    }
    if wrapped > pi {
        wrapped -= tau;
    }
    Ok(wrapped)
}

/// Planar robot state in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    /// Heading, always in `(-π, π]`.
    pub theta: T,
}

impl<T: Scalar> Pose2D<T> {
    pub fn new(x: T, y: T, theta: T) -> Result<Self, ModelError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(ModelError::NonFiniteCoordinate);
        }
        Ok(Self {
            x,
            y,
            theta: wrap_angle(theta)?,
        })
    }

    pub fn origin() -> Self {
        Self {
            x: T::zero(),
            y: T::zero(),
            theta: T::zero(),
        }
    }

    pub fn position(&self) -> (T, T) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, goal: &GoalState<T>) -> T {
        (self.x - goal.x).hypot(self.y - goal.y)
    }
}

/// In-plane goal position. Orientation is not part of the goal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalState<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> GoalState<T> {
    pub fn new(x: T, y: T) -> Result<Self, ModelError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(ModelError::NonFiniteCoordinate);
        }
        Ok(Self { x, y })
    }
}

/// Output of the nominal transition model. `dtheta` is always zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementPrediction<T> {
    pub dx: T,
    pub dy: T,
    pub dtheta: T,
}

impl<T: Scalar> DisplacementPrediction<T> {
    pub fn norm(&self) -> T {
        self.dx.hypot(self.dy)
    }
}

/// Unit vector `(cos, sin)` of the travel direction `theta + phi`.
///
/// Shared by the planner's model and the simulator so a noise-free plant
/// reproduces predictions exactly.
#[inline]
pub fn travel_direction<T: Scalar>(theta: T, phi: T) -> (T, T) {
    let (s, c) = (theta + phi).sin_cos();
    (c, s)
}

/// `F(x, a) = [r cos(θ + φ), r sin(θ + φ), 0]`.
pub fn predict_displacement<T: Scalar>(
    pose: &Pose2D<T>,
    primitive: &MotionPrimitive<T>,
) -> DisplacementPrediction<T> {
    let (c, s) = travel_direction(pose.theta, primitive.phi);
    DisplacementPrediction {
        dx: primitive.r_nominal * c,
        dy: primitive.r_nominal * s,
        dtheta: T::zero(),
    }
}

/// Advances the position by [`predict_displacement`]; heading is copied unchanged.
pub fn predict_next_state<T: Scalar>(
    pose: &Pose2D<T>,
    primitive: &MotionPrimitive<T>,
) -> Pose2D<T> {
    let d = predict_displacement(pose, primitive);
    Pose2D {
        x: pose.x + d.dx,
        y: pose.y + d.dy,
        theta: pose.theta,
    }
}

/// Euclidean distance from the pose position to the goal. Heading is ignored.
pub fn cost<T: Scalar>(pose: &Pose2D<T>, goal: &GoalState<T>) -> T {
    pose.distance_to(goal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::build_default_library;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Taylor-series sin/cos with exact argument reduction against a
    /// high-precision π split; independent of libm.
    fn oracle_sin_cos(x: f64) -> (f64, f64) {
        #[allow(clippy::approx_constant)]
        const PI_HI: f64 = 3.141_592_653_589_793;
        const PI_LO: f64 = 1.224_646_799_147_353_2e-16;
        let k = (x / (2.0 * PI_HI)).round();
        let r = (x - k * 2.0 * PI_HI) - k * 2.0 * PI_LO;
        let (mut s, mut c) = (0.0f64, 0.0f64);
        let mut term = r;
        for n in 0..40 {
            s += term;
            let a = (2 * n + 2) as f64;
            term *= -r * r / (a * (a + 1.0));
        }
        let mut term = 1.0;
        for n in 0..40 {
            c += term;
            let a = (2 * n + 1) as f64;
            term *= -r * r / (a * (a + 1.0));
        }
        (s, c)
    }

    fn lib() -> Vec<MotionPrimitive<f64>> {
        build_default_library()
    }

    #[test]
    fn oracle_matches_known_values() {
        let (s, c) = oracle_sin_cos(18.0 * PI / 180.0);
        // 40-digit reference values.
        assert!((5.0 * c - 4.755_282_581_475_768).abs() < 1e-14);
        assert!((5.0 * s - 1.545_084_971_874_737).abs() < 1e-14);
    }

    #[test]
    fn primitive_zero_from_heading_zero_moves_plus_y() {
        let d = predict_displacement(&Pose2D::origin(), &lib()[0]);
        assert!(d.dx.abs() < 1e-12);
        assert!((d.dy - 5.0).abs() < 1e-12);
        assert_eq!(d.dtheta, 0.0);
    }

    #[test]
    fn quarter_turn_rotates_primitive_zero() {
        let pose = Pose2D::new(0.0, 0.0, PI / 2.0).unwrap();
        let d = predict_displacement(&pose, &lib()[0]);
        assert!((d.dx + 5.0).abs() < 1e-12);
        assert!(d.dy.abs() < 1e-12);
    }

    #[test]
    fn primitive_one_matches_trig_oracle() {
        let d = predict_displacement(&Pose2D::origin(), &lib()[1]);
        assert!((d.dx - 4.7553).abs() < 5e-5);
        assert!((d.dy - 1.5451).abs() < 5e-5);
        let (s, c) = oracle_sin_cos(18.0 * PI / 180.0);
        assert!((d.dx - 5.0 * c).abs() < 1e-13);
        assert!((d.dy - 5.0 * s).abs() < 1e-13);
    }

    #[test]
    fn next_state_examples() {
        let next = predict_next_state(&Pose2D::origin(), &lib()[0]);
        assert!(next.x.abs() < 1e-12 && (next.y - 5.0).abs() < 1e-12 && next.theta == 0.0);

        let mut still = lib()[0].clone();
        still.r_nominal = 0.0;
        let pose = Pose2D::new(3.0, 4.0, 1.0).unwrap();
        assert_eq!(predict_next_state(&pose, &still), pose);

        // 40-digit reference: (14.93844170297568863, -10.78217232520115435)
        let pose = Pose2D::new(10.0, -10.0, PI / 4.0).unwrap();
        let next = predict_next_state(&pose, &lib()[2]);
        let (s, c) = oracle_sin_cos(PI / 4.0 + 306.0 * PI / 180.0);
        assert!((next.x - (10.0 + 5.0 * c)).abs() < 1e-12);
        assert!((next.y - (-10.0 + 5.0 * s)).abs() < 1e-12);
        assert!((next.x - 14.938_441_702_975_69).abs() < 1e-12);
        assert!((next.y + 10.782_172_325_201_154).abs() < 1e-12);
        assert_eq!(next.theta.to_bits(), pose.theta.to_bits());
    }

    #[test]
    fn cost_examples() {
        let goal = GoalState::new(0.0, 0.0).unwrap();
        assert_eq!(cost(&Pose2D::new(3.0, 4.0, 2.2).unwrap(), &goal), 5.0);
        assert_eq!(cost(&Pose2D::new(0.0, 0.0, 0.0).unwrap(), &goal), 0.0);
        let goal = GoalState::new(4.0, 5.0).unwrap();
        assert_eq!(cost(&Pose2D::new(1.0, 1.0, 0.0).unwrap(), &goal), 5.0);
    }

    #[test]
    fn wrap_angle_examples() {
        assert_eq!(wrap_angle(0.0f64).unwrap(), 0.0);
        assert!((wrap_angle(3.0 * PI).unwrap() - PI).abs() < 1e-12);
        assert!(wrap_angle(3.0 * PI).unwrap() > 0.0);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(f64::NAN), Err(ModelError::NonFiniteAngle));
        assert_eq!(wrap_angle(f64::INFINITY), Err(ModelError::NonFiniteAngle));
        assert!(
            (wrap_angle(-3.0f32 * std::f32::consts::PI).unwrap().abs() - std::f32::consts::PI)
                .abs()
                < 1e-5
        );
    }

    #[test]
    fn pose_rejects_non_finite() {
        assert!(Pose2D::new(f64::NAN, 0.0, 0.0).is_err());
        assert!(GoalState::new(0.0, f64::INFINITY).is_err());
    }

    proptest! {
        #[test]
        fn wrap_angle_range_and_congruence(theta in -1e4f64..1e4) {
            let w = wrap_angle(theta).unwrap();
            prop_assert!(w > -PI && w <= PI);
            let k = ((theta - w) / (2.0 * PI)).round();
            prop_assert!((theta - w - k * 2.0 * PI).abs() < 1e-9);
        }

        #[test]
        fn displacement_norm_equals_radius(
            x in -100.0f64..100.0, y in -100.0f64..100.0, theta in -PI..PI,
            id in 0usize..5, r in 0.01f64..50.0,
        ) {
            let mut p = lib()[id].clone();
            p.r_nominal = r;
            let d = predict_displacement(&Pose2D::new(x, y, theta).unwrap(), &p);
            prop_assert!((d.norm() - r).abs() <= 1e-12 * r.max(1.0));
        }

        #[test]
        fn heading_never_changes(x in -100.0f64..100.0, theta in -10.0f64..10.0, id in 0usize..5) {
            let pose = Pose2D::new(x, -x, theta).unwrap();
            prop_assert_eq!(predict_next_state(&pose, &lib()[id]).theta.to_bits(), pose.theta.to_bits());
        }

        #[test]
        fn rotation_equivariance(theta in -PI..PI, alpha in -PI..PI, id in 0usize..5) {
            let p = &lib()[id];
            let d0 = predict_displacement(&Pose2D::new(0.0, 0.0, theta).unwrap(), p);
            let d1 = predict_displacement(&Pose2D::new(0.0, 0.0, theta + alpha).unwrap(), p);
            let (s, c) = alpha.sin_cos();
            prop_assert!((d1.dx - (c * d0.dx - s * d0.dy)).abs() < 1e-12);
            prop_assert!((d1.dy - (s * d0.dx + c * d0.dy)).abs() < 1e-12);
        }

        #[test]
        fn cost_translation_invariant(
            x in -100.0f64..100.0, y in -100.0f64..100.0,
            gx in -100.0f64..100.0, gy in -100.0f64..100.0,
            tx in -100.0f64..100.0, ty in -100.0f64..100.0,
        ) {
            let a = cost(&Pose2D::new(x, y, 0.0).unwrap(), &GoalState::new(gx, gy).unwrap());
            let b = cost(&Pose2D::new(x + tx, y + ty, 0.0).unwrap(), &GoalState::new(gx + tx, gy + ty).unwrap());
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
