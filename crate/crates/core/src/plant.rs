//! Stochastic stand-in for the physical robot.
//!
//! Executing a primitive moves the true pose along `theta + phi` by a
//! truncated-normal step length, adds a perpendicular lateral slip, then
//! perturbs the heading. Durations are sampled the same way. All randomness
//! comes from one seeded ChaCha stream, drawn in a fixed order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{travel_direction, wrap_angle, GoalState, ModelError, Pose2D};
use crate::planner::Plant;
use crate::primitives::{MotionPrimitive, LIMB_COUNT};
use crate::scalar::{deg_to_rad, Scalar};

pub const DEFAULT_STEP_MEAN_CM: f64 = 2.31;
pub const DEFAULT_STEP_STD_CM: f64 = 0.7;
pub const DEFAULT_LATERAL_STD_CM: f64 = 0.5;
pub const DEFAULT_HEADING_STD_DEG: f64 = 5.0;
pub const DEFAULT_DURATION_MEAN_S: f64 = 2.52;
pub const DEFAULT_DURATION_STD_S: f64 = 0.2;
pub const DEFAULT_DURATION_FLOOR_S: f64 = 0.05;
pub const DEFAULT_BODY_RADIUS_CM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("unknown primitive id {0}")]
    UnknownPrimitive(usize),
    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Normal distribution restricted to `[lower, ∞)` by rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormal<T> {
    pub mean: T,
    pub std: T,
    pub lower: T,
}

impl<T: Scalar> TruncatedNormal<T> {
    const MAX_REJECTIONS: usize = 10_000;

    pub fn new(mean: T, std: T, lower: T) -> Self {
        Self { mean, std, lower }
    }

    /// A zero spread returns `max(mean, lower)` without touching the stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        if self.std == T::zero() {
            return self.mean.max(self.lower);
        }
        for _ in 0..Self::MAX_REJECTIONS {
            let v = self.mean + self.std * T::standard_normal(rng);
            if v >= self.lower {
                return v;
            }
        }
        self.lower
    }
}

/// Zero-mean normal draw that skips the stream when `std == 0`.
fn centered_normal<T: Scalar, R: Rng + ?Sized>(std: T, rng: &mut R) -> T {
    if std == T::zero() {
        T::zero()
    } else {
        std * T::standard_normal(rng)
    }
}

/// Disturbance parameters, indexed by primitive id where per-primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel<T> {
    pub step_mean_cm: Vec<T>,
    pub step_std_cm: Vec<T>,
    pub lateral_std_cm: T,
    pub heading_std_rad: T,
    pub duration_mean_s: T,
    pub duration_std_s: T,
    pub duration_floor_s: T,
}

impl<T: Scalar> Default for NoiseModel<T> {
    fn default() -> Self {
        Self {
            step_mean_cm: vec![T::lit(DEFAULT_STEP_MEAN_CM); LIMB_COUNT],
            step_std_cm: vec![T::lit(DEFAULT_STEP_STD_CM); LIMB_COUNT],
            lateral_std_cm: T::lit(DEFAULT_LATERAL_STD_CM),
            heading_std_rad: deg_to_rad(T::lit(DEFAULT_HEADING_STD_DEG)),
            duration_mean_s: T::lit(DEFAULT_DURATION_MEAN_S),
            duration_std_s: T::lit(DEFAULT_DURATION_STD_S),
            duration_floor_s: T::lit(DEFAULT_DURATION_FLOOR_S),
        }
    }
}

impl<T: Scalar> NoiseModel<T> {
    /// Degenerate model: fixed step length per primitive and fixed duration.
    pub fn noiseless(step_mean_cm: Vec<T>, duration_s: T) -> Self {
        let n = step_mean_cm.len();
        Self {
            step_mean_cm,
            step_std_cm: vec![T::zero(); n],
            lateral_std_cm: T::zero(),
            heading_std_rad: T::zero(),
            duration_mean_s: duration_s,
            duration_std_s: T::zero(),
            duration_floor_s: T::lit(DEFAULT_DURATION_FLOOR_S).min(duration_s),
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let ok = |v: T| v.is_finite() && v >= T::zero();
        if self.step_mean_cm.len() != self.step_std_cm.len() {
            return Err(PlantError::InvalidNoise("step mean/std length mismatch"));
        }
        if !self
            .step_mean_cm
            .iter()
            .chain(&self.step_std_cm)
            .all(|&v| ok(v))
        {
            return Err(PlantError::InvalidNoise(
                "step mean/std must be finite and >= 0",
            ));
        }
        if !ok(self.lateral_std_cm) || !ok(self.heading_std_rad) || !ok(self.duration_std_s) {
            return Err(PlantError::InvalidNoise("spreads must be finite and >= 0"));
        }
        if !(self.duration_floor_s.is_finite() && self.duration_floor_s > T::zero()) {
            return Err(PlantError::InvalidNoise("duration floor must be positive"));
        }
        if !(self.duration_mean_s.is_finite() && self.duration_mean_s >= self.duration_floor_s) {
            return Err(PlantError::InvalidNoise("duration mean must be >= floor"));
        }
        Ok(())
    }
}

/// Realized effect of one primitive execution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome<T> {
    pub dx: T,
    pub dy: T,
    pub dtheta: T,
    pub duration: T,
    /// Sampled step length along the leading limb, before any contact clamp.
    pub magnitude: T,
    pub lateral: T,
    pub clamped: bool,
}

/// Clamps a motion from `start` to `end` so the body center never enters the
/// disc of `body_radius` around the goal. The result stops at the first point
/// where the segment meets the contact circle. A start already inside the
/// disc is pushed radially out to the circle if the end is still inside.
pub fn goal_contact_clamp<T: Scalar>(
    start: &Pose2D<T>,
    end: &Pose2D<T>,
    goal: &GoalState<T>,
    body_radius: T,
) -> Pose2D<T> {
    let r = body_radius;
    let on_circle = |px: T, py: T, fallback: (T, T)| {
        let (ox, oy) = (px - goal.x, py - goal.y);
        let d = ox.hypot(oy);
        let (ux, uy) = if d > T::zero() {
            (ox / d, oy / d)
        } else {
            fallback
        };
        Pose2D {
            x: goal.x + r * ux,
            y: goal.y + r * uy,
            theta: end.theta,
        }
    };

    let (fx, fy) = (start.x - goal.x, start.y - goal.y);
    let (vx, vy) = (end.x - start.x, end.y - start.y);
    let end_dist = (end.x - goal.x).hypot(end.y - goal.y);

    if fx.hypot(fy) < r {
        if end_dist >= r {
            return *end;
        }
        let back = {
            let n = fx.hypot(fy);
            if n > T::zero() {
                (fx / n, fy / n)
            } else {
                (T::one(), T::zero())
            }
        };
        return on_circle(end.x, end.y, back);
    }

    let a = vx * vx + vy * vy;
    if a == T::zero() {
        return *end;
    }
    let two = T::lit(2.0);
    let b = two * (fx * vx + fy * vy);
    let c = fx * fx + fy * fy - r * r;
    let disc = b * b - T::lit(4.0) * a * c;
    if disc <= T::zero() {
        // Misses or only grazes the circle.
        return *end;
    }
    let t_entry = (-b - disc.sqrt()) / (two * a);
    if t_entry > T::one() || (t_entry < T::zero() && b >= T::zero()) {
        return *end;
    }
    let t = t_entry.max(T::zero());
    let n = a.sqrt();
    on_circle(start.x + t * vx, start.y + t * vy, (-vx / n, -vy / n))
}

/// Contact obstacle at the goal, modeled as the robot's arm radius.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Contact<T> {
    goal: Option<GoalState<T>>,
    body_radius: T,
}

/// Simulated robot: true pose, clock, and random stream.
#[derive(Debug, Clone)]
pub struct PlantSimulator<T> {
    pose: Pose2D<T>,
    time: T,
    noise: NoiseModel<T>,
    rng: ChaCha8Rng,
    contact: Option<Contact<T>>,
}

impl<T: Scalar> PlantSimulator<T> {
    pub fn new(initial: Pose2D<T>, noise: NoiseModel<T>, seed: u64) -> Result<Self, PlantError> {
        noise.validate()?;
        Ok(Self {
            pose: initial,
            time: T::zero(),
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            contact: None,
        })
    }

    /// Enables the goal contact clamp with the given arm radius.
    pub fn with_contact(mut self, body_radius: T) -> Self {
        self.contact = Some(Contact {
            goal: None,
            body_radius,
        });
        self
    }

    pub fn set_goal(&mut self, goal: GoalState<T>) {
        if let Some(c) = self.contact.as_mut() {
            c.goal = Some(goal);
        }
    }

    pub fn noise(&self) -> &NoiseModel<T> {
        &self.noise
    }

    /// Ground-truth pose.
    pub fn observe_pose(&self) -> Pose2D<T> {
        self.pose
    }

    pub fn elapsed(&self) -> T {
        self.time
    }

    pub fn execute(
        &mut self,
        primitive: &MotionPrimitive<T>,
    ) -> Result<ExecutionOutcome<T>, PlantError> {
        let id = primitive.id;
        let (&mean, &std) = self
            .noise
            .step_mean_cm
            .get(id)
            .zip(self.noise.step_std_cm.get(id))
            .ok_or(PlantError::UnknownPrimitive(id))?;

        let magnitude = TruncatedNormal::new(mean, std, T::zero()).sample(&mut self.rng);
        let lateral = centered_normal(self.noise.lateral_std_cm, &mut self.rng);
        let dtheta = centered_normal(self.noise.heading_std_rad, &mut self.rng);
        let duration = TruncatedNormal::new(
            self.noise.duration_mean_s,
            self.noise.duration_std_s,
            self.noise.duration_floor_s,
        )
        .sample(&mut self.rng);

        let (c, s) = travel_direction(self.pose.theta, primitive.phi);
        let mut dx = magnitude * c - lateral * s;
        let mut dy = magnitude * s + lateral * c;
        let start = self.pose;
        let mut end = Pose2D {
            x: start.x + dx,
            y: start.y + dy,
            theta: start.theta,
        };

        let mut clamped = false;
        if let Some(Contact {
            goal: Some(goal),
            body_radius,
        }) = self.contact
        {
            let limited = goal_contact_clamp(&start, &end, &goal, body_radius);
            if limited != end {
                clamped = true;
                end = limited;
                dx = end.x - start.x;
                dy = end.y - start.y;
            }
        }

        end.theta = wrap_angle(start.theta + dtheta)?;
        self.pose = end;
        self.time += duration;
        Ok(ExecutionOutcome {
            dx,
            dy,
            dtheta,
            duration,
            magnitude,
            lateral,
            clamped,
        })
    }
}

impl<T: Scalar> Plant<T> for PlantSimulator<T> {
    type Error = PlantError;

    fn observe(&mut self) -> Result<Pose2D<T>, PlantError> {
        Ok(self.observe_pose())
    }

    fn execute(&mut self, primitive: &MotionPrimitive<T>) -> Result<(), PlantError> {
        PlantSimulator::execute(self, primitive).map(|_| ())
    }

    fn elapsed(&self) -> T {
        self.time
    }

    fn goal_updated(&mut self, goal: &GoalState<T>) {
        self.set_goal(*goal);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{predict_displacement, predict_next_state};
    use crate::planner::{run_policy, PlannerConfig};
    use crate::primitives::build_default_library;
    use proptest::prelude::*;
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};

    /// Mean of N(mu, sigma) truncated to [0, ∞).
    fn truncated_mean_oracle(mu: f64, sigma: f64) -> f64 {
        let alpha = -mu / sigma;
        let n = Normal::new(0.0, 1.0).unwrap();
        mu + sigma * n.pdf(alpha) / (1.0 - n.cdf(alpha))
    }

    #[test]
    fn noiseless_matches_nominal_prediction_exactly() {
        let lib = build_default_library::<f64>();
        let start = Pose2D::new(3.0, -2.0, 0.4).unwrap();
        let mut plant =
            PlantSimulator::new(start, NoiseModel::noiseless(vec![5.0; 5], 2.52), 1).unwrap();
        let mut expected = start;
        for k in 0..25 {
            let p = &lib[(k * 3) % 5];
            let pred = predict_displacement(&expected, p);
            let out = plant.execute(p).unwrap();
            assert_eq!((out.dx, out.dy, out.dtheta), (pred.dx, pred.dy, 0.0));
            assert_eq!(out.duration, 2.52);
            expected = predict_next_state(&expected, p);
            assert_eq!(plant.observe_pose(), expected);
        }
    }

    #[test]
    fn observe_before_and_after_execution() {
        let lib = build_default_library::<f64>();
        let mut plant = PlantSimulator::new(
            Pose2D::origin(),
            NoiseModel::noiseless(vec![5.0; 5], 2.52),
            9,
        )
        .unwrap();
        assert_eq!(plant.observe_pose(), Pose2D::origin());
        assert_eq!(plant.observe_pose(), plant.observe_pose());
        plant.execute(&lib[0]).unwrap();
        let p = plant.observe_pose();
        assert!(p.x.abs() < 1e-12 && (p.y - 5.0).abs() < 1e-12 && p.theta == 0.0);
    }

    #[test]
    fn step_magnitude_mean_matches_truncation_oracle() {
        let oracle = truncated_mean_oracle(2.31, 0.7);
        assert!((oracle - 2.31).abs() < 0.002);
        let lib = build_default_library::<f64>();
        let mut plant = PlantSimulator::new(Pose2D::origin(), NoiseModel::default(), 2024).unwrap();
        let n = 10_000;
        let mean = (0..n)
            .map(|_| plant.execute(&lib[0]).unwrap().magnitude)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.31).abs() < 0.02, "mean {mean}");
        // 3 standard errors around the truncated mean.
        assert!((mean - oracle).abs() < 3.0 * 0.7 / (n as f64).sqrt());
    }

    #[test]
    fn truncation_keeps_samples_non_negative() {
        let d = TruncatedNormal::new(0.1f64, 2.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..20_000).map(|_| d.sample(&mut rng)).collect();
        assert!(samples.iter().all(|&s| s >= 0.0));
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let oracle = truncated_mean_oracle(0.1, 2.0);
        assert!(
            (mean - oracle).abs() < 4.0 * 1.3 / (samples.len() as f64).sqrt(),
            "{mean} vs {oracle}"
        );
    }

    #[test]
    fn same_seed_same_outcomes() {
        let lib = build_default_library::<f64>();
        let run = |seed| {
            let mut plant =
                PlantSimulator::new(Pose2D::origin(), NoiseModel::default(), seed).unwrap();
            (0..50)
                .map(|k| plant.execute(&lib[k % 5]).unwrap())
                .collect::<Vec<_>>()
        };
        let a = run(7);
        let b = run(7);
        assert!(a
            .iter()
            .zip(&b)
            .all(|(x, y)| x.dx.to_bits() == y.dx.to_bits()
                && x.dy.to_bits() == y.dy.to_bits()
                && x.duration.to_bits() == y.duration.to_bits()));
        assert_ne!(a, run(8));
    }

    #[test]
    fn unknown_primitive_rejected() {
        let mut p = build_default_library::<f64>()[0].clone();
        p.id = 9;
        let mut plant = PlantSimulator::new(Pose2D::origin(), NoiseModel::default(), 0).unwrap();
        assert_eq!(plant.execute(&p), Err(PlantError::UnknownPrimitive(9)));
    }

    #[test]
    fn invalid_noise_rejected() {
        let mut n = NoiseModel::<f64>::default();
        n.step_std_cm[2] = -1.0;
        assert!(PlantSimulator::new(Pose2D::origin(), n, 0).is_err());
        let mut n = NoiseModel::<f64>::default();
        n.step_mean_cm.pop();
        assert!(n.validate().is_err());
    }

    #[test]
    fn durations_respect_floor() {
        let noise = NoiseModel::<f64> {
            duration_mean_s: 0.1,
            duration_std_s: 1.0,
            ..Default::default()
        };
        let lib = build_default_library::<f64>();
        let mut plant = PlantSimulator::new(Pose2D::origin(), noise, 5).unwrap();
        let mut last = 0.0;
        for _ in 0..1000 {
            assert!(plant.execute(&lib[1]).unwrap().duration >= 0.05);
            assert!(plant.elapsed() >= last);
            last = plant.elapsed();
        }
    }

    fn pose(x: f64, y: f64) -> Pose2D<f64> {
        Pose2D { x, y, theta: 0.0 }
    }

    #[test]
    fn clamp_leaves_distant_motion_alone() {
        let goal = GoalState { x: 0.0, y: 0.0 };
        let end = pose(15.0, 0.0);
        assert_eq!(goal_contact_clamp(&pose(20.0, 0.0), &end, &goal, 10.0), end);
    }

    #[test]
    fn clamp_stops_straight_approach_at_contact() {
        let goal = GoalState { x: 0.0, y: 0.0 };
        let out = goal_contact_clamp(&pose(20.0, 0.0), &pose(4.0, 0.0), &goal, 10.0);
        assert!((out.x - 10.0).abs() < 1e-12 && out.y.abs() < 1e-12);
    }

    #[test]
    fn clamp_exact_tangent_is_not_penetration() {
        let goal = GoalState { x: 0.0, y: 0.0 };
        let end = pose(5.0, 10.0);
        assert_eq!(
            goal_contact_clamp(&pose(-5.0, 10.0), &end, &goal, 10.0),
            end
        );
    }

    #[test]
    fn clamp_inside_start_is_pushed_out() {
        let goal = GoalState { x: 0.0, y: 0.0 };
        let out = goal_contact_clamp(&pose(5.0, 0.0), &pose(3.0, 0.0), &goal, 10.0);
        assert!((out.x - 10.0).abs() < 1e-12);
    }

    /// First parameter where the sampled segment enters the open disc, found by
    /// dense scan plus bisection.
    fn entry_oracle(s: (f64, f64), e: (f64, f64), r: f64) -> Option<(f64, f64)> {
        let at = |t: f64| (s.0 + t * (e.0 - s.0), s.1 + t * (e.1 - s.1));
        let inside = |t: f64| {
            let p = at(t);
            p.0.hypot(p.1) < r - 1e-9
        };
        let n = 20_000;
        let k = (0..=n).find(|&k| inside(k as f64 / n as f64))?;
        let (mut lo, mut hi) = (((k as f64) - 1.0).max(0.0) / n as f64, k as f64 / n as f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            let p = at(mid);
            if p.0.hypot(p.1) < r {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(at(hi))
    }

    proptest! {
        #[test]
        fn clamp_agrees_with_segment_oracle(
            sx in -40.0f64..40.0, sy in -40.0f64..40.0,
            ex in -40.0f64..40.0, ey in -40.0f64..40.0,
        ) {
            prop_assume!(sx.hypot(sy) > 10.0);
            let goal = GoalState { x: 0.0, y: 0.0 };
            let out = goal_contact_clamp(&pose(sx, sy), &pose(ex, ey), &goal, 10.0);
            prop_assert!(out.x.hypot(out.y) >= 10.0 - 1e-9);
            match entry_oracle((sx, sy), (ex, ey), 10.0) {
                Some((ox, oy)) => prop_assert!((out.x - ox).hypot(out.y - oy) < 1e-3),
                None => prop_assert!((out.x - ex).hypot(out.y - ey) < 1e-3),
            }
        }

        #[test]
        fn clamped_runs_never_penetrate(seed in 0u64..500) {
            let lib = build_default_library::<f64>();
            let noise = NoiseModel {
                step_mean_cm: vec![4.0; 5],
                step_std_cm: vec![2.0; 5],
                ..Default::default()
            };
            let mut plant = PlantSimulator::new(Pose2D::origin(), noise, seed).unwrap().with_contact(10.0);
            let goal = GoalState { x: 25.0, y: 5.0 };
            let config = PlannerConfig::new(0.5, 40, lib).unwrap();
            let mut g = goal;
            let run = run_policy(&mut plant, &mut g, &config).unwrap();
            for r in &run.records {
                prop_assert!(r.observed_next.distance_to(&goal) >= 10.0 - 1e-9);
            }
        }
    }
}
