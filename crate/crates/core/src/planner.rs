//! Single-step greedy policy over the primitive library.
//!
//! Each iteration observes the pose, predicts the next state under every
//! primitive with the nominal model, executes the primitive whose prediction
//! lands closest to the goal, and repeats until within tolerance.

use std::error::Error as StdError;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{cost, predict_next_state, GoalState, Pose2D};
use crate::primitives::MotionPrimitive;
use crate::scalar::Scalar;

pub const DEFAULT_TOLERANCE_CM: f64 = 12.0;
pub const DEFAULT_MAX_STEPS: usize = 200;

/// Predicted costs closer than this many ulps (relative) count as a tie.
const TIE_ULPS: f64 = 64.0;

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("primitive library is empty")]
    EmptyLibrary,
    #[error("tolerance must be positive and finite")]
    InvalidTolerance,
    #[error("max_steps must be positive")]
    ZeroMaxSteps,
    #[error("pose observation failed at step {step}: {source}")]
    Observation {
        step: usize,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
    #[error("executing primitive {action} failed at step {step}: {source}")]
    Execution {
        step: usize,
        action: usize,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig<T> {
    pub tolerance: T,
    pub max_steps: usize,
    pub library: Vec<MotionPrimitive<T>>,
}

impl<T: Scalar> PlannerConfig<T> {
    pub fn new(
        tolerance: T,
        max_steps: usize,
        library: Vec<MotionPrimitive<T>>,
    ) -> Result<Self, PlannerError> {
        let config = Self {
            tolerance,
            max_steps,
            library,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_library(library: Vec<MotionPrimitive<T>>) -> Result<Self, PlannerError> {
        Self::new(T::lit(DEFAULT_TOLERANCE_CM), DEFAULT_MAX_STEPS, library)
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if !(self.tolerance.is_finite() && self.tolerance > T::zero()) {
            return Err(PlannerError::InvalidTolerance);
        }
        if self.max_steps == 0 {
            return Err(PlannerError::ZeroMaxSteps);
        }
        if self.library.is_empty() {
            return Err(PlannerError::EmptyLibrary);
        }
        Ok(())
    }
}

/// Something the policy can observe and command: the simulator, or the
/// full emulated testbed.
pub trait Plant<T> {
    type Error: StdError + Send + Sync + 'static;

    fn observe(&mut self) -> Result<Pose2D<T>, Self::Error>;

    fn execute(&mut self, primitive: &MotionPrimitive<T>) -> Result<(), Self::Error>;

    /// Simulated seconds since the start of the run.
    fn elapsed(&self) -> T;

    /// Current goal position, for plants that model contact with it.
    fn goal_updated(&mut self, _goal: &GoalState<T>) {}
}

/// Supplies the goal for each iteration.
pub trait GoalProvider<T> {
    fn goal_at(&mut self, step: usize, t: T) -> GoalState<T>;
}

impl<T: Scalar> GoalProvider<T> for GoalState<T> {
    fn goal_at(&mut self, _step: usize, _t: T) -> GoalState<T> {
        *self
    }
}

impl<T, F> GoalProvider<T> for F
where
    F: FnMut(usize, T) -> GoalState<T>,
{
    fn goal_at(&mut self, step: usize, t: T) -> GoalState<T> {
        self(step, t)
    }
}

/// Cost of the nominal next state under each primitive, in library order.
pub fn predicted_costs<T: Scalar>(
    pose: &Pose2D<T>,
    goal: &GoalState<T>,
    library: &[MotionPrimitive<T>],
) -> Vec<T> {
    library
        .iter()
        .map(|p| cost(&predict_next_state(pose, p), goal))
        .collect()
}

fn nearly_equal<T: Scalar>(a: T, b: T) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= T::lit(TIE_ULPS) * T::epsilon() * scale
}

/// Id of the primitive minimizing predicted cost; ties go to the lowest id.
pub fn select_action<T: Scalar>(
    pose: &Pose2D<T>,
    goal: &GoalState<T>,
    library: &[MotionPrimitive<T>],
) -> Result<usize, PlannerError> {
    let mut best: Option<(T, usize)> = None;
    for p in library {
        let c = cost(&predict_next_state(pose, p), goal);
        best = match best {
            None => Some((c, p.id)),
            Some((bc, bid)) if nearly_equal(c, bc) => Some((bc.min(c), bid.min(p.id))),
            Some((bc, _)) if c < bc => Some((c, p.id)),
            keep => keep,
        };
    }
    best.map(|(_, id)| id).ok_or(PlannerError::EmptyLibrary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyStepRecord<T> {
    pub step: usize,
    /// Simulated time when the decision was made.
    pub t_before: T,
    pub pose_before: Pose2D<T>,
    pub goal: GoalState<T>,
    pub action_id: usize,
    pub predicted_next: Pose2D<T>,
    pub observed_next: Pose2D<T>,
    pub cost_before: T,
    pub predicted_cost: T,
    /// Cost of `observed_next` against the same goal.
    pub cost_after: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun<T> {
    pub records: Vec<PolicyStepRecord<T>>,
    pub converged: bool,
    pub final_pose: Pose2D<T>,
    pub final_goal: GoalState<T>,
    pub final_cost: T,
    pub final_time: T,
}

/// Runs the closed loop until the observed cost is within tolerance or the
/// step budget is spent. Running out of steps is not an error; check
/// [`PolicyRun::converged`].
pub fn run_policy<T, P, G>(
    plant: &mut P,
    goals: &mut G,
    config: &PlannerConfig<T>,
) -> Result<PolicyRun<T>, PlannerError>
where
    T: Scalar,
    P: Plant<T>,
    G: GoalProvider<T>,
{
    config.validate()?;
    let observe = |plant: &mut P, step: usize| {
        plant.observe().map_err(|e| PlannerError::Observation {
            step,
            source: Box::new(e),
        })
    };

    let mut records = Vec::new();
    let mut pose = observe(plant, 0)?;
    let mut step = 0;
    loop {
        let t_before = plant.elapsed();
        let goal = goals.goal_at(step, t_before);
        let cost_before = cost(&pose, &goal);
        if cost_before <= config.tolerance || step == config.max_steps {
            return Ok(PolicyRun {
                records,
                converged: cost_before <= config.tolerance,
                final_pose: pose,
                final_goal: goal,
                final_cost: cost_before,
                final_time: t_before,
            });
        }

        let action_id = select_action(&pose, &goal, &config.library)?;
        let primitive = config
            .library
            .iter()
            .find(|p| p.id == action_id)
            .expect("selected id comes from the library");
        let predicted_next = predict_next_state(&pose, primitive);

        plant.goal_updated(&goal);
        plant
            .execute(primitive)
            .map_err(|e| PlannerError::Execution {
                step,
                action: action_id,
                source: Box::new(e),
            })?;
        let observed_next = observe(plant, step + 1)?;

        records.push(PolicyStepRecord {
            step,
            t_before,
            pose_before: pose,
            goal,
            action_id,
            predicted_next,
            observed_next,
            cost_before,
            predicted_cost: cost(&predicted_next, &goal),
            cost_after: cost(&observed_next, &goal),
        });
        pose = observed_next;
        step += 1;
    }
}
