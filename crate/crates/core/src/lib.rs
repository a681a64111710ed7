//! Simulation testbed for a five-limb soft robot driven by shape-memory
//! alloy actuators.
//!
//! The robot moves by playing one of five gait primitives, each led by a
//! different limb. A greedy planner picks the primitive whose nominal step
//! lands closest to the goal; the plant model adds step-length, lateral,
//! heading and timing noise; an emulated overhead camera supplies the
//! observed pose; and every step is actuated through a line-based serial
//! protocol with onboard watchdog timers.
//!
//! Geometry is generic over [`scalar::Scalar`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64` unless suffixed with `32`.

pub mod harness;
pub mod model;
pub mod planner;
pub mod plant;
pub mod primitives;
pub mod protocol;
pub mod scalar;
pub mod vision;

pub use harness::{run_experiment, ExperimentConfig, ExperimentReport, HarnessError, Scenario};
pub use model::{cost, predict_displacement, predict_next_state, wrap_angle, ModelError};
pub use planner::{run_policy, select_action, PlannerError, Plant};
pub use plant::PlantError;
pub use primitives::{build_default_library, build_library, LibraryError, LimbMap};
pub use scalar::Scalar;
pub use vision::{calibrate, estimate_pose, VisionError};

pub type Pose = model::Pose2D<f64>;
pub type Goal = model::GoalState<f64>;
pub type Displacement = model::DisplacementPrediction<f64>;
pub type Primitive = primitives::MotionPrimitive<f64>;
pub type Schedule = primitives::GaitSchedule<f64>;
pub type Timing = primitives::GaitTiming<f64>;
pub type Planner = planner::PlannerConfig<f64>;
pub type Noise = plant::NoiseModel<f64>;
pub type Simulator = plant::PlantSimulator<f64>;
pub type Similarity = vision::SimilarityTransform<f64>;
pub type Camera = vision::CameraModel<f64>;

pub type Pose32 = model::Pose2D<f32>;
pub type Goal32 = model::GoalState<f32>;
pub type Primitive32 = primitives::MotionPrimitive<f32>;
pub type Planner32 = planner::PlannerConfig<f32>;
pub type Noise32 = plant::NoiseModel<f32>;
pub type Simulator32 = plant::PlantSimulator<f32>;
pub type Similarity32 = vision::SimilarityTransform<f32>;
pub type Camera32 = vision::CameraModel<f32>;
