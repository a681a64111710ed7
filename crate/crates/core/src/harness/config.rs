//! Experiment configuration file (JSON).
//!
//! Every field has a default, so `{}` is a valid stationary-goal config.
//! Angles are given in degrees here and converted to radians on load.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::model::{GoalState, Pose2D};
use crate::plant::{self, NoiseModel};
use crate::primitives::{
    GaitTiming, LimbMap, ValidationRules, DEFAULT_MAX_SIMULTANEOUS_ON, LIMB_COUNT,
};
use crate::protocol::LinkConfig;
use crate::scalar::deg_to_rad;
use crate::vision::CameraModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Stationary,
    Floating,
    Characterize,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Stationary => "stationary",
            Scenario::Floating => "floating",
            Scenario::Characterize => "characterize",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stationary" => Ok(Scenario::Stationary),
            "floating" => Ok(Scenario::Floating),
            "characterize" => Ok(Scenario::Characterize),
            other => Err(format!("unknown scenario `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseConfig {
    pub x_cm: f64,
    pub y_cm: f64,
    pub theta_deg: f64,
}

impl Default for PoseConfig {
    fn default() -> Self {
        Self {
            x_cm: 0.0,
            y_cm: 0.0,
            theta_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t_s: f64,
    pub x_cm: f64,
    pub y_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalConfig {
    Fixed {
        x_cm: f64,
        y_cm: f64,
    },
    /// Piecewise-linear in time; holds the end points outside the range.
    Path {
        waypoints: Vec<Waypoint>,
    },
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig::Fixed {
            x_cm: 40.0,
            y_cm: 0.0,
        }
    }
}

impl GoalConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        match self {
            GoalConfig::Fixed { x_cm, y_cm } => {
                GoalState::new(*x_cm, *y_cm)
                    .map_err(|e| HarnessError::config(format!("goal: {e}")))?;
            }
            GoalConfig::Path { waypoints } => {
                if waypoints.is_empty() {
                    return Err(HarnessError::config(
                        "goal path needs at least one waypoint",
                    ));
                }
                if !waypoints
                    .iter()
                    .all(|w| w.t_s.is_finite() && w.x_cm.is_finite() && w.y_cm.is_finite())
                {
                    return Err(HarnessError::config("goal waypoints must be finite"));
                }
                if waypoints.windows(2).any(|w| w[1].t_s <= w[0].t_s) {
                    return Err(HarnessError::config(
                        "goal waypoint times must strictly increase",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn goal_at(&self, t: f64) -> GoalState<f64> {
        match self {
            GoalConfig::Fixed { x_cm, y_cm } => GoalState { x: *x_cm, y: *y_cm },
            GoalConfig::Path { waypoints } => {
                let first = waypoints.first().expect("validated non-empty");
                let last = waypoints.last().expect("validated non-empty");
                if t <= first.t_s {
                    return GoalState {
                        x: first.x_cm,
                        y: first.y_cm,
                    };
                }
                if t >= last.t_s {
                    return GoalState {
                        x: last.x_cm,
                        y: last.y_cm,
                    };
                }
                let seg = waypoints
                    .windows(2)
                    .find(|w| t <= w[1].t_s)
                    .expect("t inside waypoint range");
                let (a, b) = (seg[0], seg[1]);
                let u = (t - a.t_s) / (b.t_s - a.t_s);
                GoalState {
                    x: a.x_cm + u * (b.x_cm - a.x_cm),
                    y: a.y_cm + u * (b.y_cm - a.y_cm),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSection {
    pub tolerance_cm: f64,
    pub max_steps: usize,
    /// Nominal step length the planner assumes for every primitive.
    pub r_nominal_cm: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            tolerance_cm: crate::planner::DEFAULT_TOLERANCE_CM,
            max_steps: crate::planner::DEFAULT_MAX_STEPS,
            r_nominal_cm: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSection {
    pub step_mean_cm: Vec<f64>,
    pub step_std_cm: Vec<f64>,
    pub lateral_std_cm: f64,
    pub heading_std_deg: f64,
    pub duration_mean_s: f64,
    pub duration_std_s: f64,
    pub duration_floor_s: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            step_mean_cm: vec![plant::DEFAULT_STEP_MEAN_CM; LIMB_COUNT],
            step_std_cm: vec![plant::DEFAULT_STEP_STD_CM; LIMB_COUNT],
            lateral_std_cm: plant::DEFAULT_LATERAL_STD_CM,
            heading_std_deg: plant::DEFAULT_HEADING_STD_DEG,
            duration_mean_s: plant::DEFAULT_DURATION_MEAN_S,
            duration_std_s: plant::DEFAULT_DURATION_STD_S,
            duration_floor_s: plant::DEFAULT_DURATION_FLOOR_S,
        }
    }
}

impl NoiseSection {
    /// All spreads zero, means kept.
    pub fn zeroed(mut self) -> Self {
        self.step_std_cm.iter_mut().for_each(|s| *s = 0.0);
        self.lateral_std_cm = 0.0;
        self.heading_std_deg = 0.0;
        self.duration_std_s = 0.0;
        self
    }

    pub fn to_model(&self) -> Result<NoiseModel<f64>, HarnessError> {
        let model = NoiseModel {
            step_mean_cm: self.step_mean_cm.clone(),
            step_std_cm: self.step_std_cm.clone(),
            lateral_std_cm: self.lateral_std_cm,
            heading_std_rad: deg_to_rad(self.heading_std_deg),
            duration_mean_s: self.duration_mean_s,
            duration_std_s: self.duration_std_s,
            duration_floor_s: self.duration_floor_s,
        };
        if model.step_mean_cm.len() != LIMB_COUNT {
            return Err(HarnessError::config(format!(
                "noise.step_mean_cm needs {LIMB_COUNT} entries, got {}",
                model.step_mean_cm.len()
            )));
        }
        model
            .validate()
            .map_err(|e| HarnessError::config(format!("noise: {e}")))?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactSection {
    pub enabled: bool,
    pub body_radius_cm: f64,
}

impl Default for ContactSection {
    fn default() -> Self {
        Self {
            enabled: true,
            body_radius_cm: plant::DEFAULT_BODY_RADIUS_CM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraSection {
    pub scale_px_per_cm: f64,
    pub rotation_deg: f64,
    pub translation_px: [f64; 2],
    pub pixel_noise_std_px: f64,
    /// Distance from the body center to each tracking marker.
    pub marker_offset_cm: f64,
    pub floor_markers_cm: Vec<[f64; 2]>,
}

impl Default for CameraSection {
    fn default() -> Self {
        Self {
            scale_px_per_cm: 3.7,
            rotation_deg: 0.0,
            translation_px: [320.0, 240.0],
            pixel_noise_std_px: 1.0,
            marker_offset_cm: 5.0,
            floor_markers_cm: vec![
                [-60.0, -60.0],
                [0.0, -60.0],
                [60.0, -60.0],
                [60.0, 0.0],
                [60.0, 60.0],
                [0.0, 60.0],
                [-60.0, 60.0],
                [-60.0, 0.0],
            ],
        }
    }
}

impl CameraSection {
    pub fn to_model(&self) -> Result<CameraModel<f64>, HarnessError> {
        if !(self.pixel_noise_std_px.is_finite() && self.pixel_noise_std_px >= 0.0) {
            return Err(HarnessError::config(
                "camera.pixel_noise_std_px must be >= 0",
            ));
        }
        CameraModel::new(
            self.scale_px_per_cm,
            deg_to_rad(self.rotation_deg),
            (self.translation_px[0], self.translation_px[1]),
            self.pixel_noise_std_px,
        )
        .map_err(|e| HarnessError::config(format!("camera: {e}")))
    }

    pub fn floor_markers(&self) -> Vec<(f64, f64)> {
        self.floor_markers_cm.iter().map(|p| (p[0], p[1])).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScheduleChecks {
    pub max_simultaneous_on: usize,
    pub allow_antagonistic: bool,
}

impl Default for ScheduleChecks {
    fn default() -> Self {
        Self {
            max_simultaneous_on: DEFAULT_MAX_SIMULTANEOUS_ON,
            allow_antagonistic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CharacterizeSection {
    pub samples_per_primitive: usize,
}

impl Default for CharacterizeSection {
    fn default() -> Self {
        Self {
            samples_per_primitive: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub out_dir: String,
    pub plot: bool,
    pub initial_pose: PoseConfig,
    pub goal: GoalConfig,
    pub planner: PlannerSection,
    pub gait: GaitTiming<f64>,
    pub limb_map: LimbMap,
    pub schedule_checks: ScheduleChecks,
    pub noise: NoiseSection,
    pub contact: ContactSection,
    pub camera: CameraSection,
    pub protocol: LinkConfig,
    pub characterize: CharacterizeSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::preset(Scenario::Stationary)
    }
}

impl ExperimentConfig {
    /// Bundled scenario defaults.
    pub fn preset(scenario: Scenario) -> Self {
        let mut config = Self {
            scenario,
            seed: 1,
            out_dir: "out".into(),
            plot: false,
            initial_pose: PoseConfig::default(),
            goal: GoalConfig::default(),
            planner: PlannerSection::default(),
            gait: GaitTiming::default(),
            limb_map: LimbMap::default(),
            schedule_checks: ScheduleChecks::default(),
            noise: NoiseSection::default(),
            contact: ContactSection::default(),
            camera: CameraSection::default(),
            protocol: LinkConfig::default(),
            characterize: CharacterizeSection::default(),
        };
        match scenario {
            Scenario::Stationary => {}
            Scenario::Floating => {
                // Target drifts at 0.4-0.5 cm/s, about half the robot's speed.
                config.goal = GoalConfig::Path {
                    waypoints: vec![
                        Waypoint {
                            t_s: 0.0,
                            x_cm: 40.0,
                            y_cm: 10.0,
                        },
                        Waypoint {
                            t_s: 60.0,
                            x_cm: 30.0,
                            y_cm: 35.0,
                        },
                        Waypoint {
                            t_s: 120.0,
                            x_cm: 0.0,
                            y_cm: 45.0,
                        },
                    ],
                };
            }
            Scenario::Characterize => {
                config.contact.enabled = false;
                config.noise.step_mean_cm = vec![2.6, 2.0, 2.45, 2.1, 2.4];
            }
        }
        config
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.initial_pose()?;
        self.goal.validate()?;
        match (self.scenario, &self.goal) {
            (Scenario::Floating, GoalConfig::Fixed { .. }) => {
                return Err(HarnessError::config(
                    "floating scenario needs a `path` goal",
                ));
            }
            (Scenario::Stationary, GoalConfig::Path { .. }) => {
                return Err(HarnessError::config(
                    "stationary scenario needs a `fixed` goal",
                ));
            }
            _ => {}
        }
        if !(self.planner.tolerance_cm.is_finite() && self.planner.tolerance_cm > 0.0) {
            return Err(HarnessError::config(
                "planner.tolerance_cm must be positive",
            ));
        }
        if self.planner.max_steps == 0 {
            return Err(HarnessError::config("planner.max_steps must be positive"));
        }
        self.noise.to_model()?;
        self.camera.to_model()?;
        if self.camera.floor_markers_cm.len() < 2 {
            return Err(HarnessError::config(
                "camera needs at least 2 floor markers",
            ));
        }
        if !(self.contact.body_radius_cm.is_finite() && self.contact.body_radius_cm >= 0.0) {
            return Err(HarnessError::config("contact.body_radius_cm must be >= 0"));
        }
        self.protocol
            .validate()
            .map_err(|e| HarnessError::config(format!("protocol: {e}")))?;
        if self.scenario == Scenario::Characterize && self.characterize.samples_per_primitive < 2 {
            return Err(HarnessError::config(
                "characterize.samples_per_primitive must be >= 2",
            ));
        }
        Ok(())
    }

    pub fn initial_pose(&self) -> Result<Pose2D<f64>, HarnessError> {
        Pose2D::new(
            self.initial_pose.x_cm,
            self.initial_pose.y_cm,
            deg_to_rad(self.initial_pose.theta_deg),
        )
        .map_err(|e| HarnessError::config(format!("initial_pose: {e}")))
    }

    pub fn validation_rules(&self) -> ValidationRules<f64> {
        ValidationRules {
            safety_timeout_s: self.protocol.safety_timeout_s,
            max_simultaneous_on: self.schedule_checks.max_simultaneous_on,
            allow_antagonistic: self.schedule_checks.allow_antagonistic,
        }
    }
}
