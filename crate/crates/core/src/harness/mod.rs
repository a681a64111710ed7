//! Simulated testbed experiments: camera tracking, greedy planning, serial
//! actuation and the stochastic plant wired into one closed loop.

mod config;
mod log;
mod plot;

pub use config::{
    CameraSection, CharacterizeSection, ContactSection, ExperimentConfig, GoalConfig, NoiseSection,
    PlannerSection, PoseConfig, Scenario, ScheduleChecks, Waypoint,
};
pub use log::{format_csv, write_csv, ExperimentLogRow, RowStats, RunSummary, CSV_HEADER};
pub use plot::{render_plot, render_svg};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{cost, GoalState, Pose2D};
use crate::planner::{run_policy, PlannerConfig, PlannerError, Plant};
use crate::plant::{PlantError, PlantSimulator};
use crate::primitives::{build_library, validate_schedule, LibraryError, MotionPrimitive};
use crate::protocol::{ActuationLink, LinkStats, ProtocolError, TranscriptEntry};
use crate::vision::{VisionError, VisionSystem};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("I/O failure at {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("primitive library: {0}")]
    Library(#[from] LibraryError),
    #[error("gait for primitive {id} is unsafe: {detail}")]
    UnsafeSchedule { id: usize, detail: String },
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Testbed(#[from] TestbedError),
}

impl HarnessError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Error)]
pub enum TestbedError {
    #[error("vision: {0}")]
    Vision(#[from] VisionError),
    #[error("plant: {0}")]
    Plant(#[from] PlantError),
    #[error("actuation link: {0}")]
    Protocol(#[from] ProtocolError),
}

/// Independent random streams per subsystem, all derived from one seed.
fn substream(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// The simulated robot as the controller sees it: pose only through the
/// camera, motion only through serial frames.
pub struct Testbed {
    sim: PlantSimulator<f64>,
    vision: VisionSystem<f64>,
    link: ActuationLink,
}

impl Testbed {
    pub fn new(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let noise = config.noise.to_model()?;
        let mut sim = PlantSimulator::new(config.initial_pose()?, noise, substream(config.seed, 0))
            .map_err(TestbedError::from)?;
        if config.contact.enabled {
            sim = sim.with_contact(config.contact.body_radius_cm);
        }
        let vision = VisionSystem::calibrated(
            config.camera.to_model()?,
            &config.camera.floor_markers(),
            config.camera.marker_offset_cm,
            substream(config.seed, 1),
        )
        .map_err(TestbedError::from)?;
        let link = ActuationLink::new(config.protocol, substream(config.seed, 2))
            .map_err(TestbedError::from)?;
        Ok(Self { sim, vision, link })
    }

    pub fn true_pose(&self) -> Pose2D<f64> {
        self.sim.observe_pose()
    }

    pub fn link(&self) -> &ActuationLink {
        &self.link
    }

    pub fn vision(&self) -> &VisionSystem<f64> {
        &self.vision
    }
}

impl Plant<f64> for Testbed {
    type Error = TestbedError;

    fn observe(&mut self) -> Result<Pose2D<f64>, TestbedError> {
        Ok(self.vision.estimate(&self.sim.observe_pose())?)
    }

    fn execute(&mut self, primitive: &MotionPrimitive<f64>) -> Result<(), TestbedError> {
        // Actual step durations vary around the schedule length, so the
        // link clock can run ahead of the plant clock.
        let start = self.sim.elapsed().max(self.link.now());
        self.link.play_schedule(&primitive.schedule, start)?;
        self.sim.execute(primitive)?;
        Ok(())
    }

    fn elapsed(&self) -> f64 {
        self.sim.elapsed()
    }

    fn goal_updated(&mut self, goal: &GoalState<f64>) {
        self.sim.set_goal(*goal);
    }
}

/// Observed displacement statistics for one primitive, measured along its
/// nominal direction of travel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveStats {
    pub id: usize,
    pub heading_offset_deg: f64,
    pub samples: usize,
    pub configured_mean_cm: f64,
    pub mean_cm: f64,
    pub std_cm: f64,
    pub stderr_cm: f64,
    pub mean_duration_s: f64,
}

impl PrimitiveStats {
    /// Distance of the measured mean from the configured one, in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean_cm - self.configured_mean_cm) / self.stderr_cm
    }
}

pub const CHARACTERIZATION_HEADER: &str =
    "id,heading_offset_deg,samples,configured_mean_cm,mean_cm,std_cm,stderr_cm,mean_duration_s";

pub fn format_characterization(table: &[PrimitiveStats]) -> String {
    let mut out = format!("{CHARACTERIZATION_HEADER}\n");
    for s in table {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.id,
            s.heading_offset_deg,
            s.samples,
            s.configured_mean_cm,
            s.mean_cm,
            s.std_cm,
            s.stderr_cm,
            s.mean_duration_s
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentLogRow>,
    pub summary: RunSummary,
    pub characterization: Option<Vec<PrimitiveStats>>,
    pub link_stats: LinkStats,
    pub transcript: Vec<TranscriptEntry>,
}

impl ExperimentReport {
    pub fn converged(&self) -> bool {
        self.summary.converged
    }
}

fn log_row(
    step: usize,
    t: f64,
    pose: &Pose2D<f64>,
    goal: &GoalState<f64>,
    action: Option<usize>,
) -> ExperimentLogRow {
    ExperimentLogRow {
        step,
        t_sim_s: t,
        x_cm: pose.x,
        y_cm: pose.y,
        theta_rad: pose.theta,
        goal_x_cm: goal.x,
        goal_y_cm: goal.y,
        action_id: action,
        cost_cm: cost(pose, goal),
    }
}

fn library(config: &ExperimentConfig) -> Result<Vec<MotionPrimitive<f64>>, HarnessError> {
    let lib = build_library(config.planner.r_nominal_cm, &config.gait, &config.limb_map)?;
    let rules = config.validation_rules();
    for p in &lib {
        let report = validate_schedule(&p.schedule, &rules, &config.limb_map);
        if !report.is_valid() {
            return Err(HarnessError::UnsafeSchedule {
                id: p.id,
                detail: format!("{:?}", report.violations),
            });
        }
    }
    Ok(lib)
}

/// Runs one experiment in memory. Nothing is written to disk.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let mut testbed = Testbed::new(config)?;
    let library = library(config)?;
    let (rows, converged, characterization) = match config.scenario {
        Scenario::Stationary | Scenario::Floating => {
            let planner = PlannerConfig::new(
                config.planner.tolerance_cm,
                config.planner.max_steps,
                library,
            )?;
            let goal = config.goal.clone();
            let mut goals = |_: usize, t: f64| goal.goal_at(t);
            let run = run_policy(&mut testbed, &mut goals, &planner)?;
            let mut rows: Vec<_> = run
                .records
                .iter()
                .map(|r| {
                    log_row(
                        r.step,
                        r.t_before,
                        &r.pose_before,
                        &r.goal,
                        Some(r.action_id),
                    )
                })
                .collect();
            rows.push(log_row(
                run.records.len(),
                run.final_time,
                &run.final_pose,
                &run.final_goal,
                None,
            ));
            (rows, run.converged, None)
        }
        Scenario::Characterize => {
            let (rows, table) = characterize(&mut testbed, &library, config)?;
            (rows, true, Some(table))
        }
    };

    let stats = RowStats::from_rows(&rows);
    let link_stats = *testbed.link.stats();
    let summary = RunSummary {
        scenario: config.scenario.as_str().into(),
        seed: config.seed,
        converged,
        steps: stats.steps,
        sim_time_s: stats.sim_time_s,
        final_cost_cm: stats.final_cost_cm,
        mean_step_distance_cm: stats.mean_step_distance_cm,
        mean_step_duration_s: stats.mean_step_duration_s,
        frames_sent: link_stats.frames_sent,
        frames_lost: link_stats.frames_lost,
        watchdog_trips: link_stats.watchdog_trips,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        summary,
        characterization,
        link_stats,
        transcript: testbed.link.transcript().to_vec(),
    })
}

/// Executes every primitive `samples_per_primitive` times, round-robin so
/// the robot stays near its start, and measures each step with the camera.
fn characterize(
    testbed: &mut Testbed,
    library: &[MotionPrimitive<f64>],
    config: &ExperimentConfig,
) -> Result<(Vec<ExperimentLogRow>, Vec<PrimitiveStats>), HarnessError> {
    let n = config.characterize.samples_per_primitive;
    let mut along: Vec<Vec<f64>> = vec![Vec::with_capacity(n); library.len()];
    let mut durations = vec![0.0; library.len()];
    let mut rows = Vec::with_capacity(n * library.len() + 1);
    for _ in 0..n {
        for p in library {
            let t0 = testbed.elapsed();
            let before = testbed.observe()?;
            rows.push(log_row(
                rows.len(),
                t0,
                &before,
                &config.goal.goal_at(t0),
                Some(p.id),
            ));
            testbed.execute(p)?;
            let after = testbed.observe()?;
            let (s, c) = (before.theta + p.phi).sin_cos();
            along[p.id].push((after.x - before.x) * c + (after.y - before.y) * s);
            durations[p.id] += testbed.elapsed() - t0;
        }
    }
    let t = testbed.elapsed();
    let last = testbed.observe()?;
    rows.push(log_row(rows.len(), t, &last, &config.goal.goal_at(t), None));

    let table = library
        .iter()
        .map(|p| {
            let xs = &along[p.id];
            let k = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / k;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            PrimitiveStats {
                id: p.id,
                heading_offset_deg: p.phi_degrees(),
                samples: xs.len(),
                configured_mean_cm: config.noise.step_mean_cm[p.id],
                mean_cm: mean,
                std_cm: var.sqrt(),
                stderr_cm: (var / k).sqrt(),
                mean_duration_s: durations[p.id] / k,
            }
        })
        .collect();
    Ok((rows, table))
}

/// Writes `log.csv`, `summary.json`, and when applicable
/// `characterization.csv`, `transcript.log` and `plot.svg`.
pub fn write_outputs(
    report: &ExperimentReport,
    dir: &Path,
    plot: bool,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<(), HarnessError> {
        let path = dir.join(name);
        write_file(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    put("log.csv", format_csv(&report.rows).as_bytes())?;
    let summary = serde_json::to_string_pretty(&report.summary).expect("summary serializes");
    put("summary.json", format!("{summary}\n").as_bytes())?;
    if let Some(table) = &report.characterization {
        put(
            "characterization.csv",
            format_characterization(table).as_bytes(),
        )?;
    }
    if !report.transcript.is_empty() {
        let text: String = report.transcript.iter().map(|e| format!("{e}\n")).collect();
        put("transcript.log", text.as_bytes())?;
    }
    if plot {
        put("plot.svg", render_svg(&report.rows).as_bytes())?;
    }
    Ok(written)
}

/// Runs the same config under each seed on its own thread.
pub fn run_sweep(
    config: &ExperimentConfig,
    seeds: &[u64],
) -> Vec<Result<ExperimentReport, HarnessError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let mut c = config.clone();
                c.seed = seed;
                scope.spawn(move || run_experiment(&c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}
