//! Per-step log rows, CSV output and summary statistics.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{write_file, HarnessError};

pub const CSV_HEADER: &str =
    "step,t_sim_s,x_cm,y_cm,theta_rad,goal_x_cm,goal_y_cm,action_id,cost_cm";

/// One planner iteration as seen by the controller. The closing row of a
/// run carries the last observation and no action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLogRow {
    pub step: usize,
    pub t_sim_s: f64,
    pub x_cm: f64,
    pub y_cm: f64,
    pub theta_rad: f64,
    pub goal_x_cm: f64,
    pub goal_y_cm: f64,
    pub action_id: Option<usize>,
    pub cost_cm: f64,
}

/// Floats use `Display`, which is the shortest text that parses back to
/// the same value.
pub fn format_csv(rows: &[ExperimentLogRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let action = r.action_id.map(|a| a.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            r.t_sim_s,
            r.x_cm,
            r.y_cm,
            r.theta_rad,
            r.goal_x_cm,
            r.goal_y_cm,
            action,
            r.cost_cm
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn write_csv(rows: &[ExperimentLogRow], path: &Path) -> Result<(), HarnessError> {
    write_file(path, format_csv(rows).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub converged: bool,
    /// Number of primitives executed.
    pub steps: usize,
    pub sim_time_s: f64,
    pub final_cost_cm: f64,
    /// Mean observed translation per executed step; `None` without steps.
    pub mean_step_distance_cm: Option<f64>,
    pub mean_step_duration_s: Option<f64>,
    pub frames_sent: usize,
    pub frames_lost: usize,
    pub watchdog_trips: usize,
}

/// Step statistics computed from log rows alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowStats {
    pub steps: usize,
    pub sim_time_s: f64,
    pub final_cost_cm: f64,
    pub mean_step_distance_cm: Option<f64>,
    pub mean_step_duration_s: Option<f64>,
}

impl RowStats {
    pub fn from_rows(rows: &[ExperimentLogRow]) -> Self {
        let mut steps = 0usize;
        let mut dist = 0.0;
        let mut dur = 0.0;
        for w in rows.windows(2) {
            if w[0].action_id.is_some() {
                steps += 1;
                dist += (w[1].x_cm - w[0].x_cm).hypot(w[1].y_cm - w[0].y_cm);
                dur += w[1].t_sim_s - w[0].t_sim_s;
            }
        }
        let last = rows.last();
        Self {
            steps,
            sim_time_s: last.map_or(0.0, |r| r.t_sim_s),
            final_cost_cm: last.map_or(0.0, |r| r.cost_cm),
            mean_step_distance_cm: (steps > 0).then(|| dist / steps as f64),
            mean_step_duration_s: (steps > 0).then(|| dur / steps as f64),
        }
    }
}
