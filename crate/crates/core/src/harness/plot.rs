//! Self-contained SVG figure: trajectory with goal on the left, cost per
//! step on the right.

use std::fmt::Write as _;
use std::path::Path;

use super::log::ExperimentLogRow;
use super::{write_file, HarnessError};

const PANEL: f64 = 400.0;
const MARGIN: f64 = 50.0;
const WIDTH: f64 = 2.0 * PANEL + 3.0 * MARGIN;
const HEIGHT: f64 = PANEL + 2.0 * MARGIN;

#[derive(Debug, Clone, Copy)]
struct Frame {
    left: f64,
    top: f64,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.left + (x - self.x0) / (self.x1 - self.x0) * PANEL,
            self.top + PANEL - (y - self.y0) / (self.y1 - self.y0) * PANEL,
        )
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = (hi - lo).max(1.0);
    (lo - 0.08 * span, hi + 0.08 * span)
}

fn polyline(out: &mut String, frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, style: &str) {
    let mut d = String::new();
    for (x, y) in pts {
        let (px, py) = frame.map(x, y);
        write!(d, "{px:.2},{py:.2} ").unwrap();
    }
    writeln!(
        out,
        r#"<polyline points="{}" fill="none" {style}/>"#,
        d.trim_end()
    )
    .unwrap();
}

fn axes(out: &mut String, f: &Frame, title: &str, xlabel: &str, ylabel: &str) {
    let (l, t) = (f.left, f.top);
    writeln!(
        out,
        r##"<rect x="{l}" y="{t}" width="{PANEL}" height="{PANEL}" fill="none" stroke="#444"/>"##
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{title}</text>"#,
        l + PANEL / 2.0,
        t - 12.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{xlabel}</text>"#,
        l + PANEL / 2.0,
        t + PANEL + 36.0
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{x}" y="{y}" text-anchor="middle" font-size="12" transform="rotate(-90 {x} {y})">{ylabel}</text>"#,
        x = l - 36.0,
        y = t + PANEL / 2.0
    )
    .unwrap();
    for k in 0..=4 {
        let u = k as f64 / 4.0;
        let xv = f.x0 + u * (f.x1 - f.x0);
        let yv = f.y0 + u * (f.y1 - f.y0);
        let (px, _) = f.map(xv, f.y0);
        let (_, py) = f.map(f.x0, yv);
        writeln!(
            out,
            r#"<text x="{px:.1}" y="{}" text-anchor="middle" font-size="10">{xv:.1}</text>"#,
            t + PANEL + 14.0
        )
        .unwrap();
        writeln!(
            out,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="10">{yv:.1}</text>"#,
            l - 4.0,
            py + 3.0
        )
        .unwrap();
    }
}

pub fn render_svg(rows: &[ExperimentLogRow]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    let xs = rows.iter().flat_map(|r| [r.x_cm, r.goal_x_cm]);
    let ys = rows.iter().flat_map(|r| [r.y_cm, r.goal_y_cm]);
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (xmin, xmax, ymin, ymax) = if rows.is_empty() {
        (0.0, 1.0, 0.0, 1.0)
    } else {
        (xmin, xmax, ymin, ymax)
    };
    // Equal aspect so headings look right.
    let half = 0.5 * (xmax - xmin).max(ymax - ymin).max(1.0);
    let (cx, cy) = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    let (x0, x1) = padded(cx - half, cx + half);
    let (y0, y1) = padded(cy - half, cy + half);
    let traj = Frame {
        left: MARGIN,
        top: MARGIN,
        x0,
        x1,
        y0,
        y1,
    };
    axes(&mut out, &traj, "Trajectory", "x (cm)", "y (cm)");

    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        polyline(
            &mut out,
            &traj,
            rows.iter().map(|r| (r.goal_x_cm, r.goal_y_cm)),
            r##"stroke="#d62728" stroke-dasharray="4 3""##,
        );
        polyline(
            &mut out,
            &traj,
            rows.iter().map(|r| (r.x_cm, r.y_cm)),
            r##"stroke="#1f77b4" stroke-width="1.5""##,
        );
        let (sx, sy) = traj.map(first.x_cm, first.y_cm);
        writeln!(
            out,
            r##"<circle cx="{sx:.2}" cy="{sy:.2}" r="4" fill="#1f77b4"/>"##
        )
        .unwrap();
        let (gx, gy) = traj.map(last.goal_x_cm, last.goal_y_cm);
        writeln!(out, r##"<path d="M{:.2},{gy:.2} L{gx:.2},{:.2} L{:.2},{gy:.2} L{gx:.2},{:.2} Z" fill="#d62728"/>"##, gx - 6.0, gy - 6.0, gx + 6.0, gy + 6.0).unwrap();
        let (ex, ey) = traj.map(last.x_cm, last.y_cm);
        writeln!(out, r##"<circle cx="{ex:.2}" cy="{ey:.2}" r="4" fill="none" stroke="#1f77b4" stroke-width="2"/>"##).unwrap();
    }

    let steps = rows.last().map_or(1.0, |r| r.step.max(1) as f64);
    let cmax = rows.iter().map(|r| r.cost_cm).fold(1.0, f64::max);
    let cost = Frame {
        left: 2.0 * MARGIN + PANEL,
        top: MARGIN,
        x0: 0.0,
        x1: steps,
        y0: 0.0,
        y1: cmax * 1.08,
    };
    axes(&mut out, &cost, "Cost per step", "step", "cost (cm)");
    if !rows.is_empty() {
        polyline(
            &mut out,
            &cost,
            rows.iter().map(|r| (r.step as f64, r.cost_cm)),
            r##"stroke="#2ca02c" stroke-width="1.5""##,
        );
        for r in rows {
            let (px, py) = cost.map(r.step as f64, r.cost_cm);
            writeln!(
                out,
                r##"<circle cx="{px:.2}" cy="{py:.2}" r="2" fill="#2ca02c"/>"##
            )
            .unwrap();
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_plot(rows: &[ExperimentLogRow], path: &Path) -> Result<(), HarnessError> {
    write_file(path, render_svg(rows).as_bytes())
}
