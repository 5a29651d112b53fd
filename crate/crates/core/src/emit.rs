//! Trajectory persistence: CSV, JSON and static SVG charts.
//!
//! CSV schema, one row per step with the policy snapshot inlined so
//! mixing-ratio plots need no joins:
//!
//! ```text
//! step,tau,rho,loss_before,loss_after,raw_reward,norm_reward,p_arm0,...,p_arm{n-1}
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a file back reconstructs every record bit-exactly and repeated runs with
//! the same seed produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::curriculum::{
    StepRecord, TrajectoryLog, TransferPoint, TransferSeries, transfer_series,
};
use crate::error::{Error, Result};
use crate::policy::{ArmId, PolicyVector};

const FIXED_COLUMNS: [&str; 7] = [
    "step",
    "tau",
    "rho",
    "loss_before",
    "loss_after",
    "raw_reward",
    "norm_reward",
];

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Render a log as CSV. An empty log yields a header-only file with the
/// two-arm column set.
pub fn csv_string(log: &TrajectoryLog) -> String {
    let n_arms = log.n_arms().unwrap_or(2);
    let mut out = String::new();
    out.push_str(&FIXED_COLUMNS.join(","));
    for arm in 0..n_arms {
        let _ = write!(out, ",p_arm{arm}");
    }
    out.push('\n');
    for r in &log.records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.step, r.tau, r.rho, r.loss_before, r.loss_after, r.raw_reward, r.norm_reward
        );
        for p in r.policy.probs() {
            let _ = write!(out, ",{p}");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(log: &TrajectoryLog, path: &Path) -> Result<()> {
    fs::write(path, csv_string(log)).map_err(|e| Error::io(path, e))
}

/// Parse the records of a trajectory CSV. Metadata (scenario, scheduler,
/// seed) is not part of the schema; callers carry it separately.
pub fn parse_csv_records(path: &Path) -> Result<Vec<StepRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::TrajectoryParse {
        path: path.into(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| bad(1, "missing header".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < FIXED_COLUMNS.len() + 1
        || columns[..FIXED_COLUMNS.len()] != FIXED_COLUMNS
    {
        return Err(bad(1, format!("unexpected header '{header}'")));
    }
    let n_arms = columns.len() - FIXED_COLUMNS.len();
    for (arm, col) in columns[FIXED_COLUMNS.len()..].iter().enumerate() {
        if *col != format!("p_arm{arm}") {
            return Err(bad(1, format!("unexpected policy column '{col}'")));
        }
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(bad(
                line_no,
                format!("expected {} fields, got {}", columns.len(), fields.len()),
            ));
        }
        let int = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|e| bad(line_no, format!("field '{}': {e}", columns[i])))
        };
        let float = |i: usize| -> Result<f64> {
            fields[i]
                .parse()
                .map_err(|e| bad(line_no, format!("field '{}': {e}", columns[i])))
        };
        let mut probs = Vec::with_capacity(n_arms);
        for i in 0..n_arms {
            probs.push(float(FIXED_COLUMNS.len() + i)?);
        }
        let policy = PolicyVector::new(probs)
            .map_err(|e| bad(line_no, format!("policy snapshot: {e}")))?;
        records.push(StepRecord {
            step: int(0)?,
            tau: ArmId(int(1)? as usize),
            rho: ArmId(int(2)? as usize),
            loss_before: float(3)?,
            loss_after: float(4)?,
            raw_reward: float(5)?,
            norm_reward: float(6)?,
            policy,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

pub fn json_string(log: &TrajectoryLog) -> String {
    serde_json::to_string(log).expect("trajectory logs serialize")
}

pub fn write_json(log: &TrajectoryLog, path: &Path) -> Result<()> {
    fs::write(path, json_string(log)).map_err(|e| Error::io(path, e))
}

pub fn parse_json(path: &Path) -> Result<TrajectoryLog> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::TrajectoryParse {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Transfer series as CSV/JSON
// ---------------------------------------------------------------------------

pub fn transfer_csv_string(points: &[TransferPoint]) -> String {
    let mut out = String::from("step,mean\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.step, p.mean);
    }
    out
}

pub fn transfer_json_string(points: &[TransferPoint]) -> String {
    serde_json::to_string(points).expect("transfer points serialize")
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#17becf",
];
const CHART_W: f64 = 960.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_V: f64 = 35.0;
/// Simple decimation so quarter-million-step runs do not blow up the file.
const MAX_POINTS: usize = 1600;

fn arm_name(arm: usize, n_arms: usize) -> String {
    if n_arms == 2 {
        ["MT", "LM"][arm].into()
    } else {
        format!("task{arm}")
    }
}

struct Panel {
    y_top: f64,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Panel {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let x_span = (self.x_max - self.x_min).max(1.0);
        let y_span = (self.y_max - self.y_min).max(f64::MIN_POSITIVE);
        let px = MARGIN_L + (x - self.x_min) / x_span * (CHART_W - MARGIN_L - MARGIN_R);
        let py = self.y_top + PANEL_H - (y - self.y_min) / y_span * PANEL_H;
        (px, py)
    }

    fn polyline(&self, points: impl Iterator<Item = (f64, f64)>, color: &str) -> String {
        let coords: Vec<String> = points
            .map(|(x, y)| {
                let (px, py) = self.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.join(" ")
        )
    }

    fn frame(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<rect x=\"{MARGIN_L}\" y=\"{}\" width=\"{}\" height=\"{PANEL_H}\" fill=\"none\" stroke=\"#888\"/>",
            self.y_top,
            CHART_W - MARGIN_L - MARGIN_R
        );
        let _ = writeln!(
            out,
            "<text x=\"{MARGIN_L}\" y=\"{}\" font-size=\"14\" font-family=\"sans-serif\">{title}</text>",
            self.y_top - 10.0
        );
        for (v, anchor_y) in [(self.y_max, self.y_top + 12.0), (self.y_min, self.y_top + PANEL_H)] {
            let _ = writeln!(
                out,
                "<text x=\"{}\" y=\"{anchor_y}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"end\">{v:.4}</text>",
                MARGIN_L - 6.0
            );
        }
        for (v, anchor) in [(self.x_min, "start"), (self.x_max, "end")] {
            let x = if anchor == "start" { MARGIN_L } else { CHART_W - MARGIN_R };
            let _ = writeln!(
                out,
                "<text x=\"{x}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\" text-anchor=\"{anchor}\">{v:.0}</text>",
                self.y_top + PANEL_H + 16.0
            );
        }
        out
    }
}

fn decimate<T: Copy>(points: &[T]) -> Vec<T> {
    if points.len() <= MAX_POINTS {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let mut out: Vec<T> = points.iter().copied().step_by(stride).collect();
    if !(points.len() - 1).is_multiple_of(stride) {
        out.push(points[points.len() - 1]);
    }
    out
}

/// Static chart of the mixing ratio over time plus the per-pair transfer
/// running means.
pub fn svg_string(log: &TrajectoryLog) -> String {
    let n_arms = log.n_arms().unwrap_or(2);
    let steps: Vec<(f64, f64)> = log
        .records
        .iter()
        .map(|r| (r.step as f64, r.policy.probs()[0]))
        .collect();
    let lambda_points = decimate(&steps);
    let x_max = log.records.last().map(|r| r.step as f64).unwrap_or(1.0);

    let total_h = 2.0 * (PANEL_H + 2.0 * MARGIN_V);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CHART_W} {total_h}\" width=\"{CHART_W}\" height=\"{total_h}\">\n"
    );
    let _ = writeln!(
        out,
        "<text x=\"{MARGIN_L}\" y=\"16\" font-size=\"12\" font-family=\"sans-serif\">scenario={} scheduler={} seed={}</text>",
        log.scenario, log.scheduler, log.seed
    );

    let lambda_panel = Panel {
        y_top: 2.0 * MARGIN_V,
        x_min: 0.0,
        x_max,
        y_min: 0.0,
        y_max: 1.0,
    };
    out.push_str(&lambda_panel.frame(&format!("sampling probability of {}", arm_name(0, n_arms))));
    if !lambda_points.is_empty() {
        out.push_str(&lambda_panel.polyline(lambda_points.iter().copied(), PALETTE[0]));
    }

    let series = transfer_series(log).ok();
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    if let Some(series) = &series {
        for tau in 0..n_arms {
            for rho in 0..n_arms {
                for p in series.pair(ArmId(tau), ArmId(rho)) {
                    y_min = y_min.min(p.mean);
                    y_max = y_max.max(p.mean);
                }
            }
        }
    }
    if !y_min.is_finite() || y_min == y_max {
        (y_min, y_max) = (0.0, 1.0);
    }
    let transfer_panel = Panel {
        y_top: PANEL_H + 4.0 * MARGIN_V,
        x_min: 0.0,
        x_max,
        y_min,
        y_max,
    };
    out.push_str(&transfer_panel.frame("reward transfer, window-500 running mean"));
    if let Some(series) = &series {
        let mut color = 0;
        for tau in 0..n_arms {
            for rho in 0..n_arms {
                let points = series.pair(ArmId(tau), ArmId(rho));
                if points.is_empty() {
                    continue;
                }
                let xy: Vec<(f64, f64)> =
                    points.iter().map(|p| (p.step as f64, p.mean)).collect();
                let c = PALETTE[color % PALETTE.len()];
                out.push_str(&transfer_panel.polyline(decimate(&xy).into_iter(), c));
                let _ = writeln!(
                    out,
                    "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\" fill=\"{c}\">{} to {}</text>",
                    CHART_W - MARGIN_R + 10.0,
                    transfer_panel.y_top + 16.0 * (color + 1) as f64,
                    arm_name(tau, n_arms),
                    arm_name(rho, n_arms),
                );
                color += 1;
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(log: &TrajectoryLog, path: &Path) -> Result<()> {
    fs::write(path, svg_string(log)).map_err(|e| Error::io(path, e))
}

/// Single-pair transfer chart.
pub fn transfer_svg_string(points: &[TransferPoint], title: &str) -> String {
    let total_h = PANEL_H + 2.0 * MARGIN_V + 20.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {CHART_W} {total_h}\" width=\"{CHART_W}\" height=\"{total_h}\">\n"
    );
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        y_min = y_min.min(p.mean);
        y_max = y_max.max(p.mean);
    }
    if !y_min.is_finite() || y_min == y_max {
        (y_min, y_max) = (0.0, 1.0);
    }
    let panel = Panel {
        y_top: 2.0 * MARGIN_V,
        x_min: 0.0,
        x_max: points.last().map(|p| p.step as f64).unwrap_or(1.0),
        y_min,
        y_max,
    };
    out.push_str(&panel.frame(title));
    if !points.is_empty() {
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.step as f64, p.mean)).collect();
        out.push_str(&panel.polyline(decimate(&xy).into_iter(), PALETTE[0]));
    }
    out.push_str("</svg>\n");
    out
}

/// Extract one pair's series from a log, for the transfer CLI path.
pub fn pair_series(log: &TrajectoryLog, tau: ArmId, rho: ArmId) -> Result<Vec<TransferPoint>> {
    let series: TransferSeries = transfer_series(log)?;
    let n = series.n_arms();
    tau.validate(n)?;
    rho.validate(n)?;
    Ok(series.pair(tau, rho).to_vec())
}
