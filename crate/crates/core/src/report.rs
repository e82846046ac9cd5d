//! Text and CSV artifacts written by the command-line harness.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use crate::control::PidGains;
use crate::dynamics::Vec2;
use crate::error::{Error, Result};
use crate::ga::{GaConfig, GaReport};
use crate::simulate::{Metrics, SimResult};

pub const TRAJECTORY_HEADER: &str = "t,q1,q2,qd1,qd2,e1,e2,tau1,tau2";
pub const HISTORY_HEADER: &str = "generation,best_fitness,mean_fitness";

/// Scientific notation with 16 significant digits.
fn num(x: f64) -> String {
    format!("{x:.15e}")
}

/// One row per recorded sample; `qd1,qd2` are the setpoint angles.
pub fn write_trajectory_csv<W: Write>(mut w: W, result: &SimResult, qd: Vec2) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for s in &result.samples {
        let row = [
            s.t, s.q[0], s.q[1], qd[0], qd[1], s.e[0], s.e[1], s.tau[0], s.tau[1],
        ];
        let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Generation numbers start at 1 (the initial population).
pub fn write_history_csv<W: Write>(mut w: W, report: &GaReport) -> io::Result<()> {
    writeln!(w, "{HISTORY_HEADER}")?;
    for (i, h) in report.history.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, num(h.best), num(h.mean))?;
    }
    Ok(())
}

/// `label = value` lines in gene order. Values use the shortest exact
/// decimal form, so a reload reproduces the gains bit for bit.
pub fn format_gains(g: &PidGains) -> String {
    let mut out = String::new();
    for (label, v) in PidGains::LABELS.iter().zip(g.genes()) {
        let _ = writeln!(out, "{label} = {v:?}");
    }
    out
}

/// Inverse of [`format_gains`]. Blank lines and `#` comments are ignored;
/// all six labels must appear exactly once, in order.
pub fn parse_gains(text: &str, origin: &Path) -> Result<PidGains> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        location: Some((line, 1)),
        message,
    };
    let mut genes = Vec::with_capacity(6);
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (label, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(n + 1, format!("expected `label = value`, got `{line}`")))?;
        let label = label.trim();
        let expected = PidGains::LABELS
            .get(genes.len())
            .ok_or_else(|| parse_err(n + 1, "more than six gains".into()))?;
        if label != *expected {
            return Err(parse_err(n + 1, format!("expected `{expected}`, got `{label}`")));
        }
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|e| parse_err(n + 1, format!("bad value for `{label}`: {e}")))?;
        genes.push(v);
    }
    let genes: [f64; 6] = genes.try_into().map_err(|g: Vec<f64>| {
        parse_err(
            text.lines().count().max(1),
            format!("expected six gains, found {}", g.len()),
        )
    })?;
    let gains = PidGains::from_genes(genes);
    gains.validate("gains")?;
    Ok(gains)
}

fn opt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "unsettled".to_string(), |v| format!("{v:?}"))
}

/// `metrics.txt` contents.
pub fn format_metrics(gains: &PidGains, result: &SimResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ise = {:?}", result.ise);
    let _ = writeln!(out, "diverged = {}", result.diverged);
    match &result.metrics {
        Some(m) => {
            for j in 0..2 {
                let _ = writeln!(out, "overshoot_pct{} = {:?}", j + 1, m.overshoot_pct[j]);
                let _ = writeln!(out, "settling_time{} = {}", j + 1, opt_time(m.settling_time[j]));
                let _ = writeln!(out, "steady_state_error{} = {:?}", j + 1, m.steady_state_error[j]);
            }
        }
        None => {
            let _ = writeln!(out, "# metrics unavailable: run diverged");
        }
    }
    for (label, v) in PidGains::LABELS.iter().zip(gains.genes()) {
        let _ = writeln!(out, "{label} = {v:?}");
    }
    out
}

/// `ga_report.txt` contents.
pub fn format_ga_summary(cfg: &GaConfig, report: &GaReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "generations_run = {}", report.generations_run);
    let _ = writeln!(out, "terminated_by = {}", report.terminated_by);
    let _ = writeln!(
        out,
        "best_fitness = {:?}",
        report.best.fitness.unwrap_or(f64::NAN)
    );
    out.push_str(&format_gains(&report.best.gains()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Baseline,
    Tuned,
    Tie,
}

impl Winner {
    fn lower(baseline: f64, tuned: f64) -> Self {
        match tuned.total_cmp(&baseline) {
            std::cmp::Ordering::Less => Winner::Tuned,
            std::cmp::Ordering::Greater => Winner::Baseline,
            std::cmp::Ordering::Equal => Winner::Tie,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Winner::Baseline => "baseline",
            Winner::Tuned => "ga-tuned",
            Winner::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSummary {
    pub gains: PidGains,
    pub ise: f64,
    pub diverged: bool,
    pub metrics: Option<Metrics>,
}

impl ControllerSummary {
    pub fn new(gains: PidGains, result: &SimResult) -> Self {
        ControllerSummary {
            gains,
            ise: result.ise,
            diverged: result.diverged,
            metrics: result.metrics,
        }
    }
}

/// Baseline vs tuned controller under one simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub baseline: ControllerSummary,
    pub tuned: ControllerSummary,
}

impl ComparisonReport {
    pub fn ise_winner(&self) -> Winner {
        Winner::lower(self.baseline.ise, self.tuned.ise)
    }

    /// `(metric name, baseline value, tuned value, winner)`; unsettled or
    /// diverged values count as infinitely bad.
    pub fn rows(&self) -> Vec<(String, f64, f64, Winner)> {
        let mut rows = vec![(
            "ise".to_string(),
            self.baseline.ise,
            self.tuned.ise,
            self.ise_winner(),
        )];
        type Pick = fn(&Metrics, usize) -> f64;
        let picks: [(&str, Pick); 3] = [
            ("overshoot_pct", |m, j| m.overshoot_pct[j]),
            ("settling_time", |m, j| {
                m.settling_time[j].unwrap_or(f64::INFINITY)
            }),
            ("steady_state_error", |m, j| m.steady_state_error[j]),
        ];
        for (name, pick) in picks {
            for j in 0..2 {
                let b = self
                    .baseline
                    .metrics
                    .as_ref()
                    .map_or(f64::INFINITY, |m| pick(m, j));
                let t = self.tuned.metrics.as_ref().map_or(f64::INFINITY, |m| pick(m, j));
                rows.push((format!("{name}{}", j + 1), b, t, Winner::lower(b, t)));
            }
        }
        rows
    }

    /// `comparison.txt` contents.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:>24} {:>24} {:>10}",
            "metric", "baseline", "ga-tuned", "winner"
        );
        for (name, b, t, w) in self.rows() {
            let _ = writeln!(out, "{name:<22} {:>24} {:>24} {:>10}", num(b), num(t), w.as_str());
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "ise_winner = {}", self.ise_winner().as_str());
        let _ = writeln!(out, "baseline_diverged = {}", self.baseline.diverged);
        let _ = writeln!(out, "tuned_diverged = {}", self.tuned.diverged);
        let _ = writeln!(out);
        let _ = writeln!(out, "[baseline]");
        out.push_str(&format_gains(&self.baseline.gains));
        let _ = writeln!(out, "[ga-tuned]");
        out.push_str(&format_gains(&self.tuned.gains));
        out
    }
}
