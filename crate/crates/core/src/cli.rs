//! `armtune` command-line harness.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 diverged
//! simulation, 3 tuned controller did not beat the baseline on ISE.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{load_config, ExperimentConfig};
use crate::control::PidGains;
use crate::error::{Error, Result};
use crate::ga::run_ga;
use crate::report::{
    format_ga_summary, format_gains, format_metrics, parse_gains, write_history_csv, write_trajectory_csv,
    ComparisonReport, ControllerSummary,
};
use crate::simulate::{simulate, SimResult};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_DIVERGED: u8 = 2;
pub const EXIT_REGRESSION: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "armtune",
    version,
    about = "Simulate and GA-tune PID control of a two-link arm"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides `ga.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Gains to use: `baseline`, `published`, a gains file, or six
    /// comma-separated values `kp1,ki1,kd1,kp2,ki2,kd2`.
    #[arg(long, global = true)]
    pub gains: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run one closed-loop simulation.
    Simulate,
    /// Tune the six gains with the genetic algorithm.
    Tune,
    /// Simulate baseline and tuned gains side by side.
    Compare,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainsSource {
    /// The configured `baseline_gains`.
    Baseline,
    /// The published GA-tuned set.
    Published,
    File(PathBuf),
    Inline(PidGains),
}

impl GainsSource {
    pub fn parse(arg: &str) -> Result<Self> {
        match arg {
            "baseline" => return Ok(GainsSource::Baseline),
            "published" => return Ok(GainsSource::Published),
            _ => {}
        }
        if arg.contains(',') && !Path::new(arg).exists() {
            let values: std::result::Result<Vec<f64>, _> = arg.split(',').map(|v| v.trim().parse()).collect();
            let genes: [f64; 6] = values.ok().and_then(|v| v.try_into().ok()).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "--gains: expected six comma-separated numbers, got `{arg}`"
                ))
            })?;
            let gains = PidGains::from_genes(genes);
            gains.validate("gains")?;
            return Ok(GainsSource::Inline(gains));
        }
        Ok(GainsSource::File(PathBuf::from(arg)))
    }

    pub fn resolve(&self, cfg: &ExperimentConfig) -> Result<PidGains> {
        match self {
            GainsSource::Baseline => Ok(cfg.baseline_gains),
            GainsSource::Published => Ok(PidGains::PUBLISHED_GA),
            GainsSource::Inline(g) => Ok(*g),
            GainsSource::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_gains(&text, path)
            }
        }
    }
}

/// Parses arguments, runs the command, and maps the outcome to an exit code.
pub fn run(cli: &Cli) -> u8 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.ga.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let gains = cli.gains.as_deref().map(GainsSource::parse).transpose()?;
    match cli.command {
        Command::Simulate => cmd_simulate(&cfg, gains.as_ref().unwrap_or(&GainsSource::Baseline)),
        Command::Tune => cmd_tune(&cfg).map(|_| EXIT_OK),
        Command::Compare => cmd_compare(&cfg, gains.as_ref()),
    }
}

fn prepare_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_file(path, |w| w.write_all(text.as_bytes()))
}

fn write_trajectory(cfg: &ExperimentConfig, name: &str, result: &SimResult) -> Result<()> {
    let path = cfg.output_dir.join(name);
    write_file(&path, |w| write_trajectory_csv(w, result, cfg.sim.qd))
}

/// Writes `trajectory.csv` and `metrics.txt`; returns 2 if the run diverged.
pub fn cmd_simulate(cfg: &ExperimentConfig, source: &GainsSource) -> Result<u8> {
    cfg.validate()?;
    let gains = source.resolve(cfg)?;
    let result = simulate(&cfg.robot, &gains, &cfg.sim)?;
    prepare_output(&cfg.output_dir)?;
    write_trajectory(cfg, "trajectory.csv", &result)?;
    let metrics = format_metrics(&gains, &result);
    write_text(&cfg.output_dir.join("metrics.txt"), &metrics)?;
    print!("{metrics}");
    Ok(if result.diverged { EXIT_DIVERGED } else { EXIT_OK })
}

/// Writes `ga_history.csv`, `best_gains` and `ga_report.txt`; returns the
/// tuned gains.
pub fn cmd_tune(cfg: &ExperimentConfig) -> Result<PidGains> {
    cfg.validate()?;
    let report = run_ga(&cfg.ga, &cfg.robot, &cfg.sim)?;
    prepare_output(&cfg.output_dir)?;
    write_file(&cfg.output_dir.join("ga_history.csv"), |w| {
        write_history_csv(w, &report)
    })?;
    let best = report.best.gains();
    write_text(&cfg.output_dir.join("best_gains"), &format_gains(&best))?;
    let summary = format_ga_summary(&cfg.ga, &report);
    write_text(&cfg.output_dir.join("ga_report.txt"), &summary)?;
    print!("{summary}");
    Ok(best)
}

/// Simulates the baseline and the tuned gains (from `tuned`, or a fresh GA
/// run when `None`) under the same configuration. Returns 3 unless the tuned
/// controller has strictly lower ISE.
pub fn cmd_compare(cfg: &ExperimentConfig, tuned: Option<&GainsSource>) -> Result<u8> {
    cfg.validate()?;
    let tuned_gains = match tuned {
        Some(source) => source.resolve(cfg)?,
        None => cmd_tune(cfg)?,
    };
    let baseline = simulate(&cfg.robot, &cfg.baseline_gains, &cfg.sim)?;
    let tuned = simulate(&cfg.robot, &tuned_gains, &cfg.sim)?;
    prepare_output(&cfg.output_dir)?;
    write_trajectory(cfg, "trajectory_baseline.csv", &baseline)?;
    write_trajectory(cfg, "trajectory_tuned.csv", &tuned)?;
    let report = ComparisonReport {
        baseline: ControllerSummary::new(cfg.baseline_gains, &baseline),
        tuned: ControllerSummary::new(tuned_gains, &tuned),
    };
    let text = report.render();
    write_text(&cfg.output_dir.join("comparison.txt"), &text)?;
    print!("{text}");
    Ok(if tuned.ise < baseline.ise {
        EXIT_OK
    } else {
        EXIT_REGRESSION
    })
}
