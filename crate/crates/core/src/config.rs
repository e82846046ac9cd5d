//! Experiment configuration file (TOML).
//!
//! Every section and key is optional; missing values take the defaults of
//! the published two-link experiment. Unknown keys are rejected.
//!
//! ```toml
//! output_dir = "out"
//!
//! [robot]
//! m1 = 5.0
//! m2 = 5.0
//! l1 = 0.34
//! l2 = 0.34
//! g = 9.81
//! b1 = 0.0
//! b2 = 0.0
//! coriolis = "lagrangian"   # or "printed"
//!
//! [sim]
//! dt = 0.001
//! t_final = 10.0
//! q0 = [3.141592653589793, 1.5707963267948966]
//! qd = [1.5707963267948966, 3.141592653589793]
//! qdot0 = [0.0, 0.0]
//! blowup_limit = 1000.0
//! # torque_limit = 200.0
//! record_stride = 1
//! settling_band = 0.02
//!
//! [ga]
//! pop_size = 20
//! max_generations = 1000
//! crossover_rate = 0.6
//! mutation_rate = 0.4
//! lower = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//! upper = [150.0, 150.0, 150.0, 150.0, 150.0, 150.0]
//! elite_count = 1
//! seed = 24301
//! stall_generations = 25
//! stall_tolerance = 1e-6
//! # penalty_fitness = 1e9
//! blx_alpha = 0.5
//! mutation_scale = 0.05
//! parallel = true
//!
//! [baseline_gains]
//! kp1 = 30.0
//! ki1 = 20.0
//! kd1 = 12.0
//! kp2 = 32.0
//! ki2 = 30.0
//! kd2 = 22.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::PidGains;
use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::ga::GaConfig;
use crate::simulate::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub robot: RobotParams,
    pub sim: SimConfig,
    pub ga: GaConfig,
    pub baseline_gains: PidGains,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            output_dir: PathBuf::from("out"),
            robot: RobotParams::default(),
            sim: SimConfig::default(),
            ga: GaConfig::default(),
            baseline_gains: PidGains::BASELINE,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.sim.validate()?;
        self.ga.validate(&self.sim)?;
        self.baseline_gains.validate("baseline_gains")
    }

    /// Parses and validates configuration text; `origin` is only used in
    /// diagnostics.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            location: e.span().map(|span| line_col(text, span.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Reads, parses and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml(&text, path)
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    (line, col)
}
