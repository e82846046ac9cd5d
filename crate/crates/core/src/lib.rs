//! Two-link manipulator simulation with per-joint PID control, and a
//! real-coded genetic algorithm that tunes the six gains by minimizing the
//! integral of squared tracking error.

pub mod cli;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod ga;
pub mod report;
pub mod simulate;

pub use config::{load_config, ExperimentConfig};
pub use control::{PidGains, PidState};
pub use dynamics::{CoriolisForm, JointState, RobotParams};
pub use error::{Error, Result};
pub use ga::{run_ga, Chromosome, GaConfig, GaReport, Termination};
pub use simulate::{simulate, Metrics, SimConfig, SimResult};
