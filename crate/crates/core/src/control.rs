//! Continuous-time PID law, one independent loop per joint.

use serde::{Deserialize, Serialize};

use crate::dynamics::{JointState, Vec2};
use crate::error::{Error, Result};

/// Gains for both joint loops.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp1: f64,
    pub ki1: f64,
    pub kd1: f64,
    pub kp2: f64,
    pub ki2: f64,
    pub kd2: f64,
}

impl PidGains {
    pub const LABELS: [&'static str; 6] = ["kp1", "ki1", "kd1", "kp2", "ki2", "kd2"];

    /// Hand-tuned reference set used as the comparison baseline.
    pub const BASELINE: PidGains = PidGains::from_genes([30.0, 20.0, 12.0, 32.0, 30.0, 22.0]);

    /// Published genetically tuned set.
    pub const PUBLISHED_GA: PidGains = PidGains::from_genes([97.47, 98.05, 13.46, 98.52, 70.24, 12.15]);

    pub const fn from_genes(g: [f64; 6]) -> Self {
        PidGains {
            kp1: g[0],
            ki1: g[1],
            kd1: g[2],
            kp2: g[3],
            ki2: g[4],
            kd2: g[5],
        }
    }

    pub const fn genes(&self) -> [f64; 6] {
        [self.kp1, self.ki1, self.kd1, self.kp2, self.ki2, self.kd2]
    }

    pub fn validate(&self, section: &str) -> Result<()> {
        for (label, v) in Self::LABELS.iter().zip(self.genes()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    format!("{section}.{label}"),
                    format!("must be finite and >= 0 (got {v})"),
                ));
            }
        }
        Ok(())
    }
}

/// Integral of the tracking error for each joint (rad·s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: Vec2,
}

/// `τᵢ = kpᵢ eᵢ + kiᵢ ∫eᵢ + kdᵢ ėᵢ`
///
/// The integral is not advanced here; the simulator carries it as ODE state.
#[inline]
pub fn pid_torque(g: &PidGains, st: &PidState, e: Vec2, edot: Vec2) -> Vec2 {
    [
        g.kp1 * e[0] + g.ki1 * st.integral[0] + g.kd1 * edot[0],
        g.kp2 * e[1] + g.ki2 * st.integral[1] + g.kd2 * edot[1],
    ]
}

/// Tracking error and its rate for a constant setpoint: `e = qd − q`, `ė = −q̇`.
#[inline]
pub fn error_signals(qd: Vec2, s: &JointState) -> (Vec2, Vec2) {
    ([qd[0] - s.q[0], qd[1] - s.q[1]], [-s.qdot[0], -s.qdot[1]])
}

/// Symmetric clamp of each torque to `[-limit, limit]`; no-op when `None`.
#[inline]
pub fn saturate(tau: Vec2, limit: Option<f64>) -> Vec2 {
    match limit {
        Some(l) => [tau[0].clamp(-l, l), tau[1].clamp(-l, l)],
        None => tau,
    }
}
