//! Fixed-step closed-loop simulation.
//!
//! The integrated state is `(q1, q2, q̇1, q̇2, ie1, ie2, J)`: joint state, the
//! PID error integrals, and the running squared-error cost
//! `J = ∫ (e1² + e2²) dt`. All seven components are advanced together by
//! classical fourth-order Runge-Kutta.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::control::{error_signals, pid_torque, saturate, PidGains, PidState};
use crate::dynamics::{forward_dynamics, JointState, RobotParams, Vec2};
use crate::error::{Error, Result};

/// Anything that maps joint state and applied torque to joint acceleration.
pub trait Plant {
    fn acceleration(&self, state: &JointState, tau: Vec2) -> Result<Vec2>;
}

impl Plant for RobotParams {
    #[inline]
    fn acceleration(&self, state: &JointState, tau: Vec2) -> Result<Vec2> {
        forward_dynamics(self, state, tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Simulated horizon (s).
    pub t_final: f64,
    /// Initial joint angles (rad).
    pub q0: Vec2,
    /// Setpoint joint angles (rad).
    pub qd: Vec2,
    /// Initial joint velocities (rad/s).
    pub qdot0: Vec2,
    /// Abort once any |q| or |q̇| exceeds this.
    pub blowup_limit: f64,
    /// Optional symmetric torque clamp (N·m).
    pub torque_limit: Option<f64>,
    /// Record every `record_stride`-th step.
    pub record_stride: usize,
    /// Settling band as a fraction of the initial error magnitude.
    pub settling_band: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_final: 10.0,
            q0: [PI, FRAC_PI_2],
            qd: [FRAC_PI_2, PI],
            qdot0: [0.0, 0.0],
            blowup_limit: 1e3,
            torque_limit: None,
            record_stride: 1,
            settling_band: 0.02,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::validation(format!("sim.{field}"), reason));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt", format!("must be finite and > 0 (got {})", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return bad(
                "t_final",
                format!("must be finite and >= dt (got {})", self.t_final),
            );
        }
        if !(self.blowup_limit.is_finite() && self.blowup_limit > 0.0) {
            return bad(
                "blowup_limit",
                format!("must be finite and > 0 (got {})", self.blowup_limit),
            );
        }
        if let Some(l) = self.torque_limit {
            if !(l.is_finite() && l > 0.0) {
                return bad("torque_limit", format!("must be finite and > 0 (got {l})"));
            }
        }
        if self.record_stride == 0 {
            return bad("record_stride", "must be >= 1".into());
        }
        if !(self.settling_band > 0.0 && self.settling_band < 1.0) {
            return bad(
                "settling_band",
                format!("must lie in (0, 1) (got {})", self.settling_band),
            );
        }
        for (field, v) in [("q0", self.q0), ("qd", self.qd), ("qdot0", self.qdot0)] {
            if !v.iter().all(|x| x.is_finite()) {
                return bad(field, "must be finite".into());
            }
        }
        Ok(())
    }

    /// Number of integration steps covering the horizon.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Upper bound on the cost of any run that stays inside `blowup_limit`.
    pub fn ise_bound(&self) -> f64 {
        let e_max = self.blowup_limit + self.qd[0].abs().max(self.qd[1].abs());
        2.0 * e_max * e_max * self.t_final
    }

    /// Cost reported for a diverged run; strictly above [`Self::ise_bound`].
    pub fn divergence_penalty(&self) -> f64 {
        2.0 * self.ise_bound()
    }

    pub fn initial_state(&self) -> AugmentedState {
        AugmentedState {
            joints: JointState::new(self.q0, self.qdot0),
            integral: [0.0, 0.0],
            cost: 0.0,
        }
    }
}

/// Joint state plus the controller integral and the accumulated cost.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AugmentedState {
    pub joints: JointState,
    pub integral: Vec2,
    pub cost: f64,
}

impl AugmentedState {
    fn to_array(self) -> [f64; 7] {
        let JointState { q, qdot } = self.joints;
        [
            q[0],
            q[1],
            qdot[0],
            qdot[1],
            self.integral[0],
            self.integral[1],
            self.cost,
        ]
    }

    fn from_array(x: [f64; 7]) -> Self {
        AugmentedState {
            joints: JointState::new([x[0], x[1]], [x[2], x[3]]),
            integral: [x[4], x[5]],
            cost: x[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Torque the controller applies in `state` (after clamping).
#[inline]
pub fn control_torque(gains: &PidGains, cfg: &SimConfig, state: &AugmentedState) -> Vec2 {
    let (e, edot) = error_signals(cfg.qd, &state.joints);
    let tau = pid_torque(
        gains,
        &PidState {
            integral: state.integral,
        },
        e,
        edot,
    );
    saturate(tau, cfg.torque_limit)
}

fn derivative<P: Plant + ?Sized>(
    plant: &P,
    gains: &PidGains,
    cfg: &SimConfig,
    x: [f64; 7],
) -> Result<[f64; 7]> {
    let state = AugmentedState::from_array(x);
    let (e, _) = error_signals(cfg.qd, &state.joints);
    let tau = control_torque(gains, cfg, &state);
    let acc = plant
        .acceleration(&state.joints, tau)
        .map_err(|_| Error::NonFiniteState)?;
    let d = [x[2], x[3], acc[0], acc[1], e[0], e[1], e[0] * e[0] + e[1] * e[1]];
    if d.iter().all(|v| v.is_finite()) {
        Ok(d)
    } else {
        Err(Error::NonFiniteState)
    }
}

#[inline]
fn axpy(x: &[f64; 7], h: f64, k: &[f64; 7]) -> [f64; 7] {
    std::array::from_fn(|i| x[i] + h * k[i])
}

/// One classical RK4 step of the closed-loop augmented system.
pub fn rk4_step<P: Plant + ?Sized>(
    plant: &P,
    gains: &PidGains,
    cfg: &SimConfig,
    state: &AugmentedState,
    dt: f64,
) -> Result<AugmentedState> {
    let x = state.to_array();
    let k1 = derivative(plant, gains, cfg, x)?;
    let k2 = derivative(plant, gains, cfg, axpy(&x, 0.5 * dt, &k1))?;
    let k3 = derivative(plant, gains, cfg, axpy(&x, 0.5 * dt, &k2))?;
    let k4 = derivative(plant, gains, cfg, axpy(&x, dt, &k3))?;
    let next = std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    Ok(AugmentedState::from_array(next))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: Vec2,
    pub qdot: Vec2,
    pub e: Vec2,
    pub tau: Vec2,
}

/// Step-response quality per joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Peak excursion past the setpoint, percent of the commanded step.
    pub overshoot_pct: Vec2,
    /// Time after which |e| stays inside the settling band; `None` if the
    /// error is still outside the band at the end of the horizon.
    pub settling_time: [Option<f64>; 2],
    /// Mean |e| over the last 10% of the horizon (rad).
    pub steady_state_error: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub samples: Vec<Sample>,
    /// Integral of squared tracking error, or the divergence penalty.
    pub ise: f64,
    pub diverged: bool,
    /// `None` when the run diverged.
    pub metrics: Option<Metrics>,
}

struct MetricTracker {
    step: Vec2,
    band: Vec2,
    qd: Vec2,
    peak_excursion: Vec2,
    last_outside: [Option<usize>; 2],
    tail_start: usize,
    tail_sum: Vec2,
    tail_count: usize,
}

impl MetricTracker {
    fn new(cfg: &SimConfig, n: usize) -> Self {
        let step = [cfg.qd[0] - cfg.q0[0], cfg.qd[1] - cfg.q0[1]];
        MetricTracker {
            step,
            band: [
                cfg.settling_band * step[0].abs(),
                cfg.settling_band * step[1].abs(),
            ],
            qd: cfg.qd,
            peak_excursion: [0.0, 0.0],
            last_outside: [None, None],
            tail_start: n - (n / 10).max(1).min(n),
            tail_sum: [0.0, 0.0],
            tail_count: 0,
        }
    }

    #[allow(clippy::needless_range_loop)]
    fn observe(&mut self, i: usize, q: Vec2) {
        let in_tail = i >= self.tail_start;
        for j in 0..2 {
            let e = self.qd[j] - q[j];
            if self.step[j] != 0.0 {
                let past = (q[j] - self.qd[j]) * self.step[j].signum();
                self.peak_excursion[j] = self.peak_excursion[j].max(past);
            }
            if e.abs() > self.band[j] {
                self.last_outside[j] = Some(i);
            }
            if in_tail {
                self.tail_sum[j] += e.abs();
            }
        }
        if in_tail {
            self.tail_count += 1;
        }
    }

    fn finish(&self, n: usize, dt: f64) -> Metrics {
        let overshoot = |j: usize| {
            if self.step[j] == 0.0 {
                0.0
            } else {
                100.0 * self.peak_excursion[j] / self.step[j].abs()
            }
        };
        let settling = |j: usize| match self.last_outside[j] {
            None => Some(0.0),
            Some(i) if i >= n => None,
            Some(i) => Some((i + 1) as f64 * dt),
        };
        let count = self.tail_count.max(1) as f64;
        Metrics {
            overshoot_pct: [overshoot(0), overshoot(1)],
            settling_time: [settling(0), settling(1)],
            steady_state_error: [self.tail_sum[0] / count, self.tail_sum[1] / count],
        }
    }
}

fn exceeds(state: &AugmentedState, limit: f64) -> bool {
    let JointState { q, qdot } = state.joints;
    !state.is_finite() || q.iter().chain(&qdot).any(|v| v.abs() > limit)
}

/// Closed-loop run of the two-link arm.
pub fn simulate(p: &RobotParams, gains: &PidGains, cfg: &SimConfig) -> Result<SimResult> {
    p.validate()?;
    simulate_plant(p, gains, cfg)
}

/// Closed-loop run against an arbitrary plant.
pub fn simulate_plant<P: Plant + ?Sized>(plant: &P, gains: &PidGains, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate().map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let n = cfg.steps();
    let mut state = cfg.initial_state();
    let mut tracker = MetricTracker::new(cfg, n);
    let mut samples = Vec::with_capacity(n / cfg.record_stride + 1);

    let record = |samples: &mut Vec<Sample>, i: usize, s: &AugmentedState| {
        let (e, _) = error_signals(cfg.qd, &s.joints);
        samples.push(Sample {
            t: i as f64 * cfg.dt,
            q: s.joints.q,
            qdot: s.joints.qdot,
            e,
            tau: control_torque(gains, cfg, s),
        });
    };

    let diverged = |samples: Vec<Sample>| SimResult {
        samples,
        ise: cfg.divergence_penalty(),
        diverged: true,
        metrics: None,
    };

    if exceeds(&state, cfg.blowup_limit) {
        return Ok(diverged(samples));
    }
    tracker.observe(0, state.joints.q);
    record(&mut samples, 0, &state);

    for i in 1..=n {
        state = match rk4_step(plant, gains, cfg, &state, cfg.dt) {
            Ok(s) if !exceeds(&s, cfg.blowup_limit) => s,
            _ => return Ok(diverged(samples)),
        };
        tracker.observe(i, state.joints.q);
        if i % cfg.record_stride == 0 {
            record(&mut samples, i, &state);
        }
    }

    Ok(SimResult {
        samples,
        ise: state.cost,
        diverged: false,
        metrics: Some(tracker.finish(n, cfg.dt)),
    })
}
