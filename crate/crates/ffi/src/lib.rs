//! C ABI over the `armtune` simulator and tuner.
//!
//! Experiments and simulation results are opaque handles created and freed
//! by this library. Every fallible call returns an [`ArmtuneStatus`]; on
//! failure, [`armtune_last_error`] describes the most recent error on the
//! calling thread. Gains are passed as six doubles ordered
//! `kp1, ki1, kd1, kp2, ki2, kd2`.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use armtune::dynamics::{forward_dynamics, JointState};
use armtune::{load_config, run_ga, simulate, Error, ExperimentConfig, PidGains, SimResult};
use libc::c_char;

/// Number of doubles per trajectory row: `t, q1, q2, qd1, qd2, e1, e2, tau1, tau2`.
pub const ARMTUNE_TRAJECTORY_COLUMNS: usize = 9;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmtuneStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Simulation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Per-joint step-response metrics. Unsettled joints report NaN settling time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ArmtuneMetrics {
    pub overshoot_pct: [f64; 2],
    pub settling_time: [f64; 2],
    pub steady_state_error: [f64; 2],
}

/// Opaque experiment configuration.
pub struct ArmtuneExperiment {
    cfg: ExperimentConfig,
}

/// Opaque result of one closed-loop simulation.
pub struct ArmtuneSimulation {
    result: SimResult,
    qd: [f64; 2],
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> ArmtuneStatus {
    match e {
        Error::Io { .. } => ArmtuneStatus::Io,
        Error::Parse { .. } | Error::Validation { .. } | Error::InvalidConfig(_) => ArmtuneStatus::Config,
        Error::NonFiniteInput(_) | Error::NonFiniteState => ArmtuneStatus::Simulation,
    }
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), (ArmtuneStatus, String)>) -> ArmtuneStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ArmtuneStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ArmtuneStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (ArmtuneStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (ArmtuneStatus, String) {
    (ArmtuneStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn read_gains(gains: *const f64) -> Result<PidGains, (ArmtuneStatus, String)> {
    if gains.is_null() {
        return Err(null("gains"));
    }
    let mut genes = [0.0; 6];
    ptr::copy_nonoverlapping(gains, genes.as_mut_ptr(), 6);
    let g = PidGains::from_genes(genes);
    g.validate("gains")
        .map_err(|e| (ArmtuneStatus::InvalidArgument, e.to_string()))?;
    Ok(g)
}

unsafe fn experiment<'a>(
    exp: *const ArmtuneExperiment,
) -> Result<&'a ArmtuneExperiment, (ArmtuneStatus, String)> {
    exp.as_ref().ok_or_else(|| null("experiment"))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn armtune_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New experiment with the default two-link configuration. Free with
/// [`armtune_experiment_free`].
#[no_mangle]
pub extern "C" fn armtune_experiment_new_default() -> *mut ArmtuneExperiment {
    Box::into_raw(Box::new(ArmtuneExperiment {
        cfg: ExperimentConfig::default(),
    }))
}

/// Loads a TOML experiment configuration.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn armtune_experiment_load(
    path: *const c_char,
    out: *mut *mut ArmtuneExperiment,
) -> ArmtuneStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (ArmtuneStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let cfg = load_config(path).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(ArmtuneExperiment { cfg }));
        Ok(())
    })
}

/// # Safety
/// `exp` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn armtune_experiment_free(exp: *mut ArmtuneExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn armtune_experiment_set_seed(
    exp: *mut ArmtuneExperiment,
    seed: u64,
) -> ArmtuneStatus {
    guard(|| {
        exp.as_mut().ok_or_else(|| null("experiment"))?.cfg.ga.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn armtune_experiment_set_max_generations(
    exp: *mut ArmtuneExperiment,
    max_generations: usize,
) -> ArmtuneStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(|| null("experiment"))?;
        let mut ga = exp.cfg.ga.clone();
        ga.max_generations = max_generations;
        ga.validate(&exp.cfg.sim).map_err(lib_err)?;
        exp.cfg.ga = ga;
        Ok(())
    })
}

/// Sets the integration step and horizon (seconds).
///
/// # Safety
/// `exp` must be a live experiment handle.
#[no_mangle]
pub unsafe extern "C" fn armtune_experiment_set_horizon(
    exp: *mut ArmtuneExperiment,
    dt: f64,
    t_final: f64,
) -> ArmtuneStatus {
    guard(|| {
        let exp = exp.as_mut().ok_or_else(|| null("experiment"))?;
        let mut sim = exp.cfg.sim.clone();
        sim.dt = dt;
        sim.t_final = t_final;
        sim.validate().map_err(lib_err)?;
        exp.cfg.sim = sim;
        Ok(())
    })
}

/// Copies the configured baseline gains into `out_gains[0..6]`.
///
/// # Safety
/// `exp` must be a live handle; `out_gains` must hold six doubles.
#[no_mangle]
pub unsafe extern "C" fn armtune_experiment_baseline_gains(
    exp: *const ArmtuneExperiment,
    out_gains: *mut f64,
) -> ArmtuneStatus {
    guard(|| {
        let exp = experiment(exp)?;
        if out_gains.is_null() {
            return Err(null("out_gains"));
        }
        let genes = exp.cfg.baseline_gains.genes();
        ptr::copy_nonoverlapping(genes.as_ptr(), out_gains, 6);
        Ok(())
    })
}

/// Joint accelerations of the experiment's arm for the given state and torque.
///
/// # Safety
/// `exp` must be a live handle; `q`, `qdot`, `tau` must each point to two
/// doubles and `out_acc` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn armtune_forward_dynamics(
    exp: *const ArmtuneExperiment,
    q: *const f64,
    qdot: *const f64,
    tau: *const f64,
    out_acc: *mut f64,
) -> ArmtuneStatus {
    guard(|| {
        let exp = experiment(exp)?;
        if q.is_null() || qdot.is_null() || tau.is_null() || out_acc.is_null() {
            return Err(null("q/qdot/tau/out_acc"));
        }
        let pair = |p: *const f64| [*p, *p.add(1)];
        let s = JointState::new(pair(q), pair(qdot));
        let acc = forward_dynamics(&exp.cfg.robot, &s, pair(tau)).map_err(lib_err)?;
        ptr::copy_nonoverlapping(acc.as_ptr(), out_acc, 2);
        Ok(())
    })
}

/// Runs one closed-loop simulation. A diverged run still succeeds; query it
/// with [`armtune_simulation_diverged`].
///
/// # Safety
/// `exp` must be a live handle, `gains` must point to six doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulate(
    exp: *const ArmtuneExperiment,
    gains: *const f64,
    out: *mut *mut ArmtuneSimulation,
) -> ArmtuneStatus {
    guard(|| {
        let exp = experiment(exp)?;
        let gains = read_gains(gains)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let result = simulate(&exp.cfg.robot, &gains, &exp.cfg.sim).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(ArmtuneSimulation {
            result,
            qd: exp.cfg.sim.qd,
        }));
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulation_free(sim: *mut ArmtuneSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Integral of squared error (the divergence penalty for diverged runs);
/// NaN for a NULL handle.
///
/// # Safety
/// `sim` must be NULL or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulation_ise(sim: *const ArmtuneSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.result.ise)
}

/// # Safety
/// `sim` must be NULL or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulation_diverged(sim: *const ArmtuneSimulation) -> bool {
    sim.as_ref().is_some_and(|s| s.result.diverged)
}

/// # Safety
/// `sim` must be NULL or a live simulation handle.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulation_sample_count(sim: *const ArmtuneSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.result.samples.len())
}

/// Copies the recorded trajectory as row-major
/// `sample_count × ARMTUNE_TRAJECTORY_COLUMNS` doubles into `buf`.
///
/// # Safety
/// `sim` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulation_samples(
    sim: *const ArmtuneSimulation,
    buf: *mut f64,
    len: usize,
) -> ArmtuneStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let needed = sim.result.samples.len() * ARMTUNE_TRAJECTORY_COLUMNS;
        if len < needed {
            return Err((
                ArmtuneStatus::BufferTooSmall,
                format!("buffer holds {len} doubles, {needed} needed"),
            ));
        }
        let out = std::slice::from_raw_parts_mut(buf, needed);
        for (row, s) in out
            .chunks_exact_mut(ARMTUNE_TRAJECTORY_COLUMNS)
            .zip(&sim.result.samples)
        {
            row.copy_from_slice(&[
                s.t, s.q[0], s.q[1], sim.qd[0], sim.qd[1], s.e[0], s.e[1], s.tau[0], s.tau[1],
            ]);
        }
        Ok(())
    })
}

/// Step-response metrics; fails with `SIMULATION` for a diverged run.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn armtune_simulation_metrics(
    sim: *const ArmtuneSimulation,
    out: *mut ArmtuneMetrics,
) -> ArmtuneStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| null("simulation"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = sim
            .result
            .metrics
            .ok_or_else(|| (ArmtuneStatus::Simulation, "simulation diverged".to_string()))?;
        *out = ArmtuneMetrics {
            overshoot_pct: m.overshoot_pct,
            settling_time: m.settling_time.map(|t| t.unwrap_or(f64::NAN)),
            steady_state_error: m.steady_state_error,
        };
        Ok(())
    })
}

/// Runs the genetic algorithm. Writes the best gains (six doubles), its
/// fitness and the number of generations run. `out_fitness` and
/// `out_generations` may be NULL.
///
/// # Safety
/// `exp` must be a live handle and `out_gains` must hold six doubles.
#[no_mangle]
pub unsafe extern "C" fn armtune_tune(
    exp: *const ArmtuneExperiment,
    out_gains: *mut f64,
    out_fitness: *mut f64,
    out_generations: *mut usize,
) -> ArmtuneStatus {
    guard(|| {
        let exp = experiment(exp)?;
        if out_gains.is_null() {
            return Err(null("out_gains"));
        }
        let report = run_ga(&exp.cfg.ga, &exp.cfg.robot, &exp.cfg.sim).map_err(lib_err)?;
        ptr::copy_nonoverlapping(report.best.genes.as_ptr(), out_gains, 6);
        if let Some(f) = out_fitness.as_mut() {
            *f = report.best.fitness.unwrap_or(f64::NAN);
        }
        if let Some(g) = out_generations.as_mut() {
            *g = report.generations_run;
        }
        Ok(())
    })
}
