//! Exit criteria for the tuner. Runs as a plain binary so every criterion
//! prints a PASS/FAIL line; exits non-zero if any criterion fails.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use armtune::dynamics::{
    coriolis_vector, forward_dynamics, friction, gravity_vector, mass_matrix, total_energy,
};
use armtune::ga::{fitness, tournament, Chromosome};
use armtune::simulate::rk4_step;
use armtune::{run_ga, simulate, GaConfig, JointState, PidGains, RobotParams, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Option<Duration>, body: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    match (out, limit) {
        (Ok(d), Some(l)) if elapsed > l => Err(format!("{d}; runtime {elapsed:.2?} > {l:?}")),
        (Ok(d), _) => Ok(format!("{d}; runtime {elapsed:.2?}")),
        (Err(d), _) => Err(format!("{d}; runtime {elapsed:.2?}")),
    }
}

fn dynamics_residual() -> Outcome {
    let p = RobotParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let q = [rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
        let qdot = [rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)];
        let tau = [rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0)];
        let s = JointState::new(q, qdot);
        let acc = forward_dynamics(&p, &s, tau).map_err(|e| e.to_string())?;
        let ma = mass_matrix(&p, q).mul_vec(acc);
        let (c, g, f) = (coriolis_vector(&p, &s), gravity_vector(&p, q), friction(&p, qdot));
        let r0 = ma[0] + c[0] + g[0] + f[0] - tau[0];
        let r1 = ma[1] + c[1] + g[1] + f[1] - tau[1];
        worst = worst.max(r0.hypot(r1));
    }
    check(worst <= 1e-10, format!("max residual {worst:e} (limit 1e-10)"))
}

fn free_swing_cfg(dt: f64, t_final: f64) -> SimConfig {
    SimConfig {
        dt,
        t_final,
        q0: [FRAC_PI_4, 0.0],
        qd: [0.0, 0.0],
        ..SimConfig::default()
    }
}

fn energy_conservation() -> Outcome {
    let p = RobotParams::default();
    let cfg = free_swing_cfg(1e-3, 5.0);
    let r = simulate(&p, &PidGains::default(), &cfg).map_err(|e| e.to_string())?;
    let energy = |i: usize| {
        let s = &r.samples[i];
        total_energy(&p, &JointState::new(s.q, s.qdot))
    };
    let e0 = energy(0);
    let drift = (energy(r.samples.len() - 1) - e0).abs() / e0.abs();
    check(drift <= 1e-6, format!("relative drift {drift:e} (limit 1e-6)"))
}

fn free_swing_end(dt: f64) -> [f64; 4] {
    let p = RobotParams::default();
    let cfg = free_swing_cfg(dt, 1.0);
    let mut s = cfg.initial_state();
    for _ in 0..cfg.steps() {
        s = rk4_step(&p, &PidGains::default(), &cfg, &s, dt).expect("finite free swing");
    }
    [s.joints.q[0], s.joints.q[1], s.joints.qdot[0], s.joints.qdot[1]]
}

fn integrator_order() -> Outcome {
    let reference = free_swing_end(1e-6);
    let err = |x: [f64; 4]| {
        x.iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let coarse = err(free_swing_end(1e-3));
    let fine = err(free_swing_end(5e-4));
    let ratio = coarse / fine;
    check(
        (12.0..=20.0).contains(&ratio),
        format!("errors {coarse:e} / {fine:e}, ratio {ratio:.3} (want [12, 20])"),
    )
}

fn paper_ordering() -> Outcome {
    let p = RobotParams::default();
    let cfg = SimConfig::default();
    let base = simulate(&p, &PidGains::BASELINE, &cfg).map_err(|e| e.to_string())?;
    let tuned = simulate(&p, &PidGains::PUBLISHED_GA, &cfg).map_err(|e| e.to_string())?;
    let (bm, tm) = match (base.metrics, tuned.metrics) {
        (Some(b), Some(t)) => (b, t),
        _ => return Err("a controller diverged".into()),
    };
    let settle = |t: Option<f64>| t.unwrap_or(f64::INFINITY);
    let settling_ok = (0..2).all(|j| settle(tm.settling_time[j]) <= settle(bm.settling_time[j]));
    check(
        tuned.ise < base.ise && settling_ok,
        format!(
            "ISE {:.6} (ga) vs {:.6} (baseline); settling {:?} vs {:?}",
            tuned.ise, base.ise, tm.settling_time, bm.settling_time
        ),
    )
}

fn ga_end_to_end() -> Outcome {
    let p = RobotParams::default();
    let sim = SimConfig::default();
    let ga = GaConfig::default();
    let report = run_ga(&ga, &p, &sim).map_err(|e| e.to_string())?;
    let baseline = fitness(
        &Chromosome::new(PidGains::BASELINE.genes()),
        &p,
        &sim,
        ga.penalty(&sim),
    )
    .map_err(|e| e.to_string())?;
    let best = report.best.fitness.unwrap_or(f64::INFINITY);
    let monotone = report.history.windows(2).all(|w| w[1].best <= w[0].best);
    check(
        report.generations_run <= 1000
            && best <= baseline
            && monotone
            && report.history.len() == report.generations_run,
        format!(
            "seed {} stopped by {} after {} generations; best {:.6} vs baseline {:.6}; monotone history {}",
            ga.seed, report.terminated_by, report.generations_run, best, baseline, monotone
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_armtune"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn armtune");
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn tune_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fs::write(dir.path().join("exp.toml"), "[ga]\nparallel = true\n").map_err(|e| e.to_string())?;
    for out in ["a", "b"] {
        let (code, text) = run_cli(
            dir.path(),
            &["tune", "--config", "exp.toml", "--seed", "7", "--out", out],
        );
        if code != 0 {
            return Err(format!("tune exited {code}: {text}"));
        }
    }
    let same = |name: &str| {
        fs::read(dir.path().join("a").join(name)).ok() == fs::read(dir.path().join("b").join(name)).ok()
    };
    check(
        same("best_gains") && same("ga_history.csv"),
        format!(
            "best_gains identical {}, ga_history.csv identical {}",
            same("best_gains"),
            same("ga_history.csv")
        ),
    )
}

fn selection_statistics() -> Outcome {
    let pop: Vec<Chromosome> = [1.0, 2.0, 3.0, 4.0]
        .iter()
        .map(|&f| Chromosome {
            genes: [f; 6],
            fitness: Some(f),
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 10_000;
    let wins = (0..n).filter(|_| tournament(&pop, &mut rng) == 0).count();
    let freq = wins as f64 / n as f64;
    check(
        (freq - 7.0 / 16.0).abs() <= 0.02,
        format!("best selected {freq:.4} of draws (want 0.4375 ± 0.02)"),
    )
}

fn cli_contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (code, text) = run_cli(dir.path(), &["compare", "--out", "default"]);
    let report = fs::read_to_string(dir.path().join("default/comparison.txt")).unwrap_or_default();
    let ga_wins = report.lines().any(|l| l == "ise_winner = ga-tuned");
    if code != 0 || !ga_wins {
        return Err(format!(
            "default compare exited {code}, ga-tuned ISE winner {ga_wins}: {text}"
        ));
    }
    let (code_same, _) = run_cli(dir.path(), &["compare", "--out", "same", "--gains", "baseline"]);
    check(
        code_same == 3,
        format!("default compare exit 0 with ga-tuned ISE winner; baseline-vs-baseline exit {code_same}"),
    )
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (
            "1 dynamics residual",
            Box::new(|| timed(Some(Duration::from_secs(1)), dynamics_residual)),
        ),
        (
            "2 energy conservation",
            Box::new(|| timed(Some(Duration::from_secs(1)), energy_conservation)),
        ),
        ("3 integrator order", Box::new(|| timed(None, integrator_order))),
        (
            "4 paper ordering",
            Box::new(|| timed(Some(Duration::from_secs(5)), paper_ordering)),
        ),
        (
            "5 GA end-to-end",
            Box::new(|| timed(Some(Duration::from_secs(600)), ga_end_to_end)),
        ),
        ("6 tune determinism", Box::new(|| timed(None, tune_determinism))),
        (
            "7 selection statistics",
            Box::new(|| timed(None, selection_statistics)),
        ),
        ("8 CLI contract", Box::new(|| timed(None, cli_contract))),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
