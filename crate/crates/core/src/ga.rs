//! Real-coded genetic algorithm over the six PID gains.
//!
//! Operators: size-2 tournament selection, BLX-α blend crossover, per-gene
//! Gaussian mutation, and (μ + λ) survivor selection. Every random draw of a
//! generation is taken from one seeded stream before that generation's
//! fitness evaluations are dispatched, so parallel evaluation cannot change
//! the result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::PidGains;
use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::simulate::{simulate_plant, Plant, SimConfig};

pub const GENES: usize = 6;

pub type Genes = [f64; GENES];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chromosome {
    /// Ordered `kp1, ki1, kd1, kp2, ki2, kd2`.
    pub genes: Genes,
    /// Cached fitness; `None` until evaluated.
    pub fitness: Option<f64>,
}

impl Chromosome {
    pub fn new(genes: Genes) -> Self {
        Chromosome { genes, fitness: None }
    }

    pub fn gains(&self) -> PidGains {
        PidGains::from_genes(self.genes)
    }

    fn score(&self) -> f64 {
        self.fitness.expect("chromosome evaluated before ranking")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_generations: usize,
    /// Probability that a parent pair is recombined.
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Lower gene bounds, in gene order.
    pub lower: Genes,
    /// Upper gene bounds, in gene order.
    pub upper: Genes,
    /// Survivors carried over unconditionally; offspring per generation is
    /// `pop_size - elite_count`.
    pub elite_count: usize,
    pub seed: u64,
    /// Stop once best fitness improved by less than `stall_tolerance`
    /// (relative) over this many generations.
    pub stall_generations: usize,
    pub stall_tolerance: f64,
    /// Fitness of a diverged simulation. Defaults to the simulator's
    /// divergence penalty.
    pub penalty_fitness: Option<f64>,
    /// BLX-α expansion factor.
    pub blx_alpha: f64,
    /// Mutation step as a fraction of each gene's range.
    pub mutation_scale: f64,
    /// Evaluate fitness on the rayon pool.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            pop_size: 20,
            max_generations: 1000,
            crossover_rate: 0.6,
            mutation_rate: 0.4,
            lower: [0.0; GENES],
            upper: [150.0; GENES],
            elite_count: 1,
            seed: 0x5eed,
            stall_generations: 25,
            stall_tolerance: 1e-6,
            penalty_fitness: None,
            blx_alpha: 0.5,
            mutation_scale: 0.05,
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self, sim: &SimConfig) -> Result<()> {
        let bad = |field: &str, reason: String| Err(Error::validation(format!("ga.{field}"), reason));
        if self.pop_size < 2 {
            return bad("pop_size", format!("must be >= 2 (got {})", self.pop_size));
        }
        if self.max_generations == 0 {
            return bad("max_generations", "must be >= 1".into());
        }
        for (field, v) in [
            ("crossover_rate", self.crossover_rate),
            ("mutation_rate", self.mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, format!("must lie in [0, 1] (got {v})"));
            }
        }
        for i in 0..GENES {
            let (lo, hi) = (self.lower[i], self.upper[i]);
            if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
                return bad(
                    "lower/upper",
                    format!(
                        "gene {} needs finite 0 <= lower < upper (got [{lo}, {hi}])",
                        PidGains::LABELS[i]
                    ),
                );
            }
        }
        if self.elite_count >= self.pop_size {
            return bad(
                "elite_count",
                format!("must be < pop_size (got {})", self.elite_count),
            );
        }
        if !(self.stall_tolerance.is_finite() && self.stall_tolerance >= 0.0) {
            return bad(
                "stall_tolerance",
                format!("must be finite and >= 0 (got {})", self.stall_tolerance),
            );
        }
        if let Some(pen) = self.penalty_fitness {
            if !(pen.is_finite() && pen > sim.ise_bound()) {
                return bad(
                    "penalty_fitness",
                    format!(
                        "must exceed the largest achievable ISE {} (got {pen})",
                        sim.ise_bound()
                    ),
                );
            }
        }
        if !(self.blx_alpha.is_finite() && self.blx_alpha >= 0.0) {
            return bad(
                "blx_alpha",
                format!("must be finite and >= 0 (got {})", self.blx_alpha),
            );
        }
        if !(self.mutation_scale.is_finite() && self.mutation_scale >= 0.0) {
            return bad(
                "mutation_scale",
                format!("must be finite and >= 0 (got {})", self.mutation_scale),
            );
        }
        Ok(())
    }

    pub fn penalty(&self, sim: &SimConfig) -> f64 {
        self.penalty_fitness.unwrap_or_else(|| sim.divergence_penalty())
    }

    fn clamp(&self, i: usize, v: f64) -> f64 {
        v.clamp(self.lower[i], self.upper[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxGenerations,
    Stall,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::MaxGenerations => "max_generations",
            Termination::Stall => "stall",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub best: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaReport {
    pub best: Chromosome,
    pub generations_run: usize,
    pub history: Vec<GenerationStats>,
    pub terminated_by: Termination,
}

/// ISE of the closed loop driven by `c`'s gains; `penalty` if it diverged.
pub fn fitness<P: Plant + ?Sized>(c: &Chromosome, plant: &P, sim: &SimConfig, penalty: f64) -> Result<f64> {
    let r = simulate_plant(plant, &c.gains(), sim)?;
    Ok(if r.diverged { penalty } else { r.ise })
}

pub fn init_population<R: Rng + ?Sized>(cfg: &GaConfig, rng: &mut R) -> Vec<Chromosome> {
    (0..cfg.pop_size)
        .map(|_| {
            Chromosome::new(std::array::from_fn(|i| {
                let (lo, hi) = (cfg.lower[i], cfg.upper[i]);
                lo + (hi - lo) * rng.random::<f64>()
            }))
        })
        .collect()
}

/// Index of the winner of one size-2 tournament drawn with replacement.
/// Lower fitness wins; ties go to the lower index.
pub fn tournament<R: Rng + ?Sized>(pop: &[Chromosome], rng: &mut R) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    let (fa, fb) = (pop[a].score(), pop[b].score());
    match fa.total_cmp(&fb) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => a.min(b),
    }
}

/// Two parents from independent tournaments.
pub fn select_parents<R: Rng + ?Sized>(pop: &[Chromosome], rng: &mut R) -> (usize, usize) {
    (tournament(pop, rng), tournament(pop, rng))
}

/// BLX-α crossover applied to the whole chromosome with probability `rate`.
pub fn crossover<R: Rng + ?Sized>(
    a: &Chromosome,
    b: &Chromosome,
    rate: f64,
    cfg: &GaConfig,
    rng: &mut R,
) -> (Chromosome, Chromosome) {
    if rng.random::<f64>() >= rate {
        return (Chromosome::new(a.genes), Chromosome::new(b.genes));
    }
    let mut c1 = [0.0; GENES];
    let mut c2 = [0.0; GENES];
    for i in 0..GENES {
        let (x, y) = (a.genes[i], b.genes[i]);
        let spread = cfg.blx_alpha * (x - y).abs();
        let lo = x.min(y) - spread;
        let hi = x.max(y) + spread;
        c1[i] = cfg.clamp(i, lo + (hi - lo) * rng.random::<f64>());
        c2[i] = cfg.clamp(i, lo + (hi - lo) * rng.random::<f64>());
    }
    (Chromosome::new(c1), Chromosome::new(c2))
}

/// Gaussian perturbation of each gene with probability `rate`.
pub fn mutate<R: Rng + ?Sized>(c: &Chromosome, rate: f64, cfg: &GaConfig, rng: &mut R) -> Chromosome {
    let mut genes = c.genes;
    for (i, g) in genes.iter_mut().enumerate() {
        if rng.random::<f64>() < rate {
            let sigma = cfg.mutation_scale * (cfg.upper[i] - cfg.lower[i]);
            let z: f64 = rng.sample(StandardNormal);
            *g = cfg.clamp(i, *g + sigma * z);
        }
    }
    Chromosome::new(genes)
}

fn evaluate<P: Plant + Sync + ?Sized>(
    pop: &mut [Chromosome],
    plant: &P,
    sim: &SimConfig,
    penalty: f64,
    parallel: bool,
) -> Result<()> {
    let eval = |c: &mut Chromosome| -> Result<()> {
        if c.fitness.is_none() {
            c.fitness = Some(fitness(c, plant, sim, penalty)?);
        }
        Ok(())
    };
    if parallel {
        pop.par_iter_mut().try_for_each(eval)
    } else {
        pop.iter_mut().try_for_each(eval)
    }
}

fn stats(pop: &[Chromosome]) -> GenerationStats {
    let best = pop.iter().map(Chromosome::score).fold(f64::INFINITY, f64::min);
    let mean = pop.iter().map(Chromosome::score).sum::<f64>() / pop.len() as f64;
    GenerationStats { best, mean }
}

fn stalled(history: &[GenerationStats], window: usize, tol: f64) -> bool {
    if window == 0 || history.len() <= window {
        return false;
    }
    let before = history[history.len() - 1 - window].best;
    let now = history[history.len() - 1].best;
    (before - now) <= tol * before.abs()
}

/// Breeds `count` offspring from `pop`. Consumes all of the generation's
/// random draws.
fn breed<R: Rng + ?Sized>(pop: &[Chromosome], count: usize, cfg: &GaConfig, rng: &mut R) -> Vec<Chromosome> {
    let mut offspring = Vec::with_capacity(count + 1);
    while offspring.len() < count {
        let (i, j) = select_parents(pop, rng);
        let (c1, c2) = crossover(&pop[i], &pop[j], cfg.crossover_rate, cfg, rng);
        offspring.push(mutate(&c1, cfg.mutation_rate, cfg, rng));
        offspring.push(mutate(&c2, cfg.mutation_rate, cfg, rng));
    }
    offspring.truncate(count);
    offspring
}

/// Tunes the PID gains of the two-link arm.
pub fn run_ga(cfg: &GaConfig, p: &RobotParams, sim: &SimConfig) -> Result<GaReport> {
    p.validate()?;
    run_ga_plant(cfg, p, sim)
}

/// Tunes PID gains against an arbitrary plant.
pub fn run_ga_plant<P: Plant + Sync + ?Sized>(
    cfg: &GaConfig,
    plant: &P,
    sim: &SimConfig,
) -> Result<GaReport> {
    sim.validate()?;
    cfg.validate(sim)?;
    let penalty = cfg.penalty(sim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut pop = init_population(cfg, &mut rng);
    evaluate(&mut pop, plant, sim, penalty, cfg.parallel)?;
    rank(&mut pop);
    let mut history = vec![stats(&pop)];

    let terminated_by = loop {
        if history.len() >= cfg.max_generations {
            break Termination::MaxGenerations;
        }
        if stalled(&history, cfg.stall_generations, cfg.stall_tolerance) {
            break Termination::Stall;
        }
        let mut offspring = breed(&pop, cfg.pop_size - cfg.elite_count, cfg, &mut rng);
        evaluate(&mut offspring, plant, sim, penalty, cfg.parallel)?;
        pop.extend(offspring);
        rank(&mut pop);
        pop.truncate(cfg.pop_size);
        history.push(stats(&pop));
    };

    Ok(GaReport {
        best: pop[0],
        generations_run: history.len(),
        history,
        terminated_by,
    })
}

/// Stable sort by fitness: parents precede equally fit offspring.
fn rank(pop: &mut [Chromosome]) {
    pop.sort_by(|a, b| a.score().total_cmp(&b.score()));
}

#[cfg(test)]
mod tests {
    use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};
    use rand::Rng;

    use super::*;
    use crate::dynamics::{JointState, Vec2};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn evaluated(fits: &[f64]) -> Vec<Chromosome> {
        fits.iter()
            .map(|&f| Chromosome {
                genes: [f; GENES],
                fitness: Some(f),
            })
            .collect()
    }

    /// Joints never move, so the error stays at its initial value.
    struct Frozen;

    impl Plant for Frozen {
        fn acceleration(&self, _: &JointState, _: Vec2) -> Result<Vec2> {
            Ok([0.0, 0.0])
        }
    }

    fn short_sim() -> SimConfig {
        SimConfig {
            t_final: 1.0,
            dt: 2e-3,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_error_plant_has_zero_fitness() {
        let sim = SimConfig {
            q0: [0.3, 0.2],
            qd: [0.3, 0.2],
            ..short_sim()
        };
        let c = Chromosome::new(PidGains::BASELINE.genes());
        assert_eq!(fitness(&c, &Frozen, &sim, 1e9).unwrap(), 0.0);
    }

    #[test]
    fn no_control_has_positive_fitness() {
        let c = Chromosome::new([0.0; GENES]);
        let f = fitness(&c, &RobotParams::default(), &SimConfig::default(), 1e12).unwrap();
        assert!(f > 0.0);
    }

    #[test]
    fn population_is_in_bounds_and_reproducible() {
        let cfg = GaConfig::default();
        let pop = init_population(&cfg, &mut rng(7));
        assert_eq!(pop.len(), 20);
        for c in &pop {
            assert!(c.fitness.is_none());
            for i in 0..GENES {
                assert!((cfg.lower[i]..=cfg.upper[i]).contains(&c.genes[i]));
            }
        }
        assert_eq!(pop, init_population(&cfg, &mut rng(7)));
        assert_ne!(pop, init_population(&cfg, &mut rng(8)));
    }

    #[test]
    fn degenerate_bounds_pin_genes() {
        let cfg = GaConfig {
            lower: [42.0; GENES],
            upper: [42.0; GENES],
            ..GaConfig::default()
        };
        for c in init_population(&cfg, &mut rng(1)) {
            assert_eq!(c.genes, [42.0; GENES]);
        }
    }

    #[test]
    fn tournament_prefers_lower_fitness() {
        let pop = evaluated(&[1.0, 5.0]);
        let mut r = rng(3);
        for _ in 0..500 {
            let mut peek = r.clone();
            let a = peek.random_range(0..2usize);
            let b = peek.random_range(0..2usize);
            let expected = if a == 0 || b == 0 { 0 } else { 1 };
            assert_eq!(tournament(&pop, &mut r), expected);
        }
    }

    #[test]
    fn ties_go_to_lower_index() {
        let pop = evaluated(&[2.0, 2.0, 2.0, 2.0]);
        let mut r = rng(11);
        for _ in 0..500 {
            let mut peek = r.clone();
            let a = peek.random_range(0..4usize);
            let b = peek.random_range(0..4usize);
            assert_eq!(tournament(&pop, &mut r), a.min(b));
        }
    }

    #[test]
    fn best_wins_seven_sixteenths() {
        let pop = evaluated(&[1.0, 2.0, 3.0, 4.0]);
        let mut r = rng(2024);
        let n = 10_000;
        let wins = (0..n).filter(|_| tournament(&pop, &mut r) == 0).count();
        let freq = wins as f64 / n as f64;
        assert!((freq - 7.0 / 16.0).abs() <= 0.02, "freq {freq}");
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let cfg = GaConfig::default();
        let a = Chromosome::new([10.0, 20.0, 30.0, 40.0, 50.0, 60.0]);
        let mut r = rng(5);
        for rate in [0.0, 0.6, 1.0] {
            let (c1, c2) = crossover(&a, &a, rate, &cfg, &mut r);
            assert_eq!(c1.genes, a.genes);
            assert_eq!(c2.genes, a.genes);
        }
    }

    #[test]
    fn crossover_rate_zero_copies() {
        let cfg = GaConfig::default();
        let a = Chromosome {
            genes: [1.0; GENES],
            fitness: Some(3.0),
        };
        let b = Chromosome {
            genes: [9.0; GENES],
            fitness: Some(4.0),
        };
        let (c1, c2) = crossover(&a, &b, 0.0, &cfg, &mut rng(9));
        assert_eq!((c1.genes, c2.genes), (a.genes, b.genes));
        assert!(c1.fitness.is_none() && c2.fitness.is_none());
    }

    #[test]
    fn blx_children_are_clamped_to_bounds() {
        let cfg = GaConfig::default();
        let a = Chromosome::new([0.0; GENES]);
        let b = Chromosome::new([100.0; GENES]);
        let mut r = rng(13);
        let mut below_zero_side = 0;
        for _ in 0..2000 {
            let (c1, c2) = crossover(&a, &b, 1.0, &cfg, &mut r);
            for g in c1.genes.iter().chain(&c2.genes) {
                assert!((0.0..=150.0).contains(g));
                if *g == 0.0 {
                    below_zero_side += 1;
                }
            }
        }
        // A quarter of the [-50, 150] interval clamps onto 0.
        assert!(below_zero_side > 0);
    }

    #[test]
    fn mutation_edge_cases() {
        let cfg = GaConfig::default();
        let c = Chromosome::new([150.0, 0.0, 75.0, 150.0, 1.0, 149.0]);
        assert_eq!(mutate(&c, 0.0, &cfg, &mut rng(1)).genes, c.genes);

        let tiny = GaConfig {
            mutation_scale: 1e-15,
            ..GaConfig::default()
        };
        let m = mutate(&c, 1.0, &tiny, &mut rng(1));
        for i in 0..GENES {
            assert!((m.genes[i] - c.genes[i]).abs() < 1e-9);
        }

        let mut r = rng(2);
        for _ in 0..1000 {
            let m = mutate(&c, 1.0, &cfg, &mut r);
            assert!(m.genes[0] <= 150.0 && m.genes[3] <= 150.0);
            assert!(m.genes[1] >= 0.0);
        }
    }

    #[test]
    fn single_generation_returns_better_of_two() {
        let cfg = GaConfig {
            pop_size: 2,
            max_generations: 1,
            ..GaConfig::default()
        };
        let sim = short_sim();
        let p = RobotParams::default();
        let report = run_ga(&cfg, &p, &sim).unwrap();
        assert_eq!(report.history.len(), 1);
        assert_eq!(report.generations_run, 1);
        let pop = init_population(&cfg, &mut rng(cfg.seed));
        let fits: Vec<f64> = pop
            .iter()
            .map(|c| fitness(c, &p, &sim, cfg.penalty(&sim)).unwrap())
            .collect();
        let best = fits.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(report.best.fitness, Some(best));
        assert_eq!(report.terminated_by, Termination::MaxGenerations);
    }

    #[test]
    fn short_run_is_elitist_cached_and_deterministic() {
        let sim = short_sim();
        let p = RobotParams::default();
        let cfg = GaConfig {
            max_generations: 15,
            seed: 99,
            ..GaConfig::default()
        };
        let report = run_ga(&cfg, &p, &sim).unwrap();
        assert!(report.history.windows(2).all(|w| w[1].best <= w[0].best));
        assert_eq!(report.history.last().unwrap().best, report.best.fitness.unwrap());
        let fresh = fitness(&report.best, &p, &sim, cfg.penalty(&sim)).unwrap();
        assert_eq!(fresh, report.best.fitness.unwrap());

        let serial = run_ga(
            &GaConfig {
                parallel: false,
                ..cfg.clone()
            },
            &p,
            &sim,
        )
        .unwrap();
        assert_eq!(report, serial);
    }

    #[test]
    fn diverged_candidates_rank_last() {
        let sim = short_sim();
        let penalty = GaConfig::default().penalty(&sim);
        let mut pop = evaluated(&[3.0, penalty, 0.5, penalty, 2.0]);
        rank(&mut pop);
        let scores: Vec<f64> = pop.iter().map(|c| c.score()).collect();
        assert_eq!(scores, vec![0.5, 2.0, 3.0, penalty, penalty]);
        assert!(penalty > sim.ise_bound());
    }

    #[test]
    fn stall_detection() {
        let h = |v: &[f64]| {
            v.iter()
                .map(|&b| GenerationStats { best: b, mean: b })
                .collect::<Vec<_>>()
        };
        assert!(!stalled(&h(&[5.0, 4.0, 4.0]), 2, 1e-6));
        assert!(stalled(&h(&[5.0, 4.0, 4.0, 4.0]), 2, 1e-6));
        assert!(!stalled(&h(&[5.0, 4.0, 4.0, 3.9]), 2, 1e-6));
    }

    #[test]
    fn config_validation() {
        let sim = SimConfig::default();
        assert!(GaConfig::default().validate(&sim).is_ok());
        let bad = [
            GaConfig {
                pop_size: 1,
                ..GaConfig::default()
            },
            GaConfig {
                crossover_rate: 1.5,
                ..GaConfig::default()
            },
            GaConfig {
                elite_count: 20,
                ..GaConfig::default()
            },
            GaConfig {
                lower: [10.0; GENES],
                upper: [5.0; GENES],
                ..GaConfig::default()
            },
            GaConfig {
                penalty_fitness: Some(1.0),
                ..GaConfig::default()
            },
        ];
        for cfg in bad {
            assert!(
                matches!(cfg.validate(&sim), Err(Error::Validation { .. })),
                "{cfg:?}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn operators_stay_in_bounds(
            a in proptest::array::uniform6(0.0..150.0f64),
            b in proptest::array::uniform6(0.0..150.0f64),
            seed in any::<u64>(),
        ) {
            let cfg = GaConfig::default();
            let mut r = rng(seed);
            let (c1, c2) = crossover(&Chromosome::new(a), &Chromosome::new(b), 1.0, &cfg, &mut r);
            for c in [c1, c2, mutate(&c1, 1.0, &cfg, &mut r), mutate(&c2, 0.4, &cfg, &mut r)] {
                for i in 0..GENES {
                    prop_assert!(c.genes[i] >= cfg.lower[i] && c.genes[i] <= cfg.upper[i]);
                }
            }
        }
    }
}
