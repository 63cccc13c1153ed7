//! The nested genetic algorithm.
//!
//! The outer loop is a fitness-proportional GA over feasible selections.
//! Its starting population comes from the inequality-system QUBO search
//! (plus RF+HC results when seeding is on) and its mutations from the
//! approximate-kernel QUBO search. Each child of crossover is hill-climbed
//! with a super-mutation: the longest chain of strictly improving, feasible
//! mutations. The loop exits when the population fitness spread is zero,
//! when the generation cap is reached, or when a selection covers every
//! instance without conflicts.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::distributions::WeightedIndex;
use rand::Rng as _;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::rf_hc_with_scores;
use crate::problem::{Chromosome, Evaluation, Problem};
use crate::qubo::{
    approximate_kernel, beta_grid, distinct_pair, solve_inequality_system, QuboGa, SubspacePlan, TernaryVector,
};
use crate::rules::Rule;
use crate::{Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    OnePoint,
    TwoPoint,
    #[default]
    Uniform,
}

impl std::str::FromStr for CrossoverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one_point" | "one-point" | "1" => Ok(Self::OnePoint),
            "two_point" | "two-point" | "2" => Ok(Self::TwoPoint),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidArgument(format!("unknown crossover {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QgaConfig {
    pub n_generations: usize,
    pub n_max_population: usize,
    pub crossover: CrossoverKind,
    /// Crossover attempts per pair before infeasible children fall back to their parents.
    pub crossover_retries: usize,
    /// Inject RF+HC trial results into the initial population.
    pub seed_with_rf_hc: bool,
    pub rf_hc_trials: usize,
    pub seed: u64,
    pub inner_ga: QuboGa,
    /// Coordinates per sub-problem of the inequality-system search.
    pub population_subspace: usize,
    pub kernel_subspace: SubspacePlan,
}

impl Default for QgaConfig {
    fn default() -> Self {
        Self {
            n_generations: 100,
            n_max_population: 50,
            crossover: CrossoverKind::Uniform,
            crossover_retries: 50,
            seed_with_rf_hc: true,
            rf_hc_trials: 30,
            seed: 0,
            inner_ga: QuboGa::default(),
            population_subspace: 64,
            kernel_subspace: SubspacePlan { size: 32, draws_factor: 4 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    pub generation: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Number of distinct chromosomes.
    pub diversity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Minimum and maximum fitness coincide.
    Converged,
    GenerationCap,
    /// Every instance covered with no conflict.
    FullCoverage,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub chromosome: Chromosome,
    pub evaluation: Evaluation,
    pub rules: Vec<Rule>,
    /// Row 0 describes the initial population, row `t` the population after generation `t`.
    pub trace: Vec<GenerationTrace>,
    pub stop: StopReason,
    pub elapsed: Duration,
}

/// Cuts are drawn in `1..M`; two-point crossover needs `M >= 3` and falls
/// back to one point for `M = 2`. Below two bits the parents are returned.
pub fn crossover(a: &Chromosome, b: &Chromosome, kind: CrossoverKind, rng: &mut Rng) -> (Chromosome, Chromosome) {
    assert_eq!(a.len(), b.len(), "crossover parents differ in length");
    let m = a.len();
    match kind {
        CrossoverKind::Uniform => {
            let (c1, c2) = crate::qubo::uniform_crossover(a.bits(), b.bits(), rng);
            (Chromosome::from_bits(c1), Chromosome::from_bits(c2))
        }
        _ if m < 2 => (a.clone(), b.clone()),
        CrossoverKind::OnePoint => one_point(a, b, rng.gen_range(1..m)),
        CrossoverKind::TwoPoint if m == 2 => one_point(a, b, 1),
        CrossoverKind::TwoPoint => {
            let x = rng.gen_range(1..m);
            let mut y = rng.gen_range(1..m - 1);
            if y >= x {
                y += 1;
            }
            swap_segment(a, b, x.min(y), x.max(y))
        }
    }
}

/// Swaps everything from `cut` on.
pub fn one_point(a: &Chromosome, b: &Chromosome, cut: usize) -> (Chromosome, Chromosome) {
    swap_segment(a, b, cut, a.len())
}

fn swap_segment(a: &Chromosome, b: &Chromosome, from: usize, to: usize) -> (Chromosome, Chromosome) {
    let mut c1 = a.bits().to_vec();
    let mut c2 = b.bits().to_vec();
    c1[from..to].copy_from_slice(&b.bits()[from..to]);
    c2[from..to].copy_from_slice(&a.bits()[from..to]);
    (Chromosome::from_bits(c1), Chromosome::from_bits(c2))
}

/// `clip(r_i + m_i, 0, 1)` per coordinate.
pub fn apply_mutation(r: &Chromosome, m: &TernaryVector) -> Chromosome {
    assert_eq!(r.len(), m.len(), "mutation length differs from chromosome");
    let mut out = r.clone();
    for (i, v) in m.nonzeros() {
        out.set(i, v > 0);
    }
    out
}

/// Applies, as long as one exists, the first mutation in list order whose
/// result is feasible and strictly fitter.
pub fn super_mutation(p: &Problem, r: &Chromosome, mutations: &[TernaryVector]) -> Chromosome {
    let mut current = r.clone();
    let mut fitness = p.fitness(&current);
    let (mut length, mut errors) = p.cost(&current);
    'climb: loop {
        for m in mutations {
            // Coordinates actually flipped by the mutation.
            let flips: Vec<(usize, bool)> =
                m.nonzeros().filter(|&(i, v)| current.get(i) != (v > 0)).map(|(i, v)| (i, v > 0)).collect();
            if flips.is_empty() {
                continue;
            }
            let (mut l, mut e) = (length as i64, errors as i64);
            for &(i, on) in &flips {
                let s = if on { 1 } else { -1 };
                l += s * p.lengths()[i] as i64;
                e += s * p.errors()[i] as i64;
            }
            if l > p.budget_complexity() as i64 || e > p.budget_errors() as i64 {
                continue;
            }
            let mut next = current.clone();
            for &(i, on) in &flips {
                next.set(i, on);
            }
            let f = p.fitness(&next);
            if f > fitness {
                current = next;
                fitness = f;
                length = l as u64;
                errors = e as u64;
                continue 'climb;
            }
        }
        return current;
    }
}

/// Feasible starting population: QUBO samples of `A x <= b`, plus RF+HC
/// results when enabled, deduplicated and cut to the fittest `n_max_population`.
pub fn initial_population(p: &Problem, scores: &[f64], cfg: &QgaConfig, rng: &mut Rng) -> Vec<Chromosome> {
    let cs = p.constraint_system();
    let mut pool: BTreeSet<Chromosome> =
        solve_inequality_system(&cs, &beta_grid(cs.bounds()), cfg.population_subspace, &cfg.inner_ga, rng)
            .into_iter()
            .collect();
    if cfg.seed_with_rf_hc {
        pool.extend(rf_hc_with_scores(p, scores, cfg.rf_hc_trials, cfg.seed).trials);
    }
    let mut scored: Vec<(f64, Chromosome)> = pool.into_iter().map(|c| (p.fitness(&c), c)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(cfg.n_max_population);
    scored.into_iter().map(|(_, c)| c).collect()
}

fn trace_row(generation: usize, pop: &[(f64, Chromosome)]) -> GenerationTrace {
    let min = pop.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    let max = pop.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
    let mean = (pop.iter().map(|x| x.0).sum::<f64>() / pop.len() as f64).clamp(min, max);
    let diversity = pop.iter().map(|x| &x.1).collect::<BTreeSet<_>>().len();
    GenerationTrace { generation, min, mean, max, diversity }
}

/// Runs the nested GA with rule scores used for RF+HC seeding.
pub fn qga_run(p: &Problem, scores: &[f64], cfg: &QgaConfig) -> Result<Solution> {
    let start = Instant::now();
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let initial = initial_population(p, scores, cfg, &mut rng);
    if initial.is_empty() {
        return Err(Error::Initialization { attempts: 0 });
    }
    let mutations = approximate_kernel(&p.constraint_system(), &cfg.inner_ga, &cfg.kernel_subspace, &mut rng);
    evolve(p, initial, &mutations, cfg, &mut rng, start)
}

/// The outer loop from a given feasible population and mutation list.
pub fn evolve(
    p: &Problem,
    initial: Vec<Chromosome>,
    mutations: &[TernaryVector],
    cfg: &QgaConfig,
    rng: &mut Rng,
    start: Instant,
) -> Result<Solution> {
    if initial.is_empty() {
        return Err(Error::Initialization { attempts: 0 });
    }
    let mut pop: Vec<(f64, Chromosome)> = initial.into_iter().map(|c| (p.fitness(&c), c)).collect();
    assert!(pop.iter().all(|(_, c)| p.feasible(c)), "infeasible initial individual");
    pop.sort_by(|a, b| b.0.total_cmp(&a.0));
    pop.truncate(cfg.n_max_population.max(1));

    let full_coverage = |pop: &[(f64, Chromosome)]| {
        pop.iter().any(|(_, c)| {
            let e = p.evaluate(c);
            e.covered == p.n() && e.conflicts == 0
        })
    };

    let mut trace = vec![trace_row(0, &pop)];
    let mut stop = StopReason::GenerationCap;
    if full_coverage(&pop) {
        stop = StopReason::FullCoverage;
    }

    let mut generation = 0;
    while stop == StopReason::GenerationCap && generation < cfg.n_generations {
        generation += 1;
        let n = pop.len();
        let min = pop.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = pop.iter().map(|x| x.0 - min + 1e-6).collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");

        let mut children = Vec::with_capacity(n);
        for _ in 0..n / 2 {
            let (a, b) = distinct_pair(&dist, &weights, rng);
            let (pa, pb) = (&pop[a].1, &pop[b].1);
            let (mut c1, mut c2) = (None, None);
            for _ in 0..cfg.crossover_retries.max(1) {
                let (x, y) = crossover(pa, pb, cfg.crossover, rng);
                if c1.is_none() && p.feasible(&x) {
                    c1 = Some(x);
                }
                if c2.is_none() && p.feasible(&y) {
                    c2 = Some(y);
                }
                if c1.is_some() && c2.is_some() {
                    break;
                }
            }
            children.push(c1.unwrap_or_else(|| pa.clone()));
            children.push(c2.unwrap_or_else(|| pb.clone()));
        }

        let improved: Vec<(f64, Chromosome)> = children
            .par_iter()
            .map(|c| {
                let c = super_mutation(p, c, mutations);
                (p.fitness(&c), c)
            })
            .collect();
        pop.extend(improved);
        pop.sort_by(|a, b| b.0.total_cmp(&a.0));
        pop.truncate(cfg.n_max_population.max(1));
        assert!(pop.iter().all(|(_, c)| p.feasible(c)), "infeasible QGA individual");

        let row = trace_row(generation, &pop);
        trace.push(row);
        if full_coverage(&pop) {
            stop = StopReason::FullCoverage;
        } else if row.min == row.max {
            stop = StopReason::Converged;
        }
    }

    let (_, chromosome) = pop.into_iter().next().expect("population is never empty");
    let evaluation = p.evaluate(&chromosome);
    Ok(Solution {
        rules: p.selected_rules(&chromosome),
        chromosome,
        evaluation,
        trace,
        stop,
        elapsed: start.elapsed(),
    })
}
