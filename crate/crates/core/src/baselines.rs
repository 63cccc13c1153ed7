//! Comparison selectors: ForEx++, randomized hill climbing on rule scores
//! (RF+HC) and a multi-objective GA (IRFRE), adapted to the budgets.

use rand::distributions::WeightedIndex;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::problem::{Chromosome, Problem};
use crate::qubo::uniform_crossover;
use crate::rules::{rule_stats, Rule, RuleStats};
use crate::{rng_stream, Error, Result, Rng};

/// Per class, the rules whose accuracy and coverage are strictly above the
/// class mean and whose length is strictly below it. Returns indices into
/// `rules`, ascending.
pub fn forexpp(rules: &[Rule], data: &Dataset) -> Vec<usize> {
    let stats: Vec<RuleStats> = rules.iter().map(|r| rule_stats(r, data)).collect();
    let n = data.n() as f64;
    let mut out = Vec::new();
    for class in 0..data.n_classes() {
        let members: Vec<usize> = (0..rules.len()).filter(|&i| rules[i].class == class).collect();
        if members.is_empty() {
            continue;
        }
        let k = members.len() as f64;
        let mean_acc = members.iter().map(|&i| stats[i].accuracy()).sum::<f64>() / k;
        let mean_cov = members.iter().map(|&i| stats[i].coverage() as f64 / n).sum::<f64>() / k;
        let mean_len = members.iter().map(|&i| stats[i].length as f64).sum::<f64>() / k;
        out.extend(members.into_iter().filter(|&i| {
            stats[i].accuracy() > mean_acc
                && stats[i].coverage() as f64 / n > mean_cov
                && (stats[i].length as f64) < mean_len
        }));
    }
    out.sort_unstable();
    out
}

const SCORE_K: f64 = 4.0;

/// `(cc - ic)/(cc + ic) + cc/(ic + 4) + cc/rl`. A rule covering nothing
/// scores -1; an empty rule uses `rl = 1`.
pub fn rule_score(stats: &RuleStats) -> f64 {
    let (cc, ic) = (stats.cc as f64, stats.ic as f64);
    if stats.cc + stats.ic == 0 {
        return -1.0;
    }
    let rl = stats.length.max(1) as f64;
    (cc - ic) / (cc + ic) + cc / (ic + SCORE_K) + cc / rl
}

#[derive(Debug, Clone)]
pub struct RfHcResult {
    pub best: Chromosome,
    pub best_fitness: f64,
    /// Final selection of every trial, in trial order.
    pub trials: Vec<Chromosome>,
}

/// Offset added to shifted scores so every rule keeps a positive weight.
const SCORE_SHIFT: f64 = 1e-6;

/// Best of `n_trials` greedy passes. Each pass visits all rules once in a
/// random order drawn proportionally to (shifted) rule score, keeping a rule
/// when it strictly increases `f*` within budget. Trial `t` uses stream `t`
/// of `seed`, so results for `n` trials are a prefix of those for `n + 1`.
pub fn rf_hc(p: &Problem, data: &Dataset, n_trials: usize, seed: u64) -> RfHcResult {
    let scores: Vec<f64> = p.rules().iter().map(|r| rule_score(&rule_stats(r, data))).collect();
    rf_hc_with_scores(p, &scores, n_trials, seed)
}

pub fn rf_hc_with_scores(p: &Problem, scores: &[f64], n_trials: usize, seed: u64) -> RfHcResult {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = scores.iter().map(|s| s - min + SCORE_SHIFT).collect();

    let trials: Vec<(Chromosome, f64)> =
        (0..n_trials).into_par_iter().map(|t| hill_climb(p, &weights, &mut rng_stream(seed, t as u64))).collect();

    let mut best = Chromosome::zeros(p.m());
    let mut best_fitness = 0.0;
    for (c, f) in &trials {
        if *f > best_fitness {
            best = c.clone();
            best_fitness = *f;
        }
    }
    RfHcResult { best, best_fitness, trials: trials.into_iter().map(|(c, _)| c).collect() }
}

fn hill_climb(p: &Problem, weights: &[f64], rng: &mut Rng) -> (Chromosome, f64) {
    // Weighted sampling without replacement: sort by u^(1/w), largest first.
    let mut order: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut selected: Vec<usize> = Vec::new();
    let (mut length, mut errors) = (0, 0);
    let mut fitness = 0.0;
    for (_, i) in order {
        let (l, e) = (length + p.lengths()[i], errors + p.errors()[i]);
        if l > p.budget_complexity() || e > p.budget_errors() {
            continue;
        }
        selected.push(i);
        let f = p.evaluate_selected(&selected).fitness;
        if f > fitness {
            fitness = f;
            length = l;
            errors = e;
        } else {
            selected.pop();
        }
    }
    (Chromosome::from_indices(p.m(), &selected), fitness)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrfreConfig {
    pub n_generations: usize,
    pub n_max_population: usize,
    /// Random draws allowed when building the initial population.
    pub init_attempts: usize,
}

impl Default for IrfreConfig {
    fn default() -> Self {
        Self { n_generations: 100, n_max_population: 50, init_attempts: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrfreIndividual {
    pub chromosome: Chromosome,
    pub fitness: f64,
    pub complexity: u64,
    pub errors: u64,
    pub rank: usize,
}

impl IrfreIndividual {
    fn new(p: &Problem, chromosome: Chromosome) -> Self {
        let e = p.evaluate(&chromosome);
        Self { chromosome, fitness: e.fitness, complexity: e.complexity, errors: e.errors, rank: 0 }
    }

    /// Pareto dominance: maximize fitness, minimize complexity and errors.
    fn dominates(&self, other: &Self) -> bool {
        let no_worse =
            self.fitness >= other.fitness && self.complexity <= other.complexity && self.errors <= other.errors;
        let better = self.fitness > other.fitness || self.complexity < other.complexity || self.errors < other.errors;
        no_worse && better
    }
}

/// Fast nondominated sorting; front 0 is the Pareto front.
pub fn nondominated_ranks(pop: &mut [IrfreIndividual]) {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in 0..n {
        for b in 0..n {
            if a != b && pop[a].dominates(&pop[b]) {
                dominates[a].push(b);
                dominated_by[b] += 1;
            }
        }
    }
    let mut front: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut rank = 0;
    while !front.is_empty() {
        let mut next = Vec::new();
        for &a in &front {
            pop[a].rank = rank;
            for &b in &dominates[a] {
                dominated_by[b] -= 1;
                if dominated_by[b] == 0 {
                    next.push(b);
                }
            }
        }
        front = next;
        rank += 1;
    }
}

#[derive(Debug, Clone)]
pub struct IrfreResult {
    pub best: IrfreIndividual,
    pub population: Vec<IrfreIndividual>,
}

/// Multi-objective GA over feasible selections. The random initial
/// population uses bit probability `B_c / (2 sum L)` with rejection of
/// infeasible draws; `seeds` (feasible ones) are added on top.
pub fn irfre(p: &Problem, cfg: &IrfreConfig, rng: &mut Rng, seeds: &[Chromosome]) -> Result<IrfreResult> {
    let m = p.m();
    let total_len: u64 = p.lengths().iter().sum();
    let density =
        if total_len == 0 { 0.5 } else { (p.budget_complexity() as f64 / (2.0 * total_len as f64)).clamp(0.0, 1.0) };

    let mut pop: Vec<IrfreIndividual> = Vec::new();
    let mut attempts = 0;
    while pop.len() < cfg.n_max_population && attempts < cfg.init_attempts {
        attempts += 1;
        let c = Chromosome::from_bits((0..m).map(|_| rng.gen_bool(density)).collect());
        if p.feasible(&c) {
            pop.push(IrfreIndividual::new(p, c));
        }
    }
    pop.extend(seeds.iter().filter(|c| p.feasible(c)).map(|c| IrfreIndividual::new(p, c.clone())));
    if pop.is_empty() {
        return Err(Error::Initialization { attempts });
    }
    nondominated_ranks(&mut pop);
    truncate(&mut pop, cfg.n_max_population.max(seeds.len()));

    let flip = 1.0 / m.max(1) as f64;
    for _ in 0..cfg.n_generations {
        let weights: Vec<f64> = pop.iter().map(|ind| 1.0 / (1.0 + ind.rank as f64)).collect();
        let dist = WeightedIndex::new(&weights).expect("positive weights");
        let mut children = Vec::new();
        for _ in 0..pop.len() / 2 {
            let (a, b) = crate::qubo::distinct_pair(&dist, &weights, rng);
            let (c1, c2) = uniform_crossover(pop[a].chromosome.bits(), pop[b].chromosome.bits(), rng);
            for mut c in [c1, c2] {
                for bit in c.iter_mut() {
                    if rng.gen_bool(flip) {
                        *bit = !*bit;
                    }
                }
                let c = Chromosome::from_bits(c);
                if p.feasible(&c) {
                    children.push(IrfreIndividual::new(p, c));
                }
            }
        }
        pop.extend(children);
        nondominated_ranks(&mut pop);
        truncate(&mut pop, cfg.n_max_population);
        assert!(pop.iter().all(|ind| p.feasible(&ind.chromosome)), "infeasible IRFRE individual");
    }

    let best = pop
        .iter()
        .enumerate()
        .max_by(|(i, a), (k, b)| a.fitness.total_cmp(&b.fitness).then(k.cmp(i)))
        .map(|(_, ind)| ind.clone())
        .expect("population is never empty");
    Ok(IrfreResult { best, population: pop })
}

/// Keeps the `n` fittest by rank, then coverage.
fn truncate(pop: &mut Vec<IrfreIndividual>, n: usize) {
    pop.sort_by(|a, b| a.rank.cmp(&b.rank).then(b.fitness.total_cmp(&a.fitness)));
    pop.truncate(n.max(1));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{Condition, Op};
    use rand::SeedableRng;

    fn stats(cc: usize, ic: usize, length: usize) -> RuleStats {
        RuleStats { length, covered: (0..cc + ic).collect(), cc, ic }
    }

    #[test]
    fn rule_score_values() {
        assert!((rule_score(&stats(50, 0, 1)) - 63.5).abs() < 1e-12);
        assert_eq!(rule_score(&stats(0, 10, 2)), -1.0);
        assert!((rule_score(&stats(5, 5, 5)) - (5.0 / 9.0 + 1.0)).abs() < 1e-12);
        assert_eq!(rule_score(&stats(0, 0, 3)), -1.0);
    }

    fn le(feature: usize, threshold: f64) -> Condition {
        Condition { feature, op: Op::Le, threshold }
    }

    fn gt(feature: usize, threshold: f64) -> Condition {
        Condition { feature, op: Op::Gt, threshold }
    }

    /// x in 0..8, label a for x < 4, b otherwise.
    fn line() -> Dataset {
        Dataset::new(
            (0..8).map(|x| vec![x as f64]).collect(),
            vec!["x".into()],
            (0..8).map(|x| usize::from(x >= 4)).collect(),
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn forexpp_identical_rules_select_nothing() {
        let rules = vec![Rule::new(vec![le(0, 3.5)], 0); 3];
        assert!(forexpp(&rules, &line()).is_empty());
    }

    #[test]
    fn forexpp_dominating_rule() {
        // Class a means: accuracy (1 + 0.5 + 1 + 0.8)/4 = 0.825,
        // coverage (4 + 2 + 1 + 5)/(4 * 8) = 0.375, length (1 + 2 + 3 + 2)/4 = 2.
        let rules = vec![
            Rule::new(vec![le(0, 3.5)], 0),
            Rule::new(vec![gt(0, 2.5), le(0, 4.5)], 0),
            Rule::new(vec![gt(0, 0.5), le(0, 1.5), le(0, 1.7)], 0),
            Rule::new(vec![gt(0, -1.0), le(0, 4.5)], 0),
            Rule::new(vec![gt(0, 3.5)], 1),
        ];
        assert_eq!(forexpp(&rules, &line()), vec![0]);
    }

    #[test]
    fn forexpp_unions_classes() {
        let rules = vec![
            Rule::new(vec![le(0, 3.5)], 0),
            Rule::new(vec![gt(0, 2.5), le(0, 4.5)], 0),
            Rule::new(vec![gt(0, 3.5)], 1),
            Rule::new(vec![gt(0, 1.5), le(0, 4.5)], 1),
        ];
        assert_eq!(forexpp(&rules, &line()), vec![0, 2]);
    }

    #[test]
    fn rf_hc_zero_budget() {
        let p = Problem::build(vec![Rule::new(vec![le(0, 3.5)], 0)], &line(), 0.0, 0, 0).unwrap();
        let r = rf_hc(&p, &line(), 5, 1);
        assert_eq!((r.best, r.best_fitness), (Chromosome::zeros(1), 0.0));
    }

    #[test]
    fn rf_hc_single_rule() {
        let p = Problem::build(vec![Rule::new(vec![le(0, 3.5)], 0)], &line(), 0.0, 1, 0).unwrap();
        let r = rf_hc(&p, &line(), 4, 9);
        assert!(r.trials.iter().all(|c| c.get(0)));
        assert_eq!(r.best_fitness, 4.0);
    }

    #[test]
    fn irfre_returns_seed_without_random_init() {
        let rules = vec![Rule::new(vec![le(0, 3.5)], 0), Rule::new(vec![gt(0, 3.5)], 1)];
        let p = Problem::build(rules, &line(), 0.0, 1, 0).unwrap();
        let seed = Chromosome::from_bits(vec![true, false]);
        let cfg = IrfreConfig { n_generations: 1, n_max_population: 4, init_attempts: 0 };
        let out = irfre(&p, &cfg, &mut Rng::seed_from_u64(0), std::slice::from_ref(&seed)).unwrap();
        assert_eq!(out.best.chromosome, seed);
        assert_eq!(out.best.fitness, 4.0);
    }

    #[test]
    fn irfre_needs_some_individual() {
        let p = Problem::build(vec![Rule::new(vec![le(0, 3.5)], 0)], &line(), 0.0, 1, 0).unwrap();
        let cfg = IrfreConfig { n_generations: 1, n_max_population: 4, init_attempts: 0 };
        assert!(matches!(irfre(&p, &cfg, &mut Rng::seed_from_u64(0), &[]), Err(Error::Initialization { .. })));
    }

    #[test]
    fn ranks_follow_dominance() {
        let rules = vec![Rule::new(vec![le(0, 3.5)], 0), Rule::new(vec![gt(0, 3.5), le(0, 9.0)], 1)];
        let p = Problem::build(rules, &line(), 0.0, 10, 10).unwrap();
        let mut pop: Vec<IrfreIndividual> = [vec![true, false], vec![false, true], vec![false, false]]
            .into_iter()
            .map(|b| IrfreIndividual::new(&p, Chromosome::from_bits(b)))
            .collect();
        nondominated_ranks(&mut pop);
        // [1,0] dominates [0,1] (same coverage, shorter); the empty set is
        // nondominated because nothing beats its complexity.
        assert_eq!(pop.iter().map(|i| i.rank).collect::<Vec<_>>(), vec![0, 1, 0]);
    }
}
