//! Dataset to rule pool to selector runs.

use std::time::Instant;

use anyhow::Context;
use rayon::prelude::*;
use rulecover::baselines::{forexpp, irfre, rf_hc_with_scores, rule_score, IrfreConfig};
use rulecover::cart::{sweep, DecisionTree};
use rulecover::dataset::{load_csv, prepare as prepare_table, CsvOptions, EncodingMap};
use rulecover::problem::{default_epsilon, error_budget_from_fraction};
use rulecover::qga::{qga_run, GenerationTrace, QgaConfig, StopReason};
use rulecover::rules::{extract_rules, rule_pool, rule_stats, simplify, Rule};
use rulecover::{Chromosome, Dataset, Error, Evaluation, Problem};
use rulecover::seeded_rng;

use crate::config::{Algorithm, RunConfig};

/// Everything shared by the runs of one invocation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub name: String,
    pub data: Dataset,
    pub encoding: EncodingMap,
    pub trees: usize,
    /// `(c*, e*)` of the least complex tree of the sweep.
    pub tree_budget: (u64, u64),
    pub scores: Vec<f64>,
    pub problem: Problem,
}

/// Complexity (total simplified rule length) and training errors of a tree.
pub fn tree_cost(tree: &DecisionTree, data: &Dataset) -> (u64, u64) {
    let complexity = extract_rules(tree)
        .iter()
        .map(|r| simplify(r).map(|s| s.len()).unwrap_or(0) as u64)
        .sum();
    let errors = data.rows().zip(data.labels()).filter(|(x, &y)| tree.predict(x) != y).count() as u64;
    (complexity, errors)
}

/// Least complex tree among those trained with the largest depth limit,
/// ties broken by fewer errors. Shallower trees are skipped: a stump is
/// always the least complex tree and gives no usable budget.
pub fn budget_from_trees(trees: &[DecisionTree], data: &Dataset) -> (u64, u64) {
    let cap = trees.iter().map(|t| t.hyperparams.max_depth).max().unwrap_or(0);
    trees.iter().filter(|t| t.hyperparams.max_depth == cap).map(|t| tree_cost(t, data)).min().unwrap_or((0, 0))
}

pub fn budget_from_best_tree(data: &Dataset, depth_cap: usize, seed: u64) -> (u64, u64) {
    budget_from_trees(&sweep(data, depth_cap, seed), data)
}

pub fn load_dataset(cfg: &RunConfig) -> anyhow::Result<(Dataset, EncodingMap)> {
    let opts = CsvOptions { has_header: cfg.has_header, delimiter: cfg.delimiter as u8 };
    let raw = load_csv(&cfg.data, &cfg.target, &opts)?;
    prepare_table(&raw, cfg.missing).with_context(|| format!("preparing {}", cfg.data.display()))
}

/// Loads the data, sweeps trees, builds the rule pool and the problem.
/// Missing budgets default to `c* - 1` and `e*` from the least complex tree.
pub fn prepare(cfg: &RunConfig) -> anyhow::Result<Prepared> {
    cfg.validate()?;
    let (data, encoding) = load_dataset(cfg)?;
    let trees = sweep(&data, cfg.depth_cap, cfg.seed);
    let pool = rule_pool(&trees, &data);
    let tree_budget = budget_from_trees(&trees, &data);
    Ok(prepare_with_pool(cfg, data, encoding, pool, trees.len(), tree_budget)?)
}

pub fn prepare_with_pool(
    cfg: &RunConfig,
    data: Dataset,
    encoding: EncodingMap,
    pool: Vec<Rule>,
    trees: usize,
    tree_budget: (u64, u64),
) -> rulecover::Result<Prepared> {
    let bc = cfg.bc.unwrap_or(tree_budget.0.saturating_sub(1));
    let be = cfg.be.unwrap_or_else(|| match cfg.error_frac {
        Some(f) => error_budget_from_fraction(f, data.n()),
        None => tree_budget.1,
    });
    let epsilon = cfg.epsilon.unwrap_or_else(|| default_epsilon(data.n()));
    let scores = pool.iter().map(|r| rule_score(&rule_stats(r, &data))).collect();
    let problem = Problem::build(pool, &data, epsilon, bc, be)?;
    Ok(Prepared { name: cfg.dataset_name(), data, encoding, trees, tree_budget, scores, problem })
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub seed: u64,
    pub chromosome: Chromosome,
    pub evaluation: Evaluation,
    pub seconds: f64,
    pub trace: Vec<GenerationTrace>,
    pub stop: Option<StopReason>,
}

pub fn qga_config(cfg: &RunConfig, seed: u64) -> QgaConfig {
    QgaConfig {
        n_generations: cfg.generations,
        n_max_population: cfg.population,
        crossover: cfg.crossover,
        seed_with_rf_hc: cfg.seeding,
        rf_hc_trials: cfg.rf_hc_trials,
        seed,
        ..QgaConfig::default()
    }
}

fn irfre_config(cfg: &RunConfig) -> IrfreConfig {
    IrfreConfig { n_generations: cfg.generations, n_max_population: cfg.population, ..IrfreConfig::default() }
}

/// One selector run with the given seed.
pub fn run_once(prep: &Prepared, algo: Algorithm, cfg: &RunConfig, seed: u64) -> anyhow::Result<RunOutcome> {
    let p = &prep.problem;
    let start = Instant::now();
    let mut trace = Vec::new();
    let mut stop = None;
    let chromosome = match algo {
        Algorithm::Qga => {
            let sol = qga_run(p, &prep.scores, &qga_config(cfg, seed))?;
            trace = sol.trace;
            stop = Some(sol.stop);
            sol.chromosome
        }
        Algorithm::RfHc => rf_hc_with_scores(p, &prep.scores, cfg.rf_hc_trials, seed).best,
        Algorithm::Irfre | Algorithm::IrfreRfHc => {
            let seeds = if algo == Algorithm::IrfreRfHc {
                rf_hc_with_scores(p, &prep.scores, cfg.rf_hc_trials, seed).trials
            } else {
                Vec::new()
            };
            let mut rng = seeded_rng(seed);
            match irfre(p, &irfre_config(cfg), &mut rng, &seeds) {
                Ok(res) => res.best.chromosome,
                // No feasible random selection: report the empty one.
                Err(Error::Initialization { .. }) => Chromosome::zeros(p.m()),
                Err(e) => return Err(e.into()),
            }
        }
        Algorithm::Forexpp => Chromosome::from_indices(p.m(), &forexpp(p.rules(), &prep.data)),
    };
    let seconds = if cfg.omit_timing { 0.0 } else { start.elapsed().as_secs_f64() };
    Ok(RunOutcome { seed, evaluation: p.evaluate(&chromosome), chromosome, seconds, trace, stop })
}

/// `cfg.repeats` runs with seeds `seed + i`, in seed order.
pub fn run_repeats(prep: &Prepared, algo: Algorithm, cfg: &RunConfig) -> anyhow::Result<Vec<RunOutcome>> {
    (0..cfg.repeats as u64).into_par_iter().map(|i| run_once(prep, algo, cfg, cfg.seed.wrapping_add(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eight_points() -> Dataset {
        Dataset::new(
            (0..8).map(|x| vec![x as f64]).collect(),
            vec!["x".into()],
            vec![0, 0, 0, 1, 1, 1, 1, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn budget_of_stumps() {
        // Every stump has two one-condition rules; the best split at 2.5
        // misclassifies only the last point.
        assert_eq!(budget_from_best_tree(&eight_points(), 1, 0), (2, 1));
    }

    #[test]
    fn budget_of_pure_data() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec!["x".into()], vec![1, 1], vec!["a".into(), "b".into()])
            .unwrap();
        assert_eq!(budget_from_best_tree(&data, 3, 0), (0, 0));
    }
}
