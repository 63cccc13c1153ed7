//! The budgeted maximum coverage instance over a rule pool.
//!
//! A selection `r` of rules is scored by its coverage
//!
//! ```text
//! f*(r) = #{ j : (E r)_j >= 1 } - eps/2 * r' Q r
//! ```
//!
//! where `E` is the instance-by-rule coverage matrix and `Q[i][i']` counts
//! the instances covered by both rules `i` and `i'` when they predict
//! different classes. A selection is feasible when its total length stays
//! within the complexity budget and its total misclassification count
//! within the error budget.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::qubo::ConstraintSystem;
use crate::rules::{rule_stats, Rule};
use crate::{Error, Result};

/// Largest rule count accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_LIMIT: usize = 22;

/// Binary selection vector over the rule pool.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Chromosome(Vec<bool>);

impl Chromosome {
    pub fn zeros(m: usize) -> Self {
        Self(vec![false; m])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_indices(m: usize, selected: &[usize]) -> Self {
        let mut c = Self::zeros(m);
        for &i in selected {
            c.0[i] = true;
        }
        c
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.0[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Objective value `f*`.
    pub fitness: f64,
    /// Instances covered by at least one selected rule.
    pub covered: usize,
    /// `r' Q r`: ordered pairs of selected rules in conflict, summed over instances.
    pub conflicts: u64,
    /// `eps/2 * r' Q r`.
    pub penalty: f64,
    pub complexity: u64,
    pub errors: u64,
    /// `fitness / N`.
    pub coverage_score: f64,
}

#[derive(Debug, Clone)]
pub struct Problem {
    rules: Vec<Rule>,
    n: usize,
    words: usize,
    // Coverage columns of E, one bitset per rule.
    coverage: Vec<Vec<u64>>,
    conflict: Vec<u32>,
    lengths: Vec<u64>,
    errors: Vec<u64>,
    budget_complexity: u64,
    budget_errors: u64,
    epsilon: f64,
}

impl Problem {
    /// Computes coverage, conflict counts, lengths and error counts of every rule.
    pub fn build(rules: Vec<Rule>, data: &Dataset, epsilon: f64, budget_complexity: u64, budget_errors: u64) -> Result<Self> {
        if rules.is_empty() {
            return Err(Error::DegenerateProblem("empty rule list".into()));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::DegenerateProblem(format!("conflict penalty must be finite and >= 0, got {epsilon}")));
        }
        let n = data.n();
        let m = rules.len();
        let words = n.div_ceil(64);

        let stats: Vec<_> = rules.par_iter().map(|r| rule_stats(r, data)).collect();
        let coverage: Vec<Vec<u64>> = stats
            .iter()
            .map(|s| {
                let mut bits = vec![0u64; words];
                for &j in &s.covered {
                    bits[j / 64] |= 1 << (j % 64);
                }
                bits
            })
            .collect();
        let lengths: Vec<u64> = stats.iter().map(|s| s.length as u64).collect();
        let errors: Vec<u64> = stats.iter().map(|s| s.ic as u64).collect();
        // QUBO arithmetic downstream is i64; keep every partial sum far from overflow.
        if lengths.iter().sum::<u64>() >= 1 << 31 || errors.iter().sum::<u64>() >= 1 << 31 {
            return Err(Error::DegenerateProblem("total rule length or error count exceeds 2^31".into()));
        }

        let mut conflict = vec![0u32; m * m];
        conflict.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            for (k, slot) in row.iter_mut().enumerate() {
                if k != i && rules[i].class != rules[k].class {
                    *slot = coverage[i].iter().zip(&coverage[k]).map(|(a, b)| (a & b).count_ones()).sum();
                }
            }
        });

        Ok(Self { rules, n, words, coverage, conflict, lengths, errors, budget_complexity, budget_errors, epsilon })
    }

    pub fn m(&self) -> usize {
        self.rules.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn budget_complexity(&self) -> u64 {
        self.budget_complexity
    }

    pub fn budget_errors(&self) -> u64 {
        self.budget_errors
    }

    pub fn lengths(&self) -> &[u64] {
        &self.lengths
    }

    pub fn errors(&self) -> &[u64] {
        &self.errors
    }

    /// Entry `e_{j,i}` of the coverage matrix.
    pub fn covers(&self, instance: usize, rule: usize) -> bool {
        self.coverage[rule][instance / 64] >> (instance % 64) & 1 == 1
    }

    pub fn rule_coverage(&self, rule: usize) -> usize {
        self.coverage[rule].iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Entry `Q[i][i']` of the conflict matrix.
    pub fn conflict(&self, i: usize, k: usize) -> u32 {
        self.conflict[i * self.m() + k]
    }

    pub fn constraint_system(&self) -> ConstraintSystem {
        ConstraintSystem::new(
            vec![self.lengths.clone(), self.errors.clone()],
            [self.budget_complexity, self.budget_errors],
        )
    }

    /// Scores the rules listed in `selected` (each index at most once).
    pub fn evaluate_selected(&self, selected: &[usize]) -> Evaluation {
        let mut union = vec![0u64; self.words];
        let mut conflicts = 0u64;
        let mut complexity = 0;
        let mut errors = 0;
        for (a, &i) in selected.iter().enumerate() {
            for (u, w) in union.iter_mut().zip(&self.coverage[i]) {
                *u |= w;
            }
            for &k in &selected[a + 1..] {
                conflicts += 2 * u64::from(self.conflict(i, k));
            }
            complexity += self.lengths[i];
            errors += self.errors[i];
        }
        let covered = union.iter().map(|w| w.count_ones() as usize).sum();
        let penalty = self.epsilon / 2.0 * conflicts as f64;
        let fitness = covered as f64 - penalty;
        Evaluation { fitness, covered, conflicts, penalty, complexity, errors, coverage_score: fitness / self.n as f64 }
    }

    pub fn evaluate(&self, r: &Chromosome) -> Evaluation {
        debug_assert_eq!(r.len(), self.m());
        self.evaluate_selected(&r.selected().collect::<Vec<_>>())
    }

    pub fn fitness(&self, r: &Chromosome) -> f64 {
        self.evaluate(r).fitness
    }

    pub fn cost(&self, r: &Chromosome) -> (u64, u64) {
        r.selected().fold((0, 0), |(l, e), i| (l + self.lengths[i], e + self.errors[i]))
    }

    pub fn feasible(&self, r: &Chromosome) -> bool {
        let (l, e) = self.cost(r);
        l <= self.budget_complexity && e <= self.budget_errors
    }

    /// Selected rules of `r`, in pool order.
    pub fn selected_rules(&self, r: &Chromosome) -> Vec<Rule> {
        r.selected().map(|i| self.rules[i].clone()).collect()
    }
}

/// Exhaustive maximization over feasible selections. Ties go to the
/// smaller complexity, then the lexicographically smaller bit vector.
pub fn brute_force_optimum(p: &Problem) -> Result<(Chromosome, f64)> {
    let m = p.m();
    if m > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { rules: m, limit: BRUTE_FORCE_LIMIT });
    }
    let mut best = Chromosome::zeros(m);
    let mut best_eval = p.evaluate(&best);
    let mut selected = Vec::with_capacity(m);
    for mask in 1u32..(1u32 << m) {
        selected.clear();
        selected.extend((0..m).filter(|&i| mask >> i & 1 == 1));
        let (l, e) = selected.iter().fold((0, 0), |(l, e), &i| (l + p.lengths[i], e + p.errors[i]));
        if l > p.budget_complexity || e > p.budget_errors {
            continue;
        }
        let eval = p.evaluate_selected(&selected);
        let better = eval.fitness > best_eval.fitness
            || (eval.fitness == best_eval.fitness
                && (eval.complexity < best_eval.complexity
                    || (eval.complexity == best_eval.complexity
                        && Chromosome::from_indices(m, &selected) < best)));
        if better {
            best = Chromosome::from_indices(m, &selected);
            best_eval = eval;
        }
    }
    Ok((best, best_eval.fitness))
}

/// `round(fraction * n)` with halves rounded up.
pub fn error_budget_from_fraction(fraction: f64, n: usize) -> u64 {
    (fraction * n as f64 + 0.5).floor().max(0.0) as u64
}

/// The conflict penalty used when none is given: one conflict costs less
/// than one covered instance.
pub fn default_epsilon(n: usize) -> f64 {
    1.0 / n as f64
}

/// Serializable problem definition. Matrices are recomputed from the
/// dataset on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemBundle {
    pub rules: Vec<Rule>,
    pub budget_complexity: u64,
    pub budget_errors: u64,
    pub epsilon: f64,
}

impl ProblemBundle {
    pub fn from_problem(p: &Problem) -> Self {
        Self {
            rules: p.rules.clone(),
            budget_complexity: p.budget_complexity,
            budget_errors: p.budget_errors,
            epsilon: p.epsilon,
        }
    }

    pub fn build(self, data: &Dataset) -> Result<Problem> {
        Problem::build(self.rules, data, self.epsilon, self.budget_complexity, self.budget_errors)
    }
}
