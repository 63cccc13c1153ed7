//! Inner genetic algorithms over QUBO models.
//!
//! Two problems derived from the budget constraints `A x <= b` are solved by
//! minimizing a quadratic form over bit strings:
//!
//! * feasible starting points: for targets `0 <= beta <= b`, minimize
//!   `||A x - beta||^2` over `x in {0,1}^M`, i.e. `x' (A'A - 2 diag(beta'A)) x`;
//! * feasibility-preserving mutations: minimize `||A x||^2` over
//!   `x in {-1,0,1}^M`, each entry encoded on two bits as
//!   `x_i = -1 + b_i1 + 2 b_i2`.
//!
//! All arithmetic is exact in `i64`.

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::problem::Chromosome;
use crate::{rng_stream, Rng};

/// Square integer matrix of a QUBO objective `x' Q x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuboMatrix {
    size: usize,
    entries: Vec<i64>,
}

impl QuboMatrix {
    pub fn zeros(size: usize) -> Self {
        Self { size, entries: vec![0; size * size] }
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Self {
        let size = rows.len();
        assert!(rows.iter().all(|r| r.len() == size), "QUBO matrix must be square");
        Self { size, entries: rows.into_iter().flatten().collect() }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, k: usize) -> i64 {
        self.entries[i * self.size + k]
    }

    fn add(&mut self, i: usize, k: usize, v: i64) {
        self.entries[i * self.size + k] += v;
    }

    pub fn objective(&self, x: &[bool]) -> i64 {
        debug_assert_eq!(x.len(), self.size);
        let ones: Vec<usize> = x.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        ones.iter().map(|&i| ones.iter().map(|&k| self.get(i, k)).sum::<i64>()).sum()
    }
}

/// The two budget inequalities `A x <= b`: row 0 holds rule lengths, row 1
/// rule error counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    rows: [Vec<i64>; 2],
    bounds: [i64; 2],
}

impl ConstraintSystem {
    pub fn new(rows: Vec<Vec<u64>>, bounds: [u64; 2]) -> Self {
        assert_eq!(rows.len(), 2, "constraint system has exactly two rows");
        assert_eq!(rows[0].len(), rows[1].len());
        let conv = |r: &Vec<u64>| r.iter().map(|&v| i64::try_from(v).expect("coefficient fits i64")).collect();
        Self {
            rows: [conv(&rows[0]), conv(&rows[1])],
            bounds: bounds.map(|b| i64::try_from(b).expect("bound fits i64")),
        }
    }

    pub fn m(&self) -> usize {
        self.rows[0].len()
    }

    pub fn bounds(&self) -> [i64; 2] {
        self.bounds
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.rows[r]
    }

    /// `A x` for an integer vector.
    pub fn apply(&self, x: impl Fn(usize) -> i64) -> [i64; 2] {
        let mut out = [0; 2];
        for (o, row) in out.iter_mut().zip(&self.rows) {
            *o = row.iter().enumerate().map(|(i, &a)| a * x(i)).sum();
        }
        out
    }

    pub fn satisfied(&self, x: &[bool]) -> bool {
        let ax = self.apply(|i| i64::from(x[i]));
        ax[0] <= self.bounds[0] && ax[1] <= self.bounds[1]
    }

    /// `||A m||^2`.
    pub fn residual(&self, m: &TernaryVector) -> i64 {
        let am = self.apply(|i| i64::from(m.0[i]));
        am[0] * am[0] + am[1] * am[1]
    }

    /// Columns `idx` only, with the same bounds.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        Self { rows: self.rows.clone().map(|r| idx.iter().map(|&i| r[i]).collect()), bounds: self.bounds }
    }

    /// `A'A`.
    fn gram(&self) -> Vec<i64> {
        let m = self.m();
        let mut g = vec![0; m * m];
        for i in 0..m {
            for k in 0..m {
                g[i * m + k] = self.rows[0][i] * self.rows[0][k] + self.rows[1][i] * self.rows[1][k];
            }
        }
        g
    }
}

/// Mutation vector in `{-1, 0, +1}^M`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TernaryVector(pub Vec<i8>);

impl TernaryVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0)
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&v| -v).collect())
    }

    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, v)| v != 0)
    }

    pub fn unit(m: usize, i: usize, sign: i8) -> Self {
        let mut v = vec![0; m];
        v[i] = sign;
        Self(v)
    }
}

/// Canonical two-bit pattern of each ternary entry: -1 -> 00, 0 -> 10, +1 -> 01.
pub fn encode_ternary(x: &[i8]) -> Vec<bool> {
    x.iter()
        .flat_map(|&v| match v {
            -1 => [false, false],
            0 => [true, false],
            1 => [false, true],
            _ => panic!("ternary entry out of range: {v}"),
        })
        .collect()
}

/// `x = L + E X` with `L = -1` and `E = I (x) [1, 2]`. The pattern 11 decodes to +2.
pub fn decode_ternary(bits: &[bool]) -> Vec<i64> {
    bits.chunks_exact(2).map(|p| -1 + i64::from(p[0]) + 2 * i64::from(p[1])).collect()
}

/// `Q = A'A - 2 diag(beta'A)`, so that `x'Qx + beta'beta = ||Ax - beta||^2` on bit strings.
pub fn build_equality_qubo(cs: &ConstraintSystem, beta: [i64; 2]) -> QuboMatrix {
    let m = cs.m();
    let mut q = QuboMatrix { size: m, entries: cs.gram() };
    for i in 0..m {
        q.add(i, i, -2 * (beta[0] * cs.rows[0][i] + beta[1] * cs.rows[1][i]));
    }
    q
}

/// `Q = E' Q_I E + 2 diag(L' Q_I E)` with `Q_I = A'A`, over `2M` bits.
pub fn build_kernel_qubo(cs: &ConstraintSystem) -> QuboMatrix {
    const W: [i64; 2] = [1, 2];
    let m = cs.m();
    let qi = cs.gram();
    let mut q = QuboMatrix::zeros(2 * m);
    for i in 0..m {
        for k in 0..m {
            for (s, ws) in W.iter().enumerate() {
                for (t, wt) in W.iter().enumerate() {
                    q.add(2 * i + s, 2 * k + t, ws * wt * qi[i * m + k]);
                }
            }
        }
    }
    for k in 0..m {
        let col: i64 = (0..m).map(|i| qi[i * m + k]).sum();
        for (t, wt) in W.iter().enumerate() {
            q.add(2 * k + t, 2 * k + t, -2 * wt * col);
        }
    }
    q
}

/// Constant `L' Q_I L` completing the kernel identity.
pub fn kernel_constant(cs: &ConstraintSystem) -> i64 {
    cs.gram().iter().sum()
}

/// Plain generational GA minimizing `x'Qx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuboGa {
    /// Population size; must be even and at least 2.
    pub population: usize,
    pub generations: usize,
}

impl Default for QuboGa {
    fn default() -> Self {
        Self { population: 64, generations: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct QuboRun {
    /// Final population, best first.
    pub population: Vec<Vec<bool>>,
    pub objectives: Vec<i64>,
    /// Best objective of the initial population, then after each generation.
    pub best_history: Vec<i64>,
}

impl QuboGa {
    /// Runs from `initial` (padded with uniform random bit strings up to the
    /// population size). Parents are drawn with weight `max - f(x) + 1`,
    /// children come from uniform crossover plus one bit flip, and the
    /// best `population` of parents and children survive.
    pub fn run(&self, q: &QuboMatrix, initial: Vec<Vec<bool>>, rng: &mut Rng) -> QuboRun {
        assert!(self.population >= 2 && self.population.is_multiple_of(2), "population must be even and >= 2");
        let size = q.size();
        let mut pop: Vec<(i64, Vec<bool>)> = initial.into_iter().take(self.population).map(|x| (q.objective(&x), x)).collect();
        while pop.len() < self.population {
            let x: Vec<bool> = (0..size).map(|_| rng.gen()).collect();
            pop.push((q.objective(&x), x));
        }
        pop.sort_by_key(|(f, _)| *f);
        let mut best_history = vec![pop[0].0];

        if size == 0 {
            let (objectives, population) = pop.into_iter().unzip();
            return QuboRun { population, objectives, best_history };
        }

        for _ in 0..self.generations {
            let worst = pop.last().unwrap().0;
            let weights: Vec<f64> = pop.iter().map(|(f, _)| (worst - f) as f64 + 1.0).collect();
            let dist = WeightedIndex::new(&weights).expect("positive weights");
            let mut children = Vec::with_capacity(pop.len());
            for _ in 0..pop.len() / 2 {
                let (a, b) = distinct_pair(&dist, &weights, rng);
                let (mut c1, mut c2) = uniform_crossover(&pop[a].1, &pop[b].1, rng);
                for c in [&mut c1, &mut c2] {
                    let i = rng.gen_range(0..size);
                    c[i] = !c[i];
                }
                children.push((q.objective(&c1), c1));
                children.push((q.objective(&c2), c2));
            }
            pop.extend(children);
            pop.sort_by_key(|(f, _)| *f);
            pop.truncate(self.population);
            best_history.push(pop[0].0);
        }
        let (objectives, population) = pop.into_iter().unzip();
        QuboRun { population, objectives, best_history }
    }
}

/// Two different slots drawn proportionally to `weights`.
pub(crate) fn distinct_pair(dist: &WeightedIndex<f64>, weights: &[f64], rng: &mut Rng) -> (usize, usize) {
    let a = dist.sample(rng);
    if weights.len() < 2 {
        return (a, a);
    }
    let mut rest = weights.to_vec();
    rest[a] = 0.0;
    let b = match WeightedIndex::new(&rest) {
        Ok(d) => d.sample(rng),
        // Every other weight is zero: fall back to a uniform choice.
        Err(_) => (a + rng.gen_range(1..weights.len())) % weights.len(),
    };
    (a, b)
}

pub(crate) fn uniform_crossover(a: &[bool], b: &[bool], rng: &mut Rng) -> (Vec<bool>, Vec<bool>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for i in 0..a.len() {
        if rng.gen::<bool>() {
            c1[i] = b[i];
            c2[i] = a[i];
        }
    }
    (c1, c2)
}

/// Up to 25 targets: five evenly spaced values per budget, 0 and the budget included.
pub fn beta_grid(bounds: [i64; 2]) -> Vec<[i64; 2]> {
    let axis = |b: i64| -> Vec<i64> {
        let mut v: Vec<i64> = (0..5).map(|k| (k * b + 2) / 4).collect();
        v.dedup();
        v
    };
    let (xs, ys) = (axis(bounds[0]), axis(bounds[1]));
    xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect()
}

/// Sub-space sizing for the inner searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspacePlan {
    /// Coordinates per sub-problem.
    pub size: usize,
    /// Sub-problems drawn per target, as a multiple of `ceil(M / size)`.
    pub draws_factor: usize,
}

impl SubspacePlan {
    pub fn draws(&self, m: usize) -> usize {
        m.div_ceil(self.size.max(1)).max(1) * self.draws_factor
    }
}

/// Feasible selections from QUBO runs on random coordinate subsets, lifted
/// by zero fill and filtered by `A x <= b`. Never empty: the zero vector is
/// returned when nothing else survives.
pub fn solve_inequality_system(
    cs: &ConstraintSystem,
    betas: &[[i64; 2]],
    subspace: usize,
    ga: &QuboGa,
    rng: &mut Rng,
) -> Vec<Chromosome> {
    let m = cs.m();
    let size = subspace.clamp(1, m.max(1));
    let plan = SubspacePlan { size, draws_factor: 4 };
    let draws = plan.draws(m);
    let base: u64 = rng.gen();

    let jobs: Vec<(usize, usize)> = (0..betas.len()).flat_map(|b| (0..draws).map(move |d| (b, d))).collect();
    let found: Vec<Vec<Vec<bool>>> = jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(bi, _))| {
            if m == 0 {
                return Vec::new();
            }
            let mut rng = rng_stream(base, job as u64);
            let idx = sorted_sample(&mut rng, m, size);
            let sub = cs.restrict(&idx);
            let q = build_equality_qubo(&sub, betas[bi]);
            let density = target_density(&sub, betas[bi]);
            let initial = (0..ga.population).map(|_| (0..size).map(|_| rng.gen_bool(density)).collect()).collect();
            ga.run(&q, initial, &mut rng)
                .population
                .into_iter()
                .map(|x| {
                    let mut full = vec![false; m];
                    for (&i, &b) in idx.iter().zip(&x) {
                        full[i] = b;
                    }
                    full
                })
                .filter(|x| cs.satisfied(x))
                .collect()
        })
        .collect();

    let mut unique: BTreeSet<Vec<bool>> = found.into_iter().flatten().collect();
    if unique.is_empty() {
        unique.insert(vec![false; m]);
    }
    unique.into_iter().map(Chromosome::from_bits).collect()
}

fn sorted_sample(rng: &mut Rng, m: usize, size: usize) -> Vec<usize> {
    let mut idx = sample(rng, m, size).into_vec();
    idx.sort_unstable();
    idx
}

/// Bit density putting the expected `A x` at or below `beta` on both rows.
fn target_density(cs: &ConstraintSystem, beta: [i64; 2]) -> f64 {
    let m = cs.m().max(1) as f64;
    let mut p: f64 = 0.5;
    for (r, &target) in beta.iter().enumerate() {
        let total: i64 = cs.row(r).iter().sum();
        if total > 0 {
            p = p.min(target as f64 / total as f64);
        }
    }
    p.clamp(1.0 / m, 0.5)
}

/// Largest number of mutations kept by [`approximate_kernel`].
pub const MAX_MUTATIONS: usize = 512;

/// Ternary vectors with small `||A x||^2`, from QUBO runs on random
/// coordinate subsets (unused coordinates are 0). The result excludes the
/// zero vector, is closed under negation and sorted by residual. When the
/// search yields nothing, all unit vectors `+-e_i` are returned instead.
pub fn approximate_kernel(cs: &ConstraintSystem, ga: &QuboGa, plan: &SubspacePlan, rng: &mut Rng) -> Vec<TernaryVector> {
    let m = cs.m();
    if m == 0 {
        return Vec::new();
    }
    let size = plan.size.clamp(1, m);
    let draws = plan.draws(m);
    let base: u64 = rng.gen();
    // About three nonzero entries per initial vector.
    let nonzero = (3.0 / size as f64).min(0.75);

    let found: Vec<Vec<Vec<i8>>> = (0..draws)
        .into_par_iter()
        .map(|job| {
            let mut rng = rng_stream(base, job as u64);
            let idx = sorted_sample(&mut rng, m, size);
            let q = build_kernel_qubo(&cs.restrict(&idx));
            let initial = (0..ga.population)
                .map(|_| {
                    let x: Vec<i8> = (0..size)
                        .map(|_| if rng.gen_bool(nonzero) { if rng.gen() { 1 } else { -1 } } else { 0 })
                        .collect();
                    encode_ternary(&x)
                })
                .collect();
            ga.run(&q, initial, &mut rng)
                .population
                .into_iter()
                .filter_map(|bits| {
                    let sub = decode_ternary(&bits);
                    if sub.iter().any(|v| !(-1..=1).contains(v)) {
                        return None;
                    }
                    let mut full = vec![0i8; m];
                    for (&i, &v) in idx.iter().zip(&sub) {
                        full[i] = v as i8;
                    }
                    Some(full)
                })
                .collect()
        })
        .collect();

    let mut unique: BTreeSet<Vec<i8>> = BTreeSet::new();
    for x in found.into_iter().flatten() {
        let v = TernaryVector(x);
        if v.is_zero() {
            continue;
        }
        unique.insert(v.negated().0);
        unique.insert(v.0);
    }
    if unique.is_empty() {
        return unit_mutations(m);
    }
    let mut out: Vec<TernaryVector> = unique.into_iter().map(TernaryVector).collect();
    // Keep x and -x adjacent so that truncation at an even length preserves closure.
    out.sort_by_cached_key(|v| {
        let neg = v.negated();
        let canon = if neg < *v { neg } else { v.clone() };
        (cs.residual(v), canon, v.clone())
    });
    out.truncate(MAX_MUTATIONS);
    out
}

/// `+e_i` and `-e_i` for every coordinate.
pub fn unit_mutations(m: usize) -> Vec<TernaryVector> {
    (0..m).flat_map(|i| [TernaryVector::unit(m, i, 1), TernaryVector::unit(m, i, -1)]).collect()
}

/// One line per mutation: residual, then the nonzero entries.
pub fn describe_mutations(cs: &ConstraintSystem, mutations: &[TernaryVector]) -> String {
    mutations
        .iter()
        .map(|v| {
            let entries: Vec<String> = v.nonzeros().map(|(i, s)| format!("{}{i}", if s > 0 { '+' } else { '-' })).collect();
            format!("{}\t{}\n", cs.residual(v), entries.join(" "))
        })
        .collect()
}
