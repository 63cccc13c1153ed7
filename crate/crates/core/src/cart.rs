//! CART decision trees trained over a small hyper-parameter grid.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::{rng_stream, Error, Result, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Splitter {
    Best,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    Sqrt,
    Log2,
}

impl MaxFeatures {
    /// Number of features examined per node, rounded up and at least one.
    pub fn count(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil(),
            MaxFeatures::Log2 => (d as f64).log2().ceil(),
        };
        (k as usize).clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperParams {
    pub criterion: Criterion,
    pub splitter: Splitter,
    pub max_depth: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

/// Gini impurity or Shannon entropy (base 2) of a class histogram.
pub fn impurity(counts: &[usize], criterion: Criterion) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyNode);
    }
    Ok(impurity_of(counts, total, criterion))
}

fn impurity_of(counts: &[usize], total: usize, criterion: Criterion) -> f64 {
    let total = total as f64;
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c as f64 / total).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / total;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Instances with `x[feature] <= threshold` go left.
    Internal { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
    Leaf { class: usize, counts: Vec<usize> },
}

impl TreeNode {
    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub hyperparams: HyperParams,
    pub depth: usize,
}

impl DecisionTree {
    pub fn leaf_count(&self) -> usize {
        self.root.leaf_count()
    }

    /// Index of the leaf reached by `x`, counting leaves left to right.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        let mut offset = 0;
        loop {
            match node {
                TreeNode::Leaf { .. } => return offset,
                TreeNode::Internal { feature, threshold, left, right } => {
                    if x[*feature] <= *threshold {
                        node = left;
                    } else {
                        offset += left.leaf_count();
                        node = right;
                    }
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { class, .. } => return *class,
                TreeNode::Internal { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    /// Indented text dump, one node per line.
    pub fn dump(&self, feature_names: &[String], class_names: &[String]) -> String {
        fn walk(node: &TreeNode, indent: usize, f: &[String], c: &[String], out: &mut String) {
            let pad = "  ".repeat(indent);
            match node {
                TreeNode::Leaf { class, counts } => {
                    out.push_str(&format!("{pad}class={} counts={counts:?}\n", c[*class]));
                }
                TreeNode::Internal { feature, threshold, left, right } => {
                    out.push_str(&format!("{pad}{} <= {threshold}\n", f[*feature]));
                    walk(left, indent + 1, f, c, out);
                    out.push_str(&format!("{pad}{} > {threshold}\n", f[*feature]));
                    walk(right, indent + 1, f, c, out);
                }
            }
        }
        let mut out = String::new();
        walk(&self.root, 0, feature_names, class_names, &mut out);
        out
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Split {
    /// Lower impurity wins; near-ties go to the lower feature index, then
    /// the smaller threshold.
    fn beats(&self, other: &Split) -> bool {
        const TOL: f64 = 1e-12;
        if self.impurity < other.impurity - TOL {
            return true;
        }
        if self.impurity > other.impurity + TOL {
            return false;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

struct Builder<'a> {
    data: &'a Dataset,
    hp: HyperParams,
    n_features: usize,
    // Sorted distinct values of every feature over the whole dataset.
    grid: Vec<Vec<f64>>,
    rng: Rng,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.data.n_classes()];
        for &j in idx {
            counts[self.data.label(j)] += 1;
        }
        counts
    }

    fn leaf(&self, counts: Vec<usize>) -> TreeNode {
        // max_by_key keeps the last maximum, so scan in reverse to favour the lowest class.
        let class = counts.iter().enumerate().rev().max_by_key(|(_, &c)| c).map_or(0, |(i, _)| i);
        TreeNode::Leaf { class, counts }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> TreeNode {
        let counts = self.counts(&idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.hp.max_depth || pure {
            return self.leaf(counts);
        }
        let Some(split) = self.find_split(&idx, &counts) else {
            return self.leaf(counts);
        };
        let threshold = self.snap(split.feature, split.threshold);
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&j| self.data.value(j, split.feature) <= threshold);
        debug_assert!(!left.is_empty() && !right.is_empty());
        TreeNode::Internal {
            feature: split.feature,
            threshold,
            left: Box::new(self.build(left, depth + 1)),
            right: Box::new(self.build(right, depth + 1)),
        }
    }

    /// Features are visited in random order; constant ones are skipped and
    /// do not count towards `n_features`.
    fn find_split(&mut self, idx: &[usize], counts: &[usize]) -> Option<Split> {
        let mut order: Vec<usize> = (0..self.data.d()).collect();
        order.shuffle(&mut self.rng);

        let mut best: Option<Split> = None;
        let mut visited = 0;
        for feature in order {
            if visited == self.n_features {
                break;
            }
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &j| {
                let v = self.data.value(j, feature);
                (lo.min(v), hi.max(v))
            });
            if lo >= hi {
                continue;
            }
            visited += 1;
            let candidate = match self.hp.splitter {
                Splitter::Best => self.best_threshold(idx, counts, feature),
                Splitter::Random => {
                    let t = self.rng.gen_range(lo..hi);
                    self.evaluate_threshold(idx, feature, t)
                }
            };
            if best.as_ref().is_none_or(|b| candidate.beats(b)) {
                best = Some(candidate);
            }
        }
        best
    }

    fn best_threshold(&self, idx: &[usize], counts: &[usize], feature: usize) -> Split {
        let mut order: Vec<(f64, usize)> = idx.iter().map(|&j| (self.data.value(j, feature), self.data.label(j))).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let mut left = vec![0usize; counts.len()];
        let mut right = counts.to_vec();
        let mut best = Split { feature, threshold: f64::NAN, impurity: f64::INFINITY };
        for i in 0..n - 1 {
            let (v, y) = order[i];
            left[y] += 1;
            right[y] -= 1;
            let next = order[i + 1].0;
            if v == next {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let imp = (nl as f64 * impurity_of(&left, nl, self.hp.criterion)
                + nr as f64 * impurity_of(&right, nr, self.hp.criterion))
                / n as f64;
            let mut threshold = v + (next - v) / 2.0;
            if threshold >= next {
                threshold = v;
            }
            let candidate = Split { feature, threshold, impurity: imp };
            if candidate.beats(&best) {
                best = candidate;
            }
        }
        best
    }

    fn evaluate_threshold(&self, idx: &[usize], feature: usize, threshold: f64) -> Split {
        let k = self.data.n_classes();
        let mut left = vec![0usize; k];
        let mut right = vec![0usize; k];
        for &j in idx {
            if self.data.value(j, feature) <= threshold {
                left[self.data.label(j)] += 1;
            } else {
                right[self.data.label(j)] += 1;
            }
        }
        let nl: usize = left.iter().sum();
        let nr: usize = right.iter().sum();
        let n = (nl + nr) as f64;
        let part = |c: &[usize], m: usize| if m == 0 { 0.0 } else { m as f64 * impurity_of(c, m, self.hp.criterion) };
        Split { feature, threshold, impurity: (part(&left, nl) + part(&right, nr)) / n }
    }

    /// Replaces a threshold by its 3-decimal rounding when that lands in the
    /// same gap between consecutive dataset values, so rendered rules cover
    /// exactly the same instances as the stored ones.
    fn snap(&self, feature: usize, threshold: f64) -> f64 {
        let grid = &self.grid[feature];
        let above = grid.partition_point(|&v| v <= threshold);
        let lo = if above == 0 { f64::NEG_INFINITY } else { grid[above - 1] };
        let hi = grid.get(above).copied().unwrap_or(f64::INFINITY);
        let rounded: f64 = format!("{threshold:.3}").parse().unwrap_or(threshold);
        if lo <= rounded && rounded < hi {
            rounded
        } else {
            threshold
        }
    }
}

fn value_grid(data: &Dataset) -> Vec<Vec<f64>> {
    (0..data.d())
        .map(|k| {
            let mut vals: Vec<f64> = (0..data.n()).map(|j| data.value(j, k)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals
        })
        .collect()
}

/// Greedy recursive partitioning. Stops at `max_depth`, on pure nodes, or
/// when every examined feature is constant on the node.
pub fn train_tree(data: &Dataset, hp: &HyperParams) -> DecisionTree {
    train_with_grid(data, hp, value_grid(data))
}

fn train_with_grid(data: &Dataset, hp: &HyperParams, grid: Vec<Vec<f64>>) -> DecisionTree {
    let mut builder = Builder {
        data,
        hp: *hp,
        n_features: hp.max_features.count(data.d()),
        grid,
        rng: rng_stream(hp.seed, 0),
    };
    let root = builder.build((0..data.n()).collect(), 0);
    let depth = root.depth();
    DecisionTree { root, hyperparams: *hp, depth }
}

/// The full hyper-parameter grid for depths `1..=max_depth_cap`, in the
/// order criterion, splitter, max_features, depth. Combination `i` is
/// seeded with `base_seed + i`.
pub fn grid(max_depth_cap: usize, base_seed: u64) -> Vec<HyperParams> {
    let mut out = Vec::with_capacity(8 * max_depth_cap);
    for criterion in [Criterion::Gini, Criterion::Entropy] {
        for splitter in [Splitter::Best, Splitter::Random] {
            for max_features in [MaxFeatures::Sqrt, MaxFeatures::Log2] {
                for max_depth in 1..=max_depth_cap {
                    let seed = base_seed.wrapping_add(out.len() as u64);
                    out.push(HyperParams { criterion, splitter, max_depth, max_features, seed });
                }
            }
        }
    }
    out
}

/// One tree per grid combination, trained in parallel.
pub fn sweep(data: &Dataset, max_depth_cap: usize, base_seed: u64) -> Vec<DecisionTree> {
    let values = value_grid(data);
    grid(max_depth_cap, base_seed)
        .par_iter()
        .map(|hp| train_with_grid(data, hp, values.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(criterion: Criterion, splitter: Splitter, max_depth: usize) -> HyperParams {
        HyperParams { criterion, splitter, max_depth, max_features: MaxFeatures::Sqrt, seed: 7 }
    }

    fn xor() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec!["a".into(), "b".into()],
            vec![0, 0, 1, 1],
            vec!["p".into(), "q".into()],
        )
        .unwrap()
    }

    #[test]
    fn impurity_values() {
        assert!((impurity(&[50, 50, 50], Criterion::Gini).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(impurity(&[10, 0], Criterion::Entropy).unwrap(), 0.0);
        assert!((impurity(&[25, 75], Criterion::Gini).unwrap() - 0.375).abs() < 1e-12);
        assert!((impurity(&[5, 5], Criterion::Entropy).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(impurity(&[0, 0], Criterion::Gini), Err(Error::EmptyNode)));
    }

    #[test]
    fn max_features_rounds_up() {
        assert_eq!(MaxFeatures::Sqrt.count(1), 1);
        assert_eq!(MaxFeatures::Log2.count(1), 1);
        assert_eq!(MaxFeatures::Sqrt.count(13), 4);
        assert_eq!(MaxFeatures::Log2.count(13), 4);
        assert_eq!(MaxFeatures::Log2.count(4), 2);
    }

    #[test]
    fn pure_data_gives_single_leaf() {
        let data = Dataset::new(
            vec![vec![1.0], vec![2.0], vec![3.0]],
            vec!["x".into()],
            vec![1, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let tree = train_tree(&data, &hp(Criterion::Gini, Splitter::Best, 4));
        assert_eq!(tree.depth, 0);
        assert_eq!(tree.root, TreeNode::Leaf { class: 1, counts: vec![0, 3] });
    }

    #[test]
    fn xor_stump_splits_with_impure_leaves() {
        let data = xor();
        // Oracle: no axis-aligned threshold separates the classes.
        for k in 0..2 {
            for t in [-0.5, 0.5, 1.5] {
                let left: Vec<usize> = (0..4).filter(|&j| data.value(j, k) <= t).map(|j| data.label(j)).collect();
                let right: Vec<usize> = (0..4).filter(|&j| data.value(j, k) > t).map(|j| data.label(j)).collect();
                let pure = |s: &[usize]| s.windows(2).all(|w| w[0] == w[1]);
                assert!(!(pure(&left) && pure(&right)));
            }
        }
        let tree = train_tree(&data, &hp(Criterion::Gini, Splitter::Best, 1));
        assert_eq!(tree.depth, 1);
        match &tree.root {
            TreeNode::Internal { feature, threshold, left, right } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                assert_eq!(**left, TreeNode::Leaf { class: 0, counts: vec![1, 1] });
                assert_eq!(**right, TreeNode::Leaf { class: 0, counts: vec![1, 1] });
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
    }

    #[test]
    fn separable_line_is_fit_at_depth_one() {
        let xs = [0.3, 1.2, 2.2, 3.1, 7.0, 8.5, 9.9];
        let data = Dataset::new(
            xs.iter().map(|&x| vec![x]).collect(),
            vec!["x".into()],
            vec![0, 0, 0, 0, 1, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        for criterion in [Criterion::Gini, Criterion::Entropy] {
            let tree = train_tree(&data, &hp(criterion, Splitter::Best, 1));
            assert!((0..data.n()).all(|j| tree.predict(data.row(j)) == data.label(j)));
            assert!(matches!(tree.root, TreeNode::Internal { threshold, .. } if threshold == 5.05));
        }
    }

    #[test]
    fn sweep_size_and_order() {
        let trees = sweep(&xor(), 3, 100);
        assert_eq!(trees.len(), 24);
        assert_eq!(sweep(&xor(), 1, 0).len(), 8);
        assert_eq!(trees[0].hyperparams.seed, 100);
        assert_eq!(trees[23].hyperparams.seed, 123);
        assert_eq!(trees[23].hyperparams.criterion, Criterion::Entropy);
        assert!(trees.iter().all(|t| t.depth <= t.hyperparams.max_depth));
    }

    #[test]
    fn dump_lists_every_node() {
        let tree = train_tree(&xor(), &hp(Criterion::Gini, Splitter::Best, 1));
        let text = tree.dump(&["a".into(), "b".into()], &["p".into(), "q".into()]);
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("a <= 0.5\n  class=p"));
    }
}
