//! Decision rules: extraction from trees, simplification, deduplication,
//! statistics and text rendering.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cart::{DecisionTree, TreeNode};
use crate::dataset::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    /// Inclusive upper bound.
    #[serde(rename = "<=")]
    Le,
    /// Strict lower bound.
    #[serde(rename = ">")]
    Gt,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Le => "<=",
            Op::Gt => ">",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: usize,
    pub op: Op,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, x: &[f64]) -> bool {
        let v = x[self.feature];
        match self.op {
            Op::Le => v <= self.threshold,
            Op::Gt => v > self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub class: usize,
}

impl Rule {
    pub fn new(conditions: Vec<Condition>, class: usize) -> Self {
        Self { conditions, class }
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    /// True iff every condition holds; the empty conjunction covers everything.
    pub fn covers(&self, x: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }

    /// First feature whose `>` bound is not below its `<=` bound.
    fn empty_interval(&self) -> Option<usize> {
        let mut features: Vec<usize> = self.conditions.iter().map(|c| c.feature).collect();
        features.sort_unstable();
        features.dedup();
        features.into_iter().find(|&k| {
            let upper = self.bound(k, Op::Le);
            let lower = self.bound(k, Op::Gt);
            matches!((lower, upper), (Some(a), Some(b)) if b <= a)
        })
    }

    fn bound(&self, feature: usize, op: Op) -> Option<f64> {
        let vals = self.conditions.iter().filter(|c| c.feature == feature && c.op == op).map(|c| c.threshold);
        match op {
            Op::Le => vals.reduce(f64::min),
            Op::Gt => vals.reduce(f64::max),
        }
    }

    pub fn is_vacuous(&self) -> bool {
        self.empty_interval().is_some()
    }
}

/// One rule per leaf, conditions in root-to-leaf order, leaves left to right.
pub fn extract_rules(tree: &DecisionTree) -> Vec<Rule> {
    fn walk(node: &TreeNode, path: &mut Vec<Condition>, out: &mut Vec<Rule>) {
        match node {
            TreeNode::Leaf { class, .. } => out.push(Rule::new(path.clone(), *class)),
            TreeNode::Internal { feature, threshold, left, right } => {
                path.push(Condition { feature: *feature, op: Op::Le, threshold: *threshold });
                walk(left, path, out);
                path.last_mut().unwrap().op = Op::Gt;
                walk(right, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::with_capacity(tree.leaf_count());
    walk(&tree.root, &mut Vec::new(), &mut out);
    out
}

/// Merges conditions per feature into at most one `<=` (tightest) and one
/// `>` (tightest), ordered by feature index with `<=` first.
pub fn simplify(rule: &Rule) -> Result<Rule> {
    if let Some(feature) = rule.empty_interval() {
        return Err(Error::VacuousRule { feature });
    }
    let mut features: Vec<usize> = rule.conditions.iter().map(|c| c.feature).collect();
    features.sort_unstable();
    features.dedup();
    let mut conditions = Vec::with_capacity(rule.conditions.len());
    for feature in features {
        for op in [Op::Le, Op::Gt] {
            if let Some(threshold) = rule.bound(feature, op) {
                conditions.push(Condition { feature, op, threshold });
            }
        }
    }
    Ok(Rule::new(conditions, rule.class))
}

/// Coverage and correctness counts of one rule over a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleStats {
    pub length: usize,
    pub covered: Vec<usize>,
    pub cc: usize,
    pub ic: usize,
}

impl RuleStats {
    pub fn coverage(&self) -> usize {
        self.covered.len()
    }

    /// Fraction of covered instances classified correctly, 0 when nothing is covered.
    pub fn accuracy(&self) -> f64 {
        if self.covered.is_empty() {
            0.0
        } else {
            self.cc as f64 / self.covered.len() as f64
        }
    }
}

pub fn rule_stats(rule: &Rule, data: &Dataset) -> RuleStats {
    let covered: Vec<usize> = (0..data.n()).filter(|&j| rule.covers(data.row(j))).collect();
    let cc = covered.iter().filter(|&&j| data.label(j) == rule.class).count();
    RuleStats { length: rule.len(), ic: covered.len() - cc, cc, covered }
}

/// Keeps the first rule of each (covered set, class) signature. Vacuous
/// rules are dropped.
pub fn dedup(rules: &[Rule], data: &Dataset) -> Vec<Rule> {
    let mut seen: HashSet<(Vec<u64>, usize)> = HashSet::new();
    let words = data.n().div_ceil(64);
    rules
        .iter()
        .filter(|r| !r.is_vacuous())
        .filter(|r| {
            let mut bits = vec![0u64; words];
            for j in (0..data.n()).filter(|&j| r.covers(data.row(j))) {
                bits[j / 64] |= 1 << (j % 64);
            }
            seen.insert((bits, r.class))
        })
        .cloned()
        .collect()
}

/// Trees to a simplified, deduplicated rule pool.
pub fn rule_pool(trees: &[DecisionTree], data: &Dataset) -> Vec<Rule> {
    let simplified: Vec<Rule> = trees.iter().flat_map(extract_rules).filter_map(|r| simplify(&r).ok()).collect();
    dedup(&simplified, data)
}

/// Up to three decimals with trailing zeros removed.
pub fn format_threshold(t: f64) -> String {
    let s = format!("{t:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// `IF <feature> <= <t> AND ... THEN CLASS=<class>`; an empty rule renders as `IF TRUE`.
pub fn render(rule: &Rule, feature_names: &[String], class_names: &[String]) -> String {
    let body = if rule.conditions.is_empty() {
        "TRUE".to_string()
    } else {
        rule.conditions
            .iter()
            .map(|c| format!("{} {} {}", feature_names[c.feature], c.op, format_threshold(c.threshold)))
            .collect::<Vec<_>>()
            .join(" AND ")
    };
    format!("IF {body} THEN CLASS={}", class_names[rule.class])
}

/// Inverse of [`render`]. Feature names must not contain ` AND `.
pub fn parse_rule(text: &str, feature_names: &[String], class_names: &[String]) -> Result<Rule> {
    let err = |message: &str| Error::RuleSyntax { text: text.to_string(), message: message.to_string() };
    let text_t = text.trim();
    let rest = text_t.strip_prefix("IF ").ok_or_else(|| err("missing IF"))?;
    let (body, class) = rest.rsplit_once(" THEN CLASS=").ok_or_else(|| err("missing THEN CLASS="))?;
    let class = class_names.iter().position(|c| c == class).ok_or_else(|| err("unknown class"))?;
    let mut conditions = Vec::new();
    if body != "TRUE" {
        for part in body.split(" AND ") {
            let (name, op, value) = if let Some((n, v)) = part.rsplit_once(" <= ") {
                (n, Op::Le, v)
            } else if let Some((n, v)) = part.rsplit_once(" > ") {
                (n, Op::Gt, v)
            } else {
                return Err(err("condition without <= or >"));
            };
            let feature = feature_names.iter().position(|f| f == name).ok_or_else(|| err("unknown feature"))?;
            let threshold = value.parse().map_err(|_| err("bad threshold"))?;
            conditions.push(Condition { feature, op, threshold });
        }
    }
    Ok(Rule::new(conditions, class))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(feature: usize, threshold: f64) -> Condition {
        Condition { feature, op: Op::Le, threshold }
    }

    fn gt(feature: usize, threshold: f64) -> Condition {
        Condition { feature, op: Op::Gt, threshold }
    }

    fn names(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn simplify_merges_lower_bounds() {
        let r = Rule::new(vec![gt(0, 2.45), gt(0, 3.0)], 1);
        assert_eq!(simplify(&r).unwrap(), Rule::new(vec![gt(0, 3.0)], 1));
    }

    #[test]
    fn simplify_intersects_interval() {
        let r = Rule::new(vec![le(1, 5.0), le(1, 4.0), gt(1, 1.0)], 0);
        assert_eq!(simplify(&r).unwrap(), Rule::new(vec![le(1, 4.0), gt(1, 1.0)], 0));
    }

    #[test]
    fn simplify_keeps_minimal_rules() {
        let r = Rule::new(vec![le(0, 1.0), gt(2, 0.5)], 2);
        assert_eq!(simplify(&r).unwrap(), r);
    }

    #[test]
    fn simplify_rejects_empty_interval() {
        let r = Rule::new(vec![gt(3, 2.0), le(3, 2.0)], 0);
        assert!(matches!(simplify(&r), Err(Error::VacuousRule { feature: 3 })));
    }

    #[test]
    fn covers_boundaries() {
        let r = Rule::new(vec![gt(0, 1.0), le(0, 2.0)], 0);
        assert!(!r.covers(&[1.0]));
        assert!(r.covers(&[2.0]));
        assert!(Rule::new(vec![], 0).covers(&[123.0]));
    }

    #[test]
    fn render_formats() {
        let f = vec!["petal length".to_string(), "petal width".to_string()];
        let c = vec!["Iris-setosa".to_string(), "2".to_string()];
        assert_eq!(render(&Rule::new(vec![le(0, 2.45)], 0), &f, &c), "IF petal length <= 2.45 THEN CLASS=Iris-setosa");
        assert_eq!(render(&Rule::new(vec![], 1), &f, &c), "IF TRUE THEN CLASS=2");
        assert_eq!(
            render(&Rule::new(vec![le(0, 3.82), gt(1, 0.0321)], 1), &f, &c),
            "IF petal length <= 3.82 AND petal width > 0.032 THEN CLASS=2"
        );
        assert_eq!(format_threshold(5.0), "5");
        assert_eq!(format_threshold(-0.0001), "0");
    }

    #[test]
    fn parse_inverts_render() {
        let f = names(3, "f ");
        let c = names(2, "c");
        for r in [Rule::new(vec![le(0, 2.45), gt(2, -1.5)], 1), Rule::new(vec![], 0)] {
            assert_eq!(parse_rule(&render(&r, &f, &c), &f, &c).unwrap(), r);
        }
        assert!(parse_rule("IF x THEN CLASS=c0", &f, &c).is_err());
        assert!(parse_rule("IF f 0 <= 1 THEN CLASS=nope", &f, &c).is_err());
    }

    #[test]
    fn json_shape() {
        let r = Rule::new(vec![le(0, 1.5)], 2);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"conditions":[{"feature":0,"op":"<=","threshold":1.5}],"class":2}"#);
    }

    fn toy() -> Dataset {
        Dataset::new(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec!["x".into()],
            vec![0, 0, 1, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap()
    }

    #[test]
    fn dedup_cases() {
        let data = toy();
        let r = Rule::new(vec![le(0, 1.5)], 0);
        assert_eq!(dedup(&[r.clone(), r.clone()], &data).len(), 1);
        // Same coverage, different threshold: empirically equivalent.
        assert_eq!(dedup(&[r.clone(), Rule::new(vec![le(0, 1.2)], 0)], &data), vec![r.clone()]);
        // Same coverage, different class: kept.
        assert_eq!(dedup(&[r.clone(), Rule::new(vec![le(0, 1.5)], 1)], &data).len(), 2);
        // Disjoint coverage: kept, order preserved.
        let other = Rule::new(vec![gt(0, 1.5)], 1);
        assert_eq!(dedup(&[other.clone(), r.clone()], &data), vec![other, r]);
        // Vacuous rules vanish.
        assert!(dedup(&[Rule::new(vec![gt(0, 2.0), le(0, 1.0)], 0)], &data).is_empty());
    }

    #[test]
    fn stats() {
        let data = toy();
        let s = rule_stats(&Rule::new(vec![le(0, 2.5)], 0), &data);
        assert_eq!((s.length, s.cc, s.ic, s.covered.clone()), (1, 2, 1, vec![0, 1, 2]));
        let all = rule_stats(&Rule::new(vec![], 1), &data);
        assert_eq!((all.cc, all.ic), (2, 2));
        let none = rule_stats(&Rule::new(vec![gt(0, 9.0)], 1), &data);
        assert_eq!((none.cc, none.ic, none.accuracy()), (0, 0, 0.0));
    }
}
