use std::path::PathBuf;

use rulecover::cart::{sweep, TreeNode};
use rulecover::dataset::{load_csv, prepare, CsvOptions, MissingPolicy};
use rulecover::problem::default_epsilon;
use rulecover::rules::{extract_rules, parse_rule, render, rule_pool, rule_stats, simplify};
use rulecover::{Chromosome, Dataset, Problem};

fn dataset(file: &str, target: &str) -> Dataset {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file);
    let raw = load_csv(path, target, &CsvOptions::default()).unwrap();
    prepare(&raw, MissingPolicy::CategoryAsIs).unwrap().0
}

#[test]
fn iris_shape() {
    let data = dataset("iris.csv", "class");
    assert_eq!((data.n(), data.d(), data.n_classes()), (150, 4, 3));
    assert_eq!(data.class_counts(), vec![50, 50, 50]);
}

#[test]
fn iris_setosa_rule() {
    let data = dataset("iris.csv", "class");
    let rule = parse_rule("IF petal length <= 2.45 THEN CLASS=Iris-setosa", data.feature_names(), data.class_names()).unwrap();
    let stats = rule_stats(&rule, &data);
    assert_eq!((stats.cc, stats.ic), (50, 0));
}

#[test]
fn iris_sweep_and_pool() {
    let data = dataset("iris.csv", "class");
    let trees = sweep(&data, 3, 0);
    assert_eq!(trees.len(), 24);
    // Each node samples two of four features, so only some roots see a petal column.
    let petal_roots = trees
        .iter()
        .filter(|t| matches!(&t.root, TreeNode::Internal { feature, .. } if data.feature_names()[*feature].starts_with("petal")))
        .count();
    assert!(petal_roots > 0);
    let pool = rule_pool(&trees, &data);
    let setosa = parse_rule("IF petal length <= 2.45 THEN CLASS=Iris-setosa", data.feature_names(), data.class_names()).unwrap();
    assert!(pool.iter().any(|r| rule_stats(r, &data) == rule_stats(&setosa, &data)));
    // The reference pool has 64 rules; only the order of magnitude is seed-independent.
    assert!((20..=200).contains(&pool.len()), "pool size {}", pool.len());
    for r in &pool {
        assert_eq!(&simplify(r).unwrap(), r);
        let text = render(r, data.feature_names(), data.class_names());
        assert_eq!(&parse_rule(&text, data.feature_names(), data.class_names()).unwrap(), r);
    }
}

#[test]
fn wine_and_zoo_sweeps() {
    // Eight hyper-parameter combinations per depth in 1..=cap.
    assert_eq!(sweep(&dataset("wine.csv", "class"), 5, 0).len(), 40);
    let zoo = dataset("zoo.csv", "type");
    assert_eq!((zoo.n(), zoo.n_classes()), (101, 7));
    assert_eq!(sweep(&zoo, 5, 0).len(), 40);
}

#[test]
fn reference_iris_explanation() {
    let data = dataset("iris.csv", "class");
    let texts = [
        "IF petal length <= 2.45 THEN CLASS=Iris-setosa",
        "IF petal width > 0.8 AND petal length <= 4.75 THEN CLASS=Iris-versicolor",
        "IF petal width > 1.75 THEN CLASS=Iris-virginica",
    ];
    let rules: Vec<_> = texts.iter().map(|t| parse_rule(t, data.feature_names(), data.class_names()).unwrap()).collect();
    let p = Problem::build(rules, &data, default_epsilon(data.n()), 4, 5).unwrap();
    let all = Chromosome::from_bits(vec![true; 3]);
    let e = p.evaluate(&all);
    assert_eq!(e.complexity, 4);
    assert!(e.errors <= 5);
    assert!(p.feasible(&all));
    assert!((e.coverage_score - 0.94).abs() < 0.02, "coverage {}", e.coverage_score);
}

#[test]
fn single_tree_has_no_conflicts() {
    let data = dataset("iris.csv", "class");
    for tree in sweep(&data, 3, 7) {
        let rules = extract_rules(&tree);
        let m = rules.len();
        let p = Problem::build(rules, &data, 1.0, 100, 150).unwrap();
        for i in 0..m {
            for k in 0..m {
                assert_eq!(p.conflict(i, k), 0);
            }
        }
        assert_eq!(p.evaluate(&Chromosome::from_bits(vec![true; m])).covered, data.n());
    }
}
