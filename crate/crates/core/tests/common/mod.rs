#![allow(dead_code)]

use rand::Rng as _;
use rulecover::rules::{Condition, Op, Rule};
use rulecover::{Dataset, Rng};

/// Integer-valued features in `0..levels`, labels uniform over `classes`.
pub fn random_dataset(rng: &mut Rng, n: usize, d: usize, levels: u32, classes: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| f64::from(rng.gen_range(0..levels))).collect()).collect();
    let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    // Every class present.
    for (c, l) in labels.iter_mut().take(classes).enumerate() {
        *l = c;
    }
    Dataset::new(
        rows,
        (0..d).map(|k| format!("f{k}")).collect(),
        labels,
        (0..classes).map(|c| format!("c{c}")).collect(),
    )
    .unwrap()
}

/// Rules with one to three half-integer thresholds.
pub fn random_rules(rng: &mut Rng, m: usize, d: usize, levels: u32, classes: usize) -> Vec<Rule> {
    (0..m)
        .map(|_| {
            let len = rng.gen_range(1..=3);
            let conditions = (0..len)
                .map(|_| Condition {
                    feature: rng.gen_range(0..d),
                    op: if rng.gen_bool(0.5) { Op::Le } else { Op::Gt },
                    threshold: f64::from(rng.gen_range(0..levels)) + 0.5 - f64::from(rng.gen_bool(0.5)),
                })
                .collect();
            Rule::new(conditions, rng.gen_range(0..classes))
        })
        .collect()
}
