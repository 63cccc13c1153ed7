use std::path::{Path, PathBuf};
use std::process::Command;

use rulecover::problem::Problem;
use rulecover::rules::parse_rule;
use rulecover::Chromosome;
use rulecover_cli::pipeline::load_dataset;
use rulecover_cli::report::RunReport;
use rulecover_cli::RunConfig;

fn iris() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv")
}

fn rulecover(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rulecover")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn explain(out: &Path, algo: &str, repeats: &str) {
    rulecover(&[
        "explain",
        "--data",
        iris().to_str().unwrap(),
        "--algo",
        algo,
        "--bc",
        "4",
        "--be",
        "5",
        "--repeats",
        repeats,
        "--seed",
        "3",
        "--generations",
        "20",
        "--omit-timing",
        "--out",
        out.to_str().unwrap(),
    ]);
}

fn report(dir: &Path, algo: &str) -> RunReport {
    serde_json::from_str(&std::fs::read_to_string(dir.join("iris").join(algo).join("report.json")).unwrap()).unwrap()
}

#[test]
fn fixed_seed_reports_are_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    explain(a.path(), "qga", "1");
    explain(b.path(), "qga", "1");
    for file in ["report.json", "explanation.txt", "trace.csv"] {
        let read = |d: &Path| std::fs::read(d.join("iris/qga").join(file)).unwrap();
        let (x, y) = (read(a.path()), read(b.path()));
        // Output directories differ, and the report records them.
        let strip = |v: Vec<u8>, d: &Path| String::from_utf8(v).unwrap().replace(d.to_str().unwrap(), "OUT");
        assert_eq!(strip(x, a.path()), strip(y, b.path()), "{file}");
    }
}

#[test]
fn forexpp_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    explain(dir.path(), "forexpp", "5");
    let r = report(dir.path(), "forexpp");
    assert_eq!(r.runs.len(), 5);
    assert_eq!(r.aggregate.coverage_score.std, 0.0);
    assert_eq!(r.aggregate.complexity.std, 0.0);
    assert!(r.is_consistent());
}

#[test]
fn explanation_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    explain(dir.path(), "rf_hc", "4");
    let r = report(dir.path(), "rf_hc");
    assert!(r.is_consistent());
    let cfg = RunConfig { data: iris(), ..Default::default() };
    let (data, _) = load_dataset(&cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("iris/rf_hc/explanation.txt")).unwrap();
    let rules: Vec<_> =
        text.lines().map(|l| parse_rule(l, data.feature_names(), data.class_names()).unwrap()).collect();
    assert_eq!(rules.len(), r.runs[r.best_run].rules);
    let m = rules.len();
    let p = Problem::build(rules, &data, r.epsilon, r.budget_complexity, r.budget_errors).unwrap();
    let e = p.evaluate(&Chromosome::from_bits(vec![true; m]));
    let best = &r.runs[r.best_run];
    assert_eq!((e.complexity, e.errors, e.covered), (best.complexity, best.errors, best.covered));
    assert_eq!(e.coverage_score, best.coverage_score);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "data = {:?}\nalgo = [\"rf_hc\"]\nbc = 2\nbe = 0\nrepeats = 2\nomit_timing = true\nout = {:?}\n",
            iris(),
            dir.path()
        ),
    )
    .unwrap();
    rulecover(&["explain", "--config", cfg.to_str().unwrap(), "--bc", "3"]);
    let r = report(dir.path(), "rf_hc");
    assert_eq!((r.budget_complexity, r.budget_errors, r.runs.len()), (3, 0, 2));
    assert!(r.runs.iter().all(|run| run.feasible && run.seconds == 0.0));
}

#[test]
fn budget_and_rules_subcommands() {
    let out = rulecover(&["budget", "--data", iris().to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("suggested budgets"));
    let out = rulecover(&["rules", "--data", iris().to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.contains("IF ")).count() > 10);
}

#[test]
fn compare_writes_one_report_per_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    rulecover(&[
        "compare",
        "--data",
        iris().to_str().unwrap(),
        "--algo",
        "rf_hc,rf_hc,forexpp",
        "--bc",
        "4",
        "--be",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(dir.path().join("iris/rf_hc/report.json").exists());
    assert!(dir.path().join("iris/forexpp/explanation.txt").exists());
}

#[test]
fn impossible_budgets_give_empty_explanation() {
    let dir = tempfile::tempdir().unwrap();
    rulecover(&[
        "explain",
        "--data",
        iris().to_str().unwrap(),
        "--algo",
        "irfre",
        "--bc",
        "0",
        "--be",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let r = report(dir.path(), "irfre");
    assert_eq!(r.runs[0].coverage_score, 0.0);
    assert!(r.best_rules.is_empty());
}

#[test]
fn iris_best_tree_leaves_room_for_tight_budget() {
    let cfg = RunConfig { data: iris(), ..Default::default() };
    let (data, _) = load_dataset(&cfg).unwrap();
    let (c, e) = rulecover_cli::pipeline::budget_from_best_tree(&data, 3, 0);
    assert!(c >= 5, "c* = {c}");
    assert!(e >= 5, "e* = {e}");
}
