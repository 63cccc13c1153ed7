//! Multi-run reports and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rulecover::qga::StopReason;
use rulecover::rules::render;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, RunConfig};
use crate::pipeline::{Prepared, RunOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub complexity: u64,
    pub errors: u64,
    pub coverage_score: f64,
    pub covered: usize,
    pub conflicts: u64,
    pub rules: usize,
    pub feasible: bool,
    /// Wall time rounded to 0.1 s.
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop: Option<StopReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation, 0 for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub complexity: Stat,
    pub errors: Stat,
    pub coverage_score: Stat,
    pub seconds: Stat,
}

impl Aggregate {
    pub fn of(runs: &[RunRecord]) -> Self {
        let col = |f: fn(&RunRecord) -> f64| Stat::of(&runs.iter().map(f).collect::<Vec<_>>());
        Self {
            complexity: col(|r| r.complexity as f64),
            errors: col(|r| r.errors as f64),
            coverage_score: col(|r| r.coverage_score),
            seconds: col(|r| r.seconds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub config: RunConfig,
    pub instances: usize,
    pub trees: usize,
    pub pool_size: usize,
    pub budget_complexity: u64,
    pub budget_errors: u64,
    pub epsilon: f64,
    pub runs: Vec<RunRecord>,
    pub aggregate: Aggregate,
    /// Index into `runs` of the highest coverage score (first on ties).
    pub best_run: usize,
    pub best_coverage_score: f64,
    pub best_rules: Vec<String>,
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl RunReport {
    pub fn build(prep: &Prepared, algorithm: Algorithm, config: &RunConfig, outcomes: &[RunOutcome]) -> Self {
        let p = &prep.problem;
        let runs: Vec<RunRecord> = outcomes
            .iter()
            .map(|o| RunRecord {
                seed: o.seed,
                complexity: o.evaluation.complexity,
                errors: o.evaluation.errors,
                coverage_score: o.evaluation.coverage_score,
                covered: o.evaluation.covered,
                conflicts: o.evaluation.conflicts,
                rules: o.chromosome.count_ones(),
                feasible: p.feasible(&o.chromosome),
                seconds: round1(o.seconds),
                stop: o.stop,
                generations: o.stop.map(|_| o.trace.len().saturating_sub(1)),
            })
            .collect();
        let best_run = runs
            .iter()
            .enumerate()
            .fold(0, |best, (i, r)| if r.coverage_score > runs[best].coverage_score { i } else { best });
        let best_rules = outcomes
            .get(best_run)
            .map(|o| {
                p.selected_rules(&o.chromosome)
                    .iter()
                    .map(|r| render(r, prep.data.feature_names(), prep.data.class_names()))
                    .collect()
            })
            .unwrap_or_default();
        Self {
            dataset: prep.name.clone(),
            algorithm,
            config: config.clone(),
            instances: prep.data.n(),
            trees: prep.trees,
            pool_size: p.m(),
            budget_complexity: p.budget_complexity(),
            budget_errors: p.budget_errors(),
            epsilon: p.epsilon(),
            aggregate: Aggregate::of(&runs),
            best_coverage_score: runs.get(best_run).map_or(0.0, |r| r.coverage_score),
            best_run,
            best_rules,
            runs,
        }
    }

    /// Aggregates agree with the per-run records.
    pub fn is_consistent(&self) -> bool {
        self.aggregate == Aggregate::of(&self.runs)
    }

    pub fn table_row(&self) -> String {
        let a = &self.aggregate;
        format!(
            "{:<10} {:<12} {:>5.1} / {:<4} {:>5.1} / {:<4} {:>7.1}s  {:.1}(±{:.1})  best {:.1}",
            self.dataset,
            self.algorithm.to_string(),
            a.complexity.mean,
            self.budget_complexity,
            a.errors.mean,
            self.budget_errors,
            a.seconds.mean,
            100.0 * a.coverage_score.mean,
            100.0 * a.coverage_score.std,
            100.0 * self.best_coverage_score,
        )
    }

    pub fn explanation(&self) -> String {
        self.best_rules.iter().map(|r| format!("{r}\n")).collect()
    }
}

pub fn table_header() -> String {
    format!(
        "{:<10} {:<12} {:>12} {:>12} {:>9}  {}",
        "dataset", "algorithm", "complexity", "errors", "time", "coverage %"
    )
}

pub fn trace_csv(outcomes: &[RunOutcome]) -> String {
    let mut out = String::from("run,seed,generation,min,mean,max,diversity\n");
    for (i, o) in outcomes.iter().enumerate() {
        for t in &o.trace {
            writeln!(out, "{i},{},{},{},{},{},{}", o.seed, t.generation, t.min, t.mean, t.max, t.diversity).unwrap();
        }
    }
    out
}

/// Writes `report.json`, `explanation.txt` and, for QGA, `trace.csv` under
/// `<out>/<dataset>/<algorithm>/`. Returns that directory.
pub fn write_artifacts(out: &Path, report: &RunReport, outcomes: &[RunOutcome]) -> anyhow::Result<PathBuf> {
    let dir = out.join(&report.dataset).join(report.algorithm.key());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    fs::write(dir.join("explanation.txt"), report.explanation())?;
    if report.algorithm == Algorithm::Qga {
        fs::write(dir.join("trace.csv"), trace_csv(outcomes))?;
    }
    Ok(dir)
}
