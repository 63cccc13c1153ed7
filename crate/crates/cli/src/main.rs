use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rulecover::baselines::rule_score;
use rulecover::dataset::MissingPolicy;
use rulecover::qga::CrossoverKind;
use rulecover::rules::{render, rule_stats};
use rulecover_cli::pipeline::{budget_from_trees, load_dataset, prepare, run_repeats};
use rulecover_cli::report::{table_header, write_artifacts, RunReport};
use rulecover_cli::{Algorithm, RunConfig};

/// Select small, high-coverage rule sets from decision-tree rules.
#[derive(Parser)]
#[command(name = "rulecover", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one selector and write its report, explanation and trace.
    Explain(Options),
    /// Run several selectors on a shared rule pool and print a table.
    Compare(Options),
    /// Print complexity and errors of the least complex full-depth tree.
    Budget(Options),
    /// Dump the rule pool with per-rule statistics.
    Rules(Options),
}

#[derive(Args, Default)]
struct Options {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    target: Option<String>,
    /// Selector(s), comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    algo: Vec<Algorithm>,
    /// Complexity budget (total number of conditions).
    #[arg(long)]
    bc: Option<u64>,
    /// Error budget (total misclassifications).
    #[arg(long)]
    be: Option<u64>,
    /// Error budget as a fraction of the instances.
    #[arg(long)]
    error_frac: Option<f64>,
    /// Conflict penalty (default 1/N).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    depth_cap: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// drop_rows, impute_mode_mean or category_as_is.
    #[arg(long)]
    missing: Option<MissingPolicy>,
    /// one_point, two_point or uniform.
    #[arg(long)]
    crossover: Option<CrossoverKind>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// Do not inject RF+HC results into the initial QGA population.
    #[arg(long)]
    no_seeding: bool,
    #[arg(long)]
    delimiter: Option<char>,
    /// The CSV file has no header row; columns are named col0, col1, ...
    #[arg(long)]
    no_header: bool,
    /// Record zero wall time so that fixed-seed reports are byte-identical.
    #[arg(long)]
    omit_timing: bool,
}

impl Options {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(data, target, depth_cap, repeats, seed, out, missing, crossover, generations, population, delimiter);
        if self.bc.is_some() {
            cfg.bc = self.bc;
        }
        if self.be.is_some() {
            cfg.be = self.be;
        }
        if self.error_frac.is_some() {
            cfg.error_frac = self.error_frac;
        }
        if self.epsilon.is_some() {
            cfg.epsilon = self.epsilon;
        }
        if !self.algo.is_empty() {
            cfg.algo = self.algo;
        }
        cfg.seeding &= !self.no_seeding;
        cfg.has_header &= !self.no_header;
        cfg.omit_timing |= self.omit_timing;
        Ok(cfg)
    }
}

fn run_algorithms(cfg: &RunConfig) -> anyhow::Result<()> {
    let prep = prepare(cfg)?;
    eprintln!(
        "{}: {} instances, {} trees, {} rules, budgets ({}, {})",
        prep.name,
        prep.data.n(),
        prep.trees,
        prep.problem.m(),
        prep.problem.budget_complexity(),
        prep.problem.budget_errors()
    );
    println!("{}", table_header());
    for &algo in &cfg.algo {
        let outcomes = run_repeats(&prep, algo, cfg)?;
        let report = RunReport::build(&prep, algo, cfg, &outcomes);
        let dir = write_artifacts(&cfg.out, &report, &outcomes)?;
        println!("{}", report.table_row());
        eprintln!("  wrote {}", dir.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Explain(opts) => {
            let cfg = opts.resolve()?;
            anyhow::ensure!(cfg.algo.len() == 1, "explain takes a single --algo; use compare for several");
            run_algorithms(&cfg)
        }
        Command::Compare(opts) => {
            let explicit = !opts.algo.is_empty();
            let mut cfg = opts.resolve()?;
            if !explicit && cfg.algo.len() < 2 {
                cfg.algo = Algorithm::COMPARED.to_vec();
            }
            anyhow::ensure!(cfg.algo.len() >= 2, "compare needs at least two algorithms");
            run_algorithms(&cfg)
        }
        Command::Budget(opts) => {
            let cfg = opts.resolve()?;
            cfg.validate()?;
            let (data, _) = load_dataset(&cfg)?;
            let trees = rulecover::cart::sweep(&data, cfg.depth_cap, cfg.seed);
            let (c, e) = budget_from_trees(&trees, &data);
            println!("least complex depth-{} tree: complexity {c}, errors {e}", cfg.depth_cap);
            println!("suggested budgets: --bc {} --be {e}", c.saturating_sub(1));
            Ok(())
        }
        Command::Rules(opts) => {
            let cfg = opts.resolve()?;
            let prep = prepare(&cfg).context("building the rule pool")?;
            let (features, classes) = (prep.data.feature_names(), prep.data.class_names());
            println!("# {} rules from {} trees", prep.problem.m(), prep.trees);
            println!("length\tcc\tic\tscore\trule");
            for r in prep.problem.rules() {
                let s = rule_stats(r, &prep.data);
                println!("{}\t{}\t{}\t{:.3}\t{}", s.length, s.cc, s.ic, rule_score(&s), render(r, features, classes));
            }
            Ok(())
        }
    }
}
