//! Run configuration: a flat TOML file merged with command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rulecover::dataset::MissingPolicy;
use rulecover::qga::CrossoverKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[value(name = "qga")]
    Qga,
    #[value(name = "rf_hc")]
    RfHc,
    #[value(name = "irfre")]
    Irfre,
    #[value(name = "irfre_rfhc")]
    IrfreRfHc,
    #[value(name = "forexpp")]
    Forexpp,
}

impl Algorithm {
    pub const COMPARED: [Algorithm; 4] = [Algorithm::Qga, Algorithm::RfHc, Algorithm::Irfre, Algorithm::IrfreRfHc];

    /// Directory and report name.
    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Qga => "qga",
            Algorithm::RfHc => "rf_hc",
            Algorithm::Irfre => "irfre",
            Algorithm::IrfreRfHc => "irfre_rfhc",
            Algorithm::Forexpp => "forexpp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Qga => "QGA",
            Algorithm::RfHc => "RF+HC",
            Algorithm::Irfre => "IRFRE",
            Algorithm::IrfreRfHc => "IRFRE RF+HC",
            Algorithm::Forexpp => "ForEx++",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub target: String,
    pub delimiter: char,
    pub has_header: bool,
    pub missing: MissingPolicy,
    pub depth_cap: usize,
    /// Complexity budget; derived from the best tree when absent.
    pub bc: Option<u64>,
    /// Error budget; takes precedence over `error_frac`.
    pub be: Option<u64>,
    pub error_frac: Option<f64>,
    /// Conflict penalty; `1/N` when absent.
    pub epsilon: Option<f64>,
    pub algo: Vec<Algorithm>,
    pub repeats: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub crossover: CrossoverKind,
    pub generations: usize,
    pub population: usize,
    pub seeding: bool,
    pub rf_hc_trials: usize,
    /// Record zero wall time so repeated runs give identical reports.
    pub omit_timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::new(),
            target: "class".into(),
            delimiter: ',',
            has_header: true,
            missing: MissingPolicy::default(),
            depth_cap: 3,
            bc: None,
            be: None,
            error_frac: None,
            epsilon: None,
            algo: vec![Algorithm::Qga],
            repeats: 1,
            seed: 0,
            out: PathBuf::from("out"),
            crossover: CrossoverKind::Uniform,
            generations: 100,
            population: 50,
            seeding: true,
            rf_hc_trials: 30,
            omit_timing: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(!self.data.as_os_str().is_empty(), "no dataset given");
        anyhow::ensure!(self.repeats >= 1, "repeats must be at least 1");
        anyhow::ensure!(self.depth_cap >= 1, "depth cap must be at least 1");
        anyhow::ensure!(!self.algo.is_empty(), "no algorithm given");
        anyhow::ensure!(self.population >= 2, "population must be at least 2");
        if let Some(f) = self.error_frac {
            anyhow::ensure!((0.0..=1.0).contains(&f), "error fraction must lie in [0, 1]");
        }
        if let Some(e) = self.epsilon {
            anyhow::ensure!(e >= 0.0 && e.is_finite(), "epsilon must be finite and non-negative");
        }
        anyhow::ensure!(self.delimiter.is_ascii(), "delimiter must be a single ASCII character");
        Ok(())
    }

    /// File stem of the dataset path.
    pub fn dataset_name(&self) -> String {
        self.data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig { data: "iris.csv".into(), bc: Some(4), algo: Algorithm::COMPARED.to_vec(), ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = RunConfig::from_toml("data = \"wine.csv\"\nbc = 8\nbe = 9\nalgo = [\"rf_hc\"]\nmissing = \"drop_rows\"\n").unwrap();
        assert_eq!((cfg.bc, cfg.be, cfg.repeats), (Some(8), Some(9), 1));
        assert_eq!(cfg.algo, vec![Algorithm::RfHc]);
        assert_eq!(cfg.missing, MissingPolicy::DropRows);
        assert_eq!(cfg.dataset_name(), "wine");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("dat = \"x\"").is_err());
    }

    #[test]
    fn validation() {
        let ok = RunConfig { data: "x.csv".into(), ..Default::default() };
        assert!(ok.validate().is_ok());
        assert!(RunConfig { repeats: 0, ..ok.clone() }.validate().is_err());
        assert!(RunConfig { error_frac: Some(1.5), ..ok.clone() }.validate().is_err());
        assert!(RunConfig::default().validate().is_err());
    }
}
