use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    #[error("impurity is undefined for an empty node")]
    EmptyNode,

    #[error("rule has an empty feasible interval on feature {feature}")]
    VacuousRule { feature: usize },

    #[error("degenerate problem: {0}")]
    DegenerateProblem(String),

    #[error("exhaustive search refused: {rules} rules exceeds the limit of {limit}")]
    TooLarge { rules: usize, limit: usize },

    #[error("no feasible individual found after {attempts} attempts")]
    Initialization { attempts: usize },

    #[error("invalid rule text {text:?}: {message}")]
    RuleSyntax { text: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
