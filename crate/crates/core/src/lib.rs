//! Explain a tabular classification dataset with a small set of decision rules.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: load a CSV table and one-hot encode it into a numeric matrix.
//! 2. [`cart`]: train a sweep of CART trees over a fixed hyper-parameter grid.
//! 3. [`rules`]: turn every root-to-leaf path into a rule, simplify and deduplicate.
//! 4. [`problem`]: build the budgeted maximum coverage instance over the rule pool.
//! 5. [`qga`] / [`baselines`]: select a rule subset under the complexity and error budgets.
//!
//! The [`qubo`] module holds the two inner genetic algorithms used by [`qga`]
//! to synthesize feasible starting points and feasibility-preserving mutations.

pub mod baselines;
pub mod cart;
pub mod dataset;
mod error;
pub mod problem;
pub mod qga;
pub mod qubo;
pub mod rules;

pub use error::{Error, Result};

pub use cart::{Criterion, DecisionTree, HyperParams, MaxFeatures, Splitter};
pub use dataset::{Dataset, EncodingMap, MissingPolicy, RawTable};
pub use problem::{Chromosome, Evaluation, Problem};
pub use qga::{QgaConfig, Solution};
pub use rules::{Condition, Op, Rule, RuleStats};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used everywhere a seed is accepted.
pub type Rng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub(crate) fn rng_stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
