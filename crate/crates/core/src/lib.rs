//! Fully dynamic metric clustering: k-center, k-sum-of-radii and
//! k-sum-of-diameters structures maintained under point insertions and
//! deletions, plus exact small-instance solvers and adversarial stream
//! generators for stress testing.
//!
//! The dynamic structures all follow the same contract: each one is built
//! for a fixed cost estimate `OPT'` and after every update either holds a
//! solution with cost bounded by a constant times `OPT'`, or certifies that
//! the true optimum exceeds `OPT'`. A [`ladder::Ladder`] runs one instance
//! per power of `1+eps` and answers queries from the cheapest valid one.

pub mod adversary;
pub mod det_tree;
pub mod error;
pub mod kcenter;
pub mod ladder;
pub mod metric;
pub mod oracle;
pub mod solution;
pub mod sor;
pub mod stream;

pub use error::{Error, Result};
pub use metric::{MetricOracle, PointId};
pub use solution::Solution;
