//! Dynamic k-center structures for a fixed cost estimate.
//!
//! Three layers: a counter-based structure with linear amortized update cost,
//! a deletion-only structure with polylogarithmic recourse, and a fully
//! dynamic composition of the two.

pub mod delonly;
pub mod fully;
pub mod linear;

pub use delonly::DelOnlyState;
pub use fully::OvermarsState;
pub use linear::CounterState;
