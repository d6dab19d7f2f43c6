//! Guess ladder: one dynamic structure per cost estimate, smallest valid
//! estimate answers queries.

use crate::error::{Error, Result};
use crate::metric::PointId;
use crate::solution::Solution;

/// Outcome of querying one fixed-estimate structure.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    /// A solution respecting the structure's guarantee at its estimate.
    Valid(Solution),
    /// The structure certifies the true optimum exceeds its estimate.
    Exceeded,
}

/// A dynamic clustering structure built for one fixed estimate OPT'.
pub trait DynamicInstance {
    fn insert(&mut self, p: PointId);
    fn delete(&mut self, p: PointId);
    fn query(&self) -> QueryResult;
}

/// Maintains instances at every power of (1+ε) from 1 up to the first power
/// reaching `range_top` (Δ for k-center, k·Δ for sum-of-radii). Updates fan
/// out to all instances; queries pick the smallest non-asserting estimate.
pub struct Ladder<I> {
    epsilon: f64,
    instances: Vec<(f64, I)>,
}

/// The estimates the ladder will instantiate for a given range top.
pub fn estimate_grid(epsilon: f64, range_top: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} not in (0,1]")));
    }
    if !(range_top >= 1.0 && range_top.is_finite()) {
        return Err(Error::InvalidParameter(format!("range top {range_top} must be >= 1")));
    }
    let mut grid = vec![1.0];
    let mut v = 1.0;
    while v < range_top * (1.0 - 1e-12) {
        v *= 1.0 + epsilon;
        grid.push(v);
    }
    Ok(grid)
}

/// Rejects ε whose reciprocal is not (numerically) a positive integer.
pub fn require_integral_reciprocal(epsilon: f64) -> Result<()> {
    let inv = 1.0 / epsilon;
    if (inv - inv.round()).abs() > 1e-9 || inv.round() < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "1/epsilon must be a positive integer, got epsilon = {epsilon}"
        )));
    }
    Ok(())
}

impl<I: DynamicInstance> Ladder<I> {
    pub fn new<F>(epsilon: f64, range_top: f64, mut build: F) -> Result<Self>
    where
        F: FnMut(f64) -> I,
    {
        let instances = estimate_grid(epsilon, range_top)?
            .into_iter()
            .map(|opt| (opt, build(opt)))
            .collect();
        Ok(Ladder { epsilon, instances })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn estimates(&self) -> Vec<f64> {
        self.instances.iter().map(|&(e, _)| e).collect()
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    pub fn insert(&mut self, p: PointId) {
        for (_, inst) in &mut self.instances {
            inst.insert(p);
        }
    }

    pub fn delete(&mut self, p: PointId) {
        for (_, inst) in &mut self.instances {
            inst.delete(p);
        }
    }

    /// Solution from the smallest estimate whose instance does not assert,
    /// together with that estimate. `None` means every instance asserts,
    /// i.e. the declared distance bound was violated.
    pub fn query(&self) -> Option<(f64, Solution)> {
        self.query_with(|inst| inst.query())
    }

    /// Same smallest-valid-estimate selection under a custom per-instance
    /// query, e.g. an alternate solution view of the same structure.
    pub fn query_with<F>(&self, f: F) -> Option<(f64, Solution)>
    where
        F: Fn(&I) -> QueryResult,
    {
        for (opt, inst) in &self.instances {
            if let QueryResult::Valid(sol) = f(inst) {
                return Some((*opt, sol));
            }
        }
        None
    }
}
