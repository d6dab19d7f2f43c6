use crate::metric::{MetricOracle, PointId};

/// A clustering answer: centers with per-center radii.
///
/// For k-center structures all radii are equal; for sum-of-radii each ball
/// carries its own radius. `cost` is the objective value the producer claims
/// for this solution (max radius or sum of radii).
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub centers: Vec<(PointId, f64)>,
    pub cost: f64,
}

impl Solution {
    pub fn kcenter(centers: Vec<PointId>, radius: f64) -> Self {
        let centers: Vec<_> = centers.into_iter().map(|c| (c, radius)).collect();
        Solution { centers, cost: radius }
    }

    pub fn sum_of_radii(centers: Vec<(PointId, f64)>) -> Self {
        let cost = centers.iter().map(|&(_, r)| r).sum();
        Solution { centers, cost }
    }

    pub fn num_centers(&self) -> usize {
        self.centers.len()
    }

    /// Checks every point is inside some ball (within `slack` absolute
    /// tolerance). Each miss costs distance queries, so intended for tests.
    pub fn covers(&self, metric: &MetricOracle, points: &[PointId], slack: f64) -> bool {
        points.iter().all(|&p| {
            self.centers
                .iter()
                .any(|&(c, r)| metric.distance(p, c).map(|d| d <= r + slack).unwrap_or(false))
        })
    }

    /// Largest distance from any point to its nearest center.
    pub fn coverage_radius(&self, metric: &MetricOracle, points: &[PointId]) -> f64 {
        points
            .iter()
            .map(|&p| {
                self.centers
                    .iter()
                    .map(|&(c, _)| metric.distance(p, c).unwrap_or(f64::INFINITY))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
}
