//! Exact brute-force clustering solvers for small instances.
//!
//! These are the ground truth the dynamic structures are judged against, and
//! the offline black box used when recombining pruned sum-of-radii clusters.
//! All of them refuse instances beyond their enumeration budget rather than
//! silently degrading.

use crate::error::{Error, Result};
use crate::metric::{MetricOracle, PointId};
use crate::solution::Solution;

/// Exact optimum with a witness solution attaining it.
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub cost: f64,
    pub witness: Solution,
}

const KCENTER_MAX_N: usize = 18;
const KCENTER_MAX_K: usize = 5;
const SOR_MAX_N: usize = 12;
const SOR_MAX_K: usize = 3;
const SOD_MAX_N: usize = 10;
const SOD_MAX_K: usize = 3;

fn pairwise(metric: &MetricOracle, points: &[PointId]) -> Result<Vec<Vec<f64>>> {
    let n = points.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = metric.distance(points[i], points[j])?;
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    Ok(d)
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Optimal k-center over the given points, centers restricted to the points
/// themselves. Enumerates every k-subset.
pub fn exact_kcenter(metric: &MetricOracle, points: &[PointId], k: usize) -> Result<ExactResult> {
    let n = points.len();
    if n > KCENTER_MAX_N || k > KCENTER_MAX_K {
        return Err(Error::OfflineContract {
            got: format!("n={n}, k={k}"),
            limit: format!("n <= {KCENTER_MAX_N}, k <= {KCENTER_MAX_K}"),
        });
    }
    if n == 0 {
        return Ok(ExactResult { cost: 0.0, witness: Solution::kcenter(Vec::new(), 0.0) });
    }
    let k = k.min(n);
    let d = pairwise(metric, points)?;
    let mut best_cost = f64::INFINITY;
    let mut best: Vec<usize> = Vec::new();
    for subset in subsets_of_size(n, k) {
        let mut cost: f64 = 0.0;
        for i in 0..n {
            let near = subset.iter().map(|&c| d[i][c]).fold(f64::INFINITY, f64::min);
            cost = cost.max(near);
            if cost >= best_cost {
                break;
            }
        }
        if cost < best_cost {
            best_cost = cost;
            best = subset;
        }
    }
    let centers = best.into_iter().map(|i| points[i]).collect();
    Ok(ExactResult { cost: best_cost, witness: Solution::kcenter(centers, best_cost) })
}

/// Optimal k-sum-of-radii: centers from the points, radii from the realized
/// distances {0} ∪ {d(c, p)}.
pub fn exact_sum_of_radii(
    metric: &MetricOracle,
    points: &[PointId],
    k: usize,
) -> Result<ExactResult> {
    let n = points.len();
    if n > SOR_MAX_N || k > SOR_MAX_K {
        return Err(Error::OfflineContract {
            got: format!("n={n}, k={k}"),
            limit: format!("n <= {SOR_MAX_N}, k <= {SOR_MAX_K}"),
        });
    }
    if n == 0 {
        return Ok(ExactResult { cost: 0.0, witness: Solution::sum_of_radii(Vec::new()) });
    }
    let k = k.min(n);
    let d = pairwise(metric, points)?;
    let mut best_cost = f64::INFINITY;
    let mut best: Vec<(usize, f64)> = Vec::new();
    for subset in subsets_of_size(n, k) {
        // For a fixed center set, the optimal radius of each center is the
        // distance to the farthest point assigned to it; enumerate radius
        // levels per center and keep the cheapest feasible combination.
        let mut radii_choices: Vec<Vec<f64>> = Vec::with_capacity(subset.len());
        for &c in &subset {
            let mut r: Vec<f64> = (0..n).map(|i| d[c][i]).collect();
            r.push(0.0);
            r.sort_by(|a, b| a.partial_cmp(b).unwrap());
            r.dedup();
            radii_choices.push(r);
        }
        let mut assignment = vec![0usize; subset.len()];
        loop {
            let cost: f64 = assignment
                .iter()
                .enumerate()
                .map(|(ci, &ri)| radii_choices[ci][ri])
                .sum();
            if cost < best_cost {
                let feasible = (0..n).all(|i| {
                    subset
                        .iter()
                        .enumerate()
                        .any(|(ci, &c)| d[c][i] <= radii_choices[ci][assignment[ci]] + 1e-12)
                });
                if feasible {
                    best_cost = cost;
                    best = subset
                        .iter()
                        .enumerate()
                        .map(|(ci, &c)| (c, radii_choices[ci][assignment[ci]]))
                        .collect();
                }
            }
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == assignment.len() {
                    break;
                }
                assignment[pos] += 1;
                if assignment[pos] < radii_choices[pos].len() {
                    break;
                }
                assignment[pos] = 0;
                pos += 1;
            }
            if pos == assignment.len() {
                break;
            }
        }
    }
    let centers: Vec<(PointId, f64)> = best.into_iter().map(|(i, r)| (points[i], r)).collect();
    Ok(ExactResult { cost: best_cost, witness: Solution::sum_of_radii(centers) })
}

/// Optimal k-sum-of-diameters over all partitions into at most k parts.
pub fn exact_sum_of_diameters(
    metric: &MetricOracle,
    points: &[PointId],
    k: usize,
) -> Result<ExactResult> {
    let n = points.len();
    if n > SOD_MAX_N || k > SOD_MAX_K {
        return Err(Error::OfflineContract {
            got: format!("n={n}, k={k}"),
            limit: format!("n <= {SOD_MAX_N}, k <= {SOD_MAX_K}"),
        });
    }
    if n == 0 {
        return Ok(ExactResult { cost: 0.0, witness: Solution::sum_of_radii(Vec::new()) });
    }
    let k = k.min(n);
    let d = pairwise(metric, points)?;
    let mut labels = vec![0usize; n];
    let mut best_cost = f64::INFINITY;
    let mut best_labels = labels.clone();
    // Canonical labelings only: label[i] ≤ 1 + max of earlier labels.
    fn rec(
        i: usize,
        max_used: usize,
        k: usize,
        d: &[Vec<f64>],
        labels: &mut Vec<usize>,
        best_cost: &mut f64,
        best_labels: &mut Vec<usize>,
    ) {
        let n = labels.len();
        if i == n {
            let mut cost = 0.0;
            for part in 0..=max_used {
                let members: Vec<usize> =
                    (0..n).filter(|&x| labels[x] == part).collect();
                let mut diam: f64 = 0.0;
                for (a, &x) in members.iter().enumerate() {
                    for &y in &members[a + 1..] {
                        diam = diam.max(d[x][y]);
                    }
                }
                cost += diam;
            }
            if cost < *best_cost {
                *best_cost = cost;
                *best_labels = labels.clone();
            }
            return;
        }
        let top = (max_used + 1).min(k - 1);
        for lab in 0..=top {
            labels[i] = lab;
            // prune: diameter already forced by earlier same-label points
            let mut partial: f64 = 0.0;
            for part in 0..=max_used.max(lab) {
                let mut diam: f64 = 0.0;
                for x in 0..=i {
                    if labels[x] != part {
                        continue;
                    }
                    for y in 0..x {
                        if labels[y] == part {
                            diam = diam.max(d[x][y]);
                        }
                    }
                }
                partial += diam;
            }
            if partial < *best_cost {
                rec(i + 1, max_used.max(lab), k, d, labels, best_cost, best_labels);
            }
        }
    }
    rec(1, 0, k, &d, &mut labels, &mut best_cost, &mut best_labels);

    // Witness as balls: per part, center = point minimizing max distance in
    // the part, radius = that max (covers the part; cost field reports the
    // diameter sum, not the radius sum).
    let parts = best_labels.iter().copied().max().unwrap_or(0) + 1;
    let mut centers = Vec::new();
    for part in 0..parts {
        let members: Vec<usize> = (0..n).filter(|&x| best_labels[x] == part).collect();
        if members.is_empty() {
            continue;
        }
        let (c, r) = members
            .iter()
            .map(|&cand| {
                let r = members.iter().map(|&m| d[cand][m]).fold(0.0, f64::max);
                (cand, r)
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        centers.push((points[c], r));
    }
    let witness = Solution { centers, cost: best_cost };
    Ok(ExactResult { cost: best_cost, witness })
}

/// The offline solver slot in the recombination step: exact sum-of-radii,
/// i.e. approximation factor 1.
pub fn offline_blackbox(metric: &MetricOracle, points: &[PointId], k: usize) -> Result<Solution> {
    Ok(exact_sum_of_radii(metric, points, k)?.witness)
}
