//! Deletion-only k-center at a fixed estimate.
//!
//! Centers are drawn uniformly from the shrinking uncovered set and filed
//! into buckets by how large that set was at draw time. A bucket filling up
//! to 2k centers certifies the estimate is too small (flag set); deletions
//! then whittle that bucket down until a partial rebuild re-draws centers
//! for the affected suffix.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::ladder::QueryResult;
use crate::metric::{MetricOracle, PointId};
use crate::solution::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Change {
    Add(PointId),
    Remove(PointId),
}

pub type ChangeLog = Vec<Change>;

struct Center {
    /// Point currently standing in for this center slot.
    current: PointId,
    bucket: usize,
    cluster: BTreeSet<PointId>,
    alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Loc {
    Cluster(usize),
    Star(usize),
}

pub struct DelOnlyState {
    metric: Arc<MetricOracle>,
    opt_prime: f64,
    k: usize,
    rng: ChaCha8Rng,
    centers: Vec<Center>,
    /// bucket j (1-based) lives at index j-1; holds live center indices
    buckets: Vec<Vec<usize>>,
    star_bucket: Option<usize>,
    star_count: usize,
    flag: bool,
    flag_ever_cleared: bool,
    /// clusters of deleted oversized-bucket centers plus never-covered points
    u_star: Vec<BTreeSet<PointId>>,
    loc: BTreeMap<PointId, Loc>,
    star_deletions_since_rebuild: usize,
    pub rebuild_count: u64,
}

impl DelOnlyState {
    pub fn build(
        metric: Arc<MetricOracle>,
        k: usize,
        opt_prime: f64,
        points: &[PointId],
        rng: ChaCha8Rng,
    ) -> Self {
        let n0 = points.len().max(1);
        let num_buckets = ((n0 as f64).log2().ceil() as usize).max(1);
        let mut s = DelOnlyState {
            metric,
            opt_prime,
            k,
            rng,
            centers: Vec::new(),
            buckets: vec![Vec::new(); num_buckets],
            star_bucket: None,
            star_count: 0,
            flag: false,
            flag_ever_cleared: false,
            u_star: Vec::new(),
            loc: BTreeMap::new(),
            star_deletions_since_rebuild: 0,
            rebuild_count: 0,
        };
        let _ = s.draw_centers(points.to_vec());
        s
    }

    fn near(&self, p: PointId, q: PointId) -> bool {
        self.metric.distance(p, q).expect("metric query") <= 2.0 * self.opt_prime
    }

    fn bucket_of(u_len: usize) -> usize {
        // smallest j ≥ 1 with u_len ≤ 2^j
        ((u_len as f64).log2().ceil() as usize).max(1)
    }

    /// Draws centers from `u` until it is exhausted or a bucket fills to 2k.
    /// Returns the additions made. Sets/unsets the flag accordingly.
    fn draw_centers(&mut self, mut u: Vec<PointId>) -> ChangeLog {
        let mut log = ChangeLog::new();
        while !u.is_empty() {
            let j = Self::bucket_of(u.len());
            let pick = self.rng.gen_range(0..u.len());
            let c = u[pick];
            let mut cluster = BTreeSet::new();
            u.retain(|&p| {
                if self.near(p, c) {
                    cluster.insert(p);
                    false
                } else {
                    true
                }
            });
            let idx = self.centers.len();
            for &p in &cluster {
                self.loc.insert(p, Loc::Cluster(idx));
            }
            self.centers.push(Center { current: c, bucket: j, cluster, alive: true });
            while self.buckets.len() < j {
                self.buckets.push(Vec::new());
            }
            self.buckets[j - 1].push(idx);
            log.push(Change::Add(c));
            if self.buckets[j - 1].len() == 2 * self.k {
                self.flag = true;
                self.star_bucket = Some(j - 1);
                self.star_count = 2 * self.k;
                self.star_deletions_since_rebuild = 0;
                if !u.is_empty() {
                    let chunk_idx = self.u_star.len();
                    let chunk: BTreeSet<PointId> = u.into_iter().collect();
                    for &p in &chunk {
                        self.loc.insert(p, Loc::Star(chunk_idx));
                    }
                    self.u_star.push(chunk);
                }
                return log;
            }
        }
        if self.flag {
            self.flag = false;
            self.flag_ever_cleared = true;
        }
        self.star_bucket = None;
        self.star_count = 0;
        log
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.loc.contains_key(&p)
    }

    pub fn centers(&self) -> Vec<PointId> {
        self.centers.iter().filter(|c| c.alive).map(|c| c.current).collect()
    }

    pub fn flag_set(&self) -> bool {
        self.flag
    }

    /// Live centers of the oversized bucket while the flag is set.
    pub fn star_centers(&self) -> Vec<PointId> {
        match self.star_bucket {
            Some(j) => self.buckets[j]
                .iter()
                .filter(|&&ci| self.centers[ci].alive)
                .map(|&ci| self.centers[ci].current)
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn points(&self) -> Vec<PointId> {
        self.loc.keys().copied().collect()
    }

    /// Case 4 bookkeeping followed, when the oversized bucket shrinks to k
    /// centers, by a partial rebuild of everything drawn from it onward.
    pub fn delete(&mut self, p: PointId) -> ChangeLog {
        let loc = *self.loc.get(&p).expect("point not in structure");
        self.loc.remove(&p);
        match loc {
            Loc::Star(chunk) => {
                self.u_star[chunk].remove(&p);
                ChangeLog::new()
            }
            Loc::Cluster(ci) => {
                self.centers[ci].cluster.remove(&p);
                if self.centers[ci].current != p {
                    return ChangeLog::new();
                }
                let in_star =
                    self.flag && self.star_bucket == Some(self.centers[ci].bucket - 1);
                if in_star {
                    // the whole cluster returns to the uncovered pool
                    let mut log = vec![Change::Remove(p)];
                    let cluster = std::mem::take(&mut self.centers[ci].cluster);
                    let chunk_idx = self.u_star.len();
                    for &q in &cluster {
                        self.loc.insert(q, Loc::Star(chunk_idx));
                    }
                    self.u_star.push(cluster);
                    self.centers[ci].alive = false;
                    let b = self.centers[ci].bucket - 1;
                    self.buckets[b].retain(|&i| i != ci);
                    self.star_count -= 1;
                    self.star_deletions_since_rebuild += 1;
                    if self.star_count == self.k {
                        log.extend(self.partial_rebuild());
                    }
                    log
                } else {
                    if let Some(&q) = self.centers[ci].cluster.first() {
                        self.centers[ci].current = q;
                        vec![Change::Remove(p), Change::Add(q)]
                    } else {
                        self.centers[ci].alive = false;
                        let b = self.centers[ci].bucket - 1;
                        self.buckets[b].retain(|&i| i != ci);
                        if self.star_bucket == Some(b) && self.star_count > 0 {
                            self.star_count -= 1;
                        }
                        vec![Change::Remove(p)]
                    }
                }
            }
        }
    }

    fn partial_rebuild(&mut self) -> ChangeLog {
        assert!(
            self.star_deletions_since_rebuild >= self.k,
            "fewer than k oversized-bucket deletions between rebuilds"
        );
        self.rebuild_count += 1;
        let sb = self.star_bucket.expect("rebuild without oversized bucket");
        let mut log = ChangeLog::new();
        // Everything still in the oversized bucket is dissolved back into
        // the uncovered pool together with the parked clusters.
        let star_members: Vec<usize> = std::mem::take(&mut self.buckets[sb]);
        let mut u: Vec<PointId> = Vec::new();
        for chunk in std::mem::take(&mut self.u_star) {
            u.extend(chunk);
        }
        for ci in star_members {
            log.push(Change::Remove(self.centers[ci].current));
            let cluster = std::mem::take(&mut self.centers[ci].cluster);
            u.extend(cluster.iter().copied());
            self.centers[ci].alive = false;
        }
        for &q in &u {
            self.loc.remove(&q);
        }
        self.star_bucket = None;
        self.star_count = 0;
        self.star_deletions_since_rebuild = 0;
        log.extend(self.draw_centers(u));
        log
    }

    pub fn query(&self) -> QueryResult {
        if self.flag {
            QueryResult::Exceeded
        } else {
            QueryResult::Valid(Solution::kcenter(self.centers(), 4.0 * self.opt_prime))
        }
    }

    /// Test-only consistency audit.
    pub fn audit(&self) {
        if self.flag_ever_cleared {
            assert!(!self.flag, "flag re-set after being cleared");
        }
        let mut seen = BTreeSet::new();
        for (ci, c) in self.centers.iter().enumerate() {
            if !c.alive {
                assert!(c.cluster.is_empty());
                continue;
            }
            assert!(c.cluster.contains(&c.current), "center must sit in its own cluster");
            for &p in &c.cluster {
                assert_eq!(self.loc.get(&p), Some(&Loc::Cluster(ci)));
                assert!(seen.insert(p), "clusters must be disjoint");
                assert!(
                    self.metric.distance(p, c.current).unwrap() <= 4.0 * self.opt_prime + 1e-9,
                    "cluster member beyond the doubled diameter bound"
                );
            }
        }
        for (chunk_idx, chunk) in self.u_star.iter().enumerate() {
            for &p in chunk {
                assert_eq!(self.loc.get(&p), Some(&Loc::Star(chunk_idx)));
                assert!(seen.insert(p), "parked points must not be covered elsewhere");
            }
        }
        assert_eq!(seen.len(), self.loc.len());
        for b in &self.buckets {
            assert!(b.len() <= 2 * self.k, "bucket over capacity");
        }
        if let Some(sb) = self.star_bucket {
            assert_eq!(self.buckets[sb].len(), self.star_count);
        }
        if !self.flag {
            assert!(
                self.u_star.iter().all(|c| c.is_empty()),
                "uncovered points while claiming a valid solution"
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_kcenter;
    use rand::SeedableRng;

    fn line_metric(coords: &[f64], delta: f64) -> (Arc<MetricOracle>, Vec<PointId>) {
        let m = Arc::new(MetricOracle::new_euclidean(delta));
        let ids = coords
            .iter()
            .enumerate()
            .map(|(i, &x)| m.register_with_coords(i as u64, vec![x]).unwrap())
            .collect();
        (m, ids)
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn tight_cluster_gives_single_center() {
        let (m, ids) = line_metric(&[0.0, 0.5, 1.0, 1.5], 10.0);
        let s = DelOnlyState::build(m, 2, 1.0, &ids, rng(1));
        assert_eq!(s.centers().len(), 1);
        assert!(!s.flag_set());
        s.audit();
    }

    #[test]
    fn four_far_points_k1_fill_bucket_two() {
        // |U_1|=4 → bucket 2; |U_2|=3 → bucket 2 again; 2k=2 hit → flag
        let (m, ids) = line_metric(&[0.0, 10.0, 20.0, 30.0], 40.0);
        let s = DelOnlyState::build(m.clone(), 1, 1.0, &ids, rng(3));
        assert!(s.flag_set());
        assert_eq!(s.query(), QueryResult::Exceeded);
        assert!(exact_kcenter(&m, &ids, 1).unwrap().cost > 1.0);
        s.audit();
    }

    #[test]
    fn coincident_points_one_center() {
        let m = Arc::new(MetricOracle::new_euclidean(10.0));
        let ids: Vec<_> =
            (0..6).map(|i| m.register_with_coords(i, vec![0.0]).unwrap()).collect();
        let s = DelOnlyState::build(m, 1, 1.0, &ids, rng(9));
        assert_eq!(s.centers().len(), 1);
        assert!(!s.flag_set());
    }

    #[test]
    fn delete_non_center_logs_nothing() {
        let (m, ids) = line_metric(&[0.0, 0.5, 1.0], 10.0);
        let mut s = DelOnlyState::build(m, 2, 1.0, &ids, rng(5));
        let c = s.centers()[0];
        let other = *ids.iter().find(|&&p| p != c).unwrap();
        assert!(s.delete(other).is_empty());
        s.audit();
    }

    #[test]
    fn center_replacement_logs_two_changes() {
        let (m, ids) = line_metric(&[0.0, 0.5], 10.0);
        let mut s = DelOnlyState::build(m, 2, 1.0, &ids, rng(5));
        let c = s.centers()[0];
        let other = *ids.iter().find(|&&p| p != c).unwrap();
        let log = s.delete(c);
        assert_eq!(log, vec![Change::Remove(c), Change::Add(other)]);
        assert_eq!(s.centers(), vec![other]);
        s.audit();
    }

    #[test]
    fn query_covers_all_live_points_at_four_estimates() {
        let (m, ids) = line_metric(&[0.0, 1.0, 2.0, 7.0, 8.0, 9.0, 15.0], 20.0);
        let mut s = DelOnlyState::build(m.clone(), 3, 1.5, &ids, rng(7));
        let mut live = ids.clone();
        while live.len() > 1 {
            if let QueryResult::Valid(sol) = s.query() {
                assert!(sol.covers(&m, &live, 1e-9));
            }
            let p = live.remove(live.len() / 2);
            s.delete(p);
            s.audit();
        }
    }

    #[test]
    fn rebuild_fires_after_k_star_deletions_and_flag_can_clear() {
        // k=2: six far points fill bucket 3 (|U| in 5..8 range → bucket 3)
        // after enough draws; deleting oversized-bucket centers down to k
        // triggers the rebuild, and with few enough survivors the flag clears.
        let (m, ids) =
            line_metric(&[0.0, 10.0, 20.0, 30.0, 40.0, 50.0], 60.0);
        for seed in 0..8 {
            let mut s = DelOnlyState::build(m.clone(), 2, 1.0, &ids, rng(seed));
            if !s.flag_set() {
                continue;
            }
            let mut live: BTreeSet<PointId> = ids.iter().copied().collect();
            // delete current centers until either rebuild or exhaustion
            while s.flag_set() && live.len() > 2 {
                let c = s.centers().into_iter().find(|c| live.contains(c)).unwrap();
                let log = s.delete(c);
                live.remove(&c);
                s.audit();
                if log.len() > 2 {
                    assert!(s.rebuild_count > 0);
                }
            }
            if !s.flag_set() {
                if let QueryResult::Valid(sol) = s.query() {
                    let livev: Vec<_> = live.iter().copied().collect();
                    assert!(sol.covers(&m, &livev, 1e-9));
                }
            }
        }
    }

    #[test]
    fn changelog_exceeds_two_only_on_rebuild() {
        use rand::Rng;
        let m = Arc::new(MetricOracle::new_euclidean(1000.0));
        let mut r = rng(21);
        let ids: Vec<_> = (0..40)
            .map(|i| {
                let x: f64 = r.gen_range(0.0..200.0);
                m.register_with_coords(i, vec![x]).unwrap()
            })
            .collect();
        let mut s = DelOnlyState::build(m.clone(), 2, 2.0, &ids, rng(22));
        let mut live = ids.clone();
        while live.len() > 1 {
            let before = s.rebuild_count;
            let i = r.gen_range(0..live.len());
            let p = live.swap_remove(i);
            let log = s.delete(p);
            if log.len() > 2 {
                assert!(s.rebuild_count > before, "long changelog without rebuild");
            }
            s.audit();
        }
    }
}
