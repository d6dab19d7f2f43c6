//! Counter-based dynamic k-center at a fixed estimate.
//!
//! Each non-center point carries a counter `a_p` = number of centers within
//! twice the estimate. Centers are pairwise farther than twice the estimate;
//! when the center set would exceed k+1 nothing more is promoted, and a set
//! of k+1 pairwise-far centers certifies the estimate is too small.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::ladder::{DynamicInstance, QueryResult};
use crate::metric::{MetricOracle, PointId};
use crate::solution::Solution;

pub struct CounterState {
    metric: Arc<MetricOracle>,
    opt_prime: f64,
    k: usize,
    centers: BTreeSet<PointId>,
    counters: BTreeMap<PointId, u32>,
    ever_center: BTreeSet<PointId>,
    /// Counter reads/writes, for amortized-cost checks in tests.
    pub touches: u64,
}

impl CounterState {
    pub fn new(metric: Arc<MetricOracle>, k: usize, opt_prime: f64) -> Self {
        CounterState {
            metric,
            opt_prime,
            k,
            centers: BTreeSet::new(),
            counters: BTreeMap::new(),
            ever_center: BTreeSet::new(),
            touches: 0,
        }
    }

    pub fn with_points(
        metric: Arc<MetricOracle>,
        k: usize,
        opt_prime: f64,
        points: &[PointId],
    ) -> Self {
        let mut s = Self::new(metric, k, opt_prime);
        for &p in points {
            s.insert(p);
        }
        s
    }

    fn near(&self, p: PointId, q: PointId) -> bool {
        p != q && self.metric.distance(p, q).expect("metric query") <= 2.0 * self.opt_prime
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.counters.contains_key(&p)
    }

    pub fn centers(&self) -> Vec<PointId> {
        self.centers.iter().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.counters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counters.is_empty()
    }

    pub fn points(&self) -> Vec<PointId> {
        self.counters.keys().copied().collect()
    }

    fn promote(&mut self, p: PointId) {
        debug_assert!(!self.ever_center.contains(&p), "a point becomes a center at most once");
        self.ever_center.insert(p);
        self.centers.insert(p);
        self.counters.insert(p, 0);
        self.touches += 1;
        let others: Vec<PointId> = self
            .counters
            .keys()
            .copied()
            .filter(|q| !self.centers.contains(q))
            .collect();
        for q in others {
            if self.near(p, q) {
                *self.counters.get_mut(&q).unwrap() += 1;
                self.touches += 1;
            }
        }
    }

    pub fn insert(&mut self, p: PointId) {
        debug_assert!(!self.counters.contains_key(&p));
        let a: u32 = self.centers.iter().filter(|&&c| self.near(p, c)).count() as u32;
        self.counters.insert(p, a);
        self.touches += 1;
        if a == 0 && self.centers.len() <= self.k {
            self.promote(p);
        }
    }

    pub fn delete(&mut self, p: PointId) {
        debug_assert!(self.counters.contains_key(&p));
        let was_center = self.centers.remove(&p);
        self.counters.remove(&p);
        self.touches += 1;
        if !was_center {
            return;
        }
        // Neighbors lose one covering center, then any uncovered point is
        // promoted in id order while room remains.
        let non_centers: Vec<PointId> = self
            .counters
            .keys()
            .copied()
            .filter(|q| !self.centers.contains(q))
            .collect();
        for q in &non_centers {
            if self.near(p, *q) {
                let a = self.counters.get_mut(q).unwrap();
                *a = a.saturating_sub(1);
                self.touches += 1;
            }
        }
        for q in non_centers {
            if self.centers.len() > self.k {
                break;
            }
            self.touches += 1;
            if self.counters[&q] == 0 && !self.centers.contains(&q) {
                self.promote(q);
            }
        }
    }

    pub fn query(&self) -> QueryResult {
        if self.centers.len() <= self.k {
            QueryResult::Valid(Solution::kcenter(self.centers(), 2.0 * self.opt_prime))
        } else {
            QueryResult::Exceeded
        }
    }

    /// Exhaustive consistency audit; test-only by intent.
    pub fn audit(&self) {
        let cs: Vec<PointId> = self.centers().to_vec();
        assert!(cs.len() <= self.k + 1, "at most k+1 centers");
        for (i, &c) in cs.iter().enumerate() {
            assert_eq!(self.counters[&c], 0, "center counter must be 0");
            for &c2 in &cs[i + 1..] {
                assert!(
                    self.metric.distance(c, c2).unwrap() > 2.0 * self.opt_prime,
                    "centers must be pairwise far"
                );
            }
        }
        for (&p, &a) in &self.counters {
            if self.centers.contains(&p) {
                continue;
            }
            let truth = cs.iter().filter(|&&c| self.near(p, c)).count() as u32;
            assert_eq!(a, truth, "counter of {p:?} out of sync");
            if self.centers.len() <= self.k {
                assert!(a > 0, "uncovered point {p:?} with spare center capacity");
            }
        }
    }
}

impl DynamicInstance for CounterState {
    fn insert(&mut self, p: PointId) {
        CounterState::insert(self, p)
    }
    fn delete(&mut self, p: PointId) {
        CounterState::delete(self, p)
    }
    fn query(&self) -> QueryResult {
        CounterState::query(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_kcenter;

    fn line_metric(coords: &[f64], delta: f64) -> (Arc<MetricOracle>, Vec<PointId>) {
        let m = Arc::new(MetricOracle::new_euclidean(delta));
        let ids = coords
            .iter()
            .enumerate()
            .map(|(i, &x)| m.register_with_coords(i as u64, vec![x]).unwrap())
            .collect();
        (m, ids)
    }

    #[test]
    fn first_insert_becomes_center() {
        let (m, ids) = line_metric(&[0.0], 10.0);
        let mut s = CounterState::new(m, 1, 1.0);
        s.insert(ids[0]);
        assert_eq!(s.centers(), vec![ids[0]]);
        s.audit();
    }

    #[test]
    fn covered_insert_stays_non_center() {
        let (m, ids) = line_metric(&[0.0, 1.0], 10.0);
        let mut s = CounterState::new(m, 1, 1.0);
        s.insert(ids[0]);
        s.insert(ids[1]);
        assert_eq!(s.centers(), vec![ids[0]]);
        s.audit();
    }

    #[test]
    fn overflow_asserts_and_oracle_agrees() {
        let (m, ids) = line_metric(&[0.0, 3.0], 10.0);
        let mut s = CounterState::new(m.clone(), 1, 1.0);
        s.insert(ids[0]);
        s.insert(ids[1]);
        assert_eq!(s.query(), QueryResult::Exceeded);
        let exact = exact_kcenter(&m, &ids, 1).unwrap();
        assert!(exact.cost > 1.0);
    }

    #[test]
    fn delete_non_center_is_inert() {
        let (m, ids) = line_metric(&[0.0, 1.0, 0.5], 10.0);
        let mut s = CounterState::new(m, 2, 1.0);
        for &p in &ids {
            s.insert(p);
        }
        let before = s.centers();
        s.delete(ids[2]);
        assert_eq!(s.centers(), before);
        s.audit();
    }

    #[test]
    fn deleting_center_promotes_neighbor() {
        let (m, ids) = line_metric(&[0.0, 1.0], 10.0);
        let mut s = CounterState::new(m, 1, 1.0);
        s.insert(ids[0]);
        s.insert(ids[1]);
        s.delete(ids[0]);
        assert_eq!(s.centers(), vec![ids[1]]);
        s.audit();
    }

    #[test]
    fn sweep_promotes_exactly_one_of_two_close_neighbors() {
        // center at 0; neighbors at 1.5 and 2.0 (within 2·OPT'=2 of it and of
        // each other); deleting the center promotes only the lower id.
        let (m, ids) = line_metric(&[0.0, 1.5, 2.0], 10.0);
        let mut s = CounterState::new(m, 1, 1.0);
        for &p in &ids {
            s.insert(p);
        }
        assert_eq!(s.centers(), vec![ids[0]]);
        s.delete(ids[0]);
        assert_eq!(s.centers(), vec![ids[1]]);
        s.audit();
    }

    #[test]
    fn three_far_points_k2_assert_matches_oracle() {
        let (m, ids) = line_metric(&[0.0, 10.0, 20.0], 30.0);
        let mut s = CounterState::new(m.clone(), 2, 1.0);
        for &p in &ids {
            s.insert(p);
        }
        assert_eq!(s.query(), QueryResult::Exceeded);
        assert!(exact_kcenter(&m, &ids, 2).unwrap().cost > 1.0);
    }

    #[test]
    fn empty_query_is_free() {
        let (m, _) = line_metric(&[], 10.0);
        let s = CounterState::new(m, 2, 1.0);
        match s.query() {
            QueryResult::Valid(sol) => assert_eq!(sol.cost, 2.0),
            _ => panic!("empty structure must answer"),
        }
    }

    #[test]
    fn randomized_stream_keeps_invariants() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = Arc::new(MetricOracle::new_euclidean(200.0));
        let mut s = CounterState::new(m.clone(), 3, 4.0);
        let mut live: Vec<PointId> = Vec::new();
        for step in 0..300 {
            if live.is_empty() || rng.gen_bool(0.6) {
                let x: f64 = rng.gen_range(0.0..100.0);
                let p = m.register_with_coords(step as u64 + 1000, vec![x]).unwrap();
                s.insert(p);
                live.push(p);
            } else {
                let i = rng.gen_range(0..live.len());
                let p = live.swap_remove(i);
                s.delete(p);
                m.delete_point(p).unwrap();
            }
            s.audit();
            if let QueryResult::Valid(sol) = s.query() {
                assert!(sol.covers(&m, &live, 1e-9));
            }
        }
    }
}
