//! Deterministic dynamic k-center at a fixed estimate, safe against
//! adaptive adversaries.
//!
//! Points live in the leaves of a complete binary tree, at most 2k per leaf;
//! each node keeps at most k marked centers at pairwise distance above the
//! estimate, tracked through a blocking graph (edges between centers and the
//! points within the estimate of them). Inner nodes store their children's
//! centers, so the root's centers cover everything through a chain of hops.
//! A node finding an unblocked point while its centers are full becomes a
//! witness that even half the estimate is infeasible.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::ladder::{DynamicInstance, QueryResult};
use crate::metric::{MetricOracle, PointId};
use crate::solution::Solution;

#[derive(Default, Clone)]
struct Node {
    /// adjacency of the blocking graph; keys are the stored points
    adj: BTreeMap<PointId, BTreeSet<PointId>>,
    centers: BTreeSet<PointId>,
    witness: bool,
}

pub struct ClusteringTree {
    metric: Arc<MetricOracle>,
    k: usize,
    opt_prime: f64,
    /// heap-indexed arena: root at 1, children of i at 2i and 2i+1, leaf
    /// slot j at capacity + j
    arena: Vec<Node>,
    capacity: usize,
    /// leaf slot of each live point; leaves fill left to right like pages
    point_leaf: BTreeMap<PointId, usize>,
    /// ever-promoted (node, point) pairs, for the irrevocability audit
    promotions: BTreeSet<(usize, PointId)>,
}

impl ClusteringTree {
    pub fn new(metric: Arc<MetricOracle>, k: usize, opt_prime: f64) -> Self {
        ClusteringTree {
            metric,
            k,
            opt_prime,
            arena: vec![Node::default(), Node::default(), Node::default(), Node::default()],
            capacity: 2,
            point_leaf: BTreeMap::new(),
            promotions: BTreeSet::new(),
        }
    }

    fn dist(&self, p: PointId, q: PointId) -> f64 {
        self.metric.distance(p, q).expect("metric query")
    }

    fn leaf_arena(&self, slot: usize) -> usize {
        self.capacity + slot
    }

    fn try_center(&mut self, node: usize, p: PointId) -> bool {
        let blocked = !self.arena[node].adj[&p].is_empty();
        if !blocked && self.arena[node].centers.len() < self.k {
            self.arena[node].centers.insert(p);
            self.promotions.insert((node, p));
            let others: Vec<PointId> =
                self.arena[node].adj.keys().copied().filter(|&v| v != p).collect();
            for v in others {
                if self.dist(p, v) <= self.opt_prime {
                    self.arena[node].adj.get_mut(&p).unwrap().insert(v);
                    self.arena[node].adj.get_mut(&v).unwrap().insert(p);
                }
            }
            self.arena[node].witness = false;
            true
        } else {
            if !blocked {
                self.arena[node].witness = true;
            }
            false
        }
    }

    /// Stores p in the node, records blocking edges to in-range centers, and
    /// reports whether p became a center there.
    fn insert_node(&mut self, node: usize, p: PointId) -> bool {
        self.arena[node].adj.entry(p).or_default();
        let centers: Vec<PointId> =
            self.arena[node].centers.iter().copied().filter(|&v| v != p).collect();
        for v in centers {
            if self.dist(p, v) <= self.opt_prime {
                self.arena[node].adj.get_mut(&p).unwrap().insert(v);
                self.arena[node].adj.get_mut(&v).unwrap().insert(p);
            }
        }
        self.try_center(node, p)
    }

    /// Removes p from the node; if it was a center, its former neighbors get
    /// a promotion attempt one by one. Returns the newly promoted points.
    fn delete_node(&mut self, node: usize, p: PointId) -> Vec<PointId> {
        let Some(neighbors) = self.arena[node].adj.remove(&p) else {
            return Vec::new();
        };
        let was_center = self.arena[node].centers.remove(&p);
        for &v in &neighbors {
            self.arena[node].adj.get_mut(&v).unwrap().remove(&p);
        }
        let mut promoted = Vec::new();
        if was_center {
            for v in neighbors {
                if self.try_center(node, v) {
                    promoted.push(v);
                }
            }
        }
        // a witness needs live evidence: full centers plus an unblocked
        // non-center; deleting the evidence point must clear the flag
        if self.arena[node].witness {
            let n = &self.arena[node];
            let evidence = n.centers.len() == self.k
                && n.adj.iter().any(|(q, nb)| nb.is_empty() && !n.centers.contains(q));
            self.arena[node].witness = evidence;
        }
        promoted
    }

    fn rebuild_inners(&mut self) {
        for i in (1..self.capacity).rev() {
            self.arena[i] = Node::default();
            for child in [2 * i, 2 * i + 1] {
                let cs: Vec<PointId> = self.arena[child].centers.iter().copied().collect();
                for c in cs {
                    self.insert_node(i, c);
                }
            }
        }
    }

    fn resize(&mut self, new_capacity: usize) {
        let mut arena = vec![Node::default(); 2 * new_capacity];
        for slot in 0..self.capacity.min(new_capacity) {
            arena[new_capacity + slot] =
                std::mem::take(&mut self.arena[self.capacity + slot]);
        }
        self.capacity = new_capacity;
        self.arena = arena;
        self.rebuild_inners();
    }

    fn insert_raw(&mut self, p: PointId) {
        let page = 2 * self.k;
        let slot = (0..self.capacity)
            .find(|&s| self.arena[self.leaf_arena(s)].adj.len() < page);
        let slot = match slot {
            Some(s) => s,
            None => {
                self.resize(self.capacity * 2);
                self.capacity / 2
            }
        };
        self.point_leaf.insert(p, slot);
        let mut node = self.leaf_arena(slot);
        while self.insert_node(node, p) && node > 1 {
            node /= 2;
        }
    }

    fn delete_raw(&mut self, p: PointId) {
        let slot = self.point_leaf.remove(&p).expect("point not in tree");
        let mut node = self.leaf_arena(slot);
        let mut promoted = self.delete_node(node, p);
        while node > 1 {
            let parent = node / 2;
            let mut upward = Vec::new();
            for v in promoted {
                if self.insert_node(parent, v) {
                    upward.push(v);
                }
            }
            promoted = upward;
            promoted.extend(self.delete_node(parent, p));
            node = parent;
        }
    }

    pub fn insert(&mut self, p: PointId) {
        self.insert_raw(p);
    }

    pub fn delete(&mut self, p: PointId) {
        let slot = *self.point_leaf.get(&p).expect("point not in tree");
        self.delete_raw(p);
        // backfill from the right-most non-empty leaf to keep pages packed
        let last = (0..self.capacity)
            .rev()
            .find(|&s| !self.arena[self.leaf_arena(s)].adj.is_empty());
        if let Some(last) = last {
            if last > slot {
                let q = *self.arena[self.leaf_arena(last)].adj.keys().next().unwrap();
                self.delete_raw(q);
                self.insert_raw(q);
            }
        }
        let pages_used = self.point_leaf.len().div_ceil(2 * self.k).max(1);
        if self.capacity > 2 && pages_used <= self.capacity / 2 {
            self.resize(self.capacity / 2);
        }
    }

    pub fn has_witness(&self) -> bool {
        self.arena.iter().any(|n| n.witness)
    }

    pub fn root_centers(&self) -> Vec<PointId> {
        self.arena[1].centers.iter().copied().collect()
    }

    fn depth(&self) -> usize {
        (self.capacity as f64).log2().round() as usize
    }

    pub fn query(&self) -> QueryResult {
        if self.has_witness() {
            return QueryResult::Exceeded;
        }
        let hops = (self.depth() + 1).min(2 * self.k) as f64;
        QueryResult::Valid(Solution::kcenter(self.root_centers(), hops * self.opt_prime))
    }

    /// Test-only structural audit of the clustering-tree conditions.
    pub fn audit(&self) {
        for (i, node) in self.arena.iter().enumerate().skip(1) {
            assert!(node.adj.len() <= 2 * self.k, "node {i} over capacity");
            assert!(node.centers.len() <= self.k, "node {i} has too many centers");
            let pts: Vec<PointId> = node.adj.keys().copied().collect();
            for (a, &c) in node.centers.iter().enumerate() {
                assert!(node.adj.contains_key(&c));
                for &c2 in node.centers.iter().skip(a + 1) {
                    assert!(
                        self.dist(c, c2) > self.opt_prime,
                        "node {i}: centers {c:?},{c2:?} too close"
                    );
                }
            }
            for &p in &pts {
                for &q in &node.adj[&p] {
                    assert!(node.adj.contains_key(&q), "dangling edge in node {i}");
                    assert!(node.adj[&q].contains(&p), "asymmetric edge in node {i}");
                    assert!(
                        node.centers.contains(&p) || node.centers.contains(&q),
                        "edge without a center endpoint in node {i}"
                    );
                    assert!(self.dist(p, q) <= self.opt_prime, "edge too long in node {i}");
                }
            }
            if !node.witness {
                for &p in &pts {
                    let covered = node
                        .centers
                        .iter()
                        .any(|&c| self.dist(p, c) <= self.opt_prime);
                    assert!(covered, "node {i}: {p:?} uncovered without witness");
                }
            }
            if i < self.capacity {
                // inner node stores exactly its children's centers
                let mut expect = BTreeSet::new();
                expect.extend(self.arena[2 * i].centers.iter().copied());
                expect.extend(self.arena[2 * i + 1].centers.iter().copied());
                let stored: BTreeSet<PointId> = node.adj.keys().copied().collect();
                assert_eq!(stored, expect, "node {i} out of sync with children");
            }
        }
    }
}

impl DynamicInstance for ClusteringTree {
    fn insert(&mut self, p: PointId) {
        ClusteringTree::insert(self, p)
    }
    fn delete(&mut self, p: PointId) {
        ClusteringTree::delete(self, p)
    }
    fn query(&self) -> QueryResult {
        ClusteringTree::query(self)
    }
}
