//! Adaptive distance adversary and the oblivious hard-stream generator.
//!
//! The adaptive adversary maintains a unit-edge graph over all points it has
//! ever produced. Queries are answered with shortest paths in that graph
//! augmented by a virtual clique over the active vertices; any clique edge
//! a query actually uses becomes real. Vertices whose degree grows beyond
//! the budget threshold turn passive, get deleted soon after, and at clean
//! moments (no passive vertices) several explicit metrics consistent with
//! everything answered so far can be emitted.

use std::collections::{BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Active,
    Passive,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvOp {
    Insert(usize),
    Delete(usize),
}

#[derive(Debug, Clone)]
pub struct QueryRecord {
    pub u: usize,
    pub v: usize,
    pub answer: f64,
    pub op_index: usize,
}

/// All snapshot metrics are explicit matrices over every vertex ever
/// inserted, capped at the configured range bound.
pub struct Snapshot {
    pub p_star: usize,
    pub m_uni: Vec<Vec<f64>>,
    pub m_star: Vec<Vec<f64>>,
    pub m_range: Vec<Vec<f64>>,
    pub m_multi: Vec<Vec<f64>>,
    /// layer index of each active vertex around p_star (None = inactive)
    pub layers: Vec<Option<usize>>,
}

pub struct Adversary {
    k: usize,
    /// distance cap Δ; also the answer for pairs with no connecting path
    pub cap: f64,
    f: Box<dyn Fn(usize, usize) -> f64 + Send>,
    labels: Vec<Label>,
    adj: Vec<BTreeSet<usize>>,
    t: usize,
    num_active: usize,
    passive_queue: VecDeque<usize>,
    max_degree: usize,
    pub log: Vec<QueryRecord>,
}

const INF: usize = usize::MAX;

impl Adversary {
    pub fn new<F>(k: usize, cap: f64, budget: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Send + 'static,
    {
        Adversary {
            k,
            cap,
            f: Box::new(budget),
            labels: Vec::new(),
            adj: Vec::new(),
            t: 0,
            num_active: 0,
            passive_queue: VecDeque::new(),
            max_degree: 0,
            log: Vec::new(),
        }
    }

    pub fn op_index(&self) -> usize {
        self.t
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, v: usize) -> Label {
        self.labels[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn active_count(&self) -> usize {
        self.num_active
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn is_clean(&self) -> bool {
        self.passive_queue.is_empty()
    }

    /// Next stream operation: flush a passive vertex if one exists,
    /// otherwise hand out a fresh point.
    pub fn next_op(&mut self) -> AdvOp {
        self.t += 1;
        if let Some(x) = self.passive_queue.pop_front() {
            self.labels[x] = Label::Off;
            AdvOp::Delete(x)
        } else {
            self.labels.push(Label::Active);
            self.adj.push(BTreeSet::new());
            self.num_active += 1;
            AdvOp::Insert(self.labels.len() - 1)
        }
    }

    fn bfs(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![INF; self.labels.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u] {
                if dist[v] == INF {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    fn threshold(&self) -> f64 {
        100.0 * (self.f)(self.k, self.t.max(1))
    }

    /// Answers a distance query: shortest path in the recorded graph plus a
    /// virtual clique over active vertices. A used clique edge becomes real,
    /// which may tip its endpoints into passivity.
    fn add_edge(&mut self, a: usize, b: usize) {
        self.adj[a].insert(b);
        self.adj[b].insert(a);
        let threshold = self.threshold();
        for v in [a, b] {
            self.max_degree = self.max_degree.max(self.adj[v].len());
            if self.labels[v] == Label::Active && self.adj[v].len() as f64 >= threshold {
                self.labels[v] = Label::Passive;
                self.num_active -= 1;
                self.passive_queue.push_back(v);
            }
        }
    }

    pub fn answer(&mut self, x: usize, y: usize) -> f64 {
        assert!(x < self.labels.len() && y < self.labels.len());
        if x == y {
            return 0.0;
        }
        // both endpoints active: the clique path has length 1, which no
        // graph path can beat, so no search is needed
        if self.labels[x] == Label::Active && self.labels[y] == Label::Active {
            if !self.adj[x].contains(&y) {
                self.add_edge(x, y);
            }
            self.log.push(QueryRecord { u: x, v: y, answer: 1.0, op_index: self.t });
            return 1.0;
        }
        let dx = self.bfs(x);
        let dy = self.bfs(y);
        let direct = dx[y];
        // best and runner-up active endpoints on each side
        let best = |d: &[usize]| {
            let mut first: Option<usize> = None;
            let mut second: Option<usize> = None;
            for (v, &l) in self.labels.iter().enumerate() {
                if l != Label::Active || d[v] == INF {
                    continue;
                }
                match first {
                    None => first = Some(v),
                    Some(f) if d[v] < d[f] => {
                        second = first;
                        first = Some(v);
                    }
                    _ => match second {
                        None => second = Some(v),
                        Some(s) if d[v] < d[s] => second = Some(v),
                        _ => {}
                    },
                }
            }
            (first, second)
        };
        let (ax1, ax2) = best(&dx);
        let (ay1, ay2) = best(&dy);
        let mut via: Option<(usize, usize, usize)> = None;
        for &a in [ax1, ax2].iter().flatten() {
            for &b in [ay1, ay2].iter().flatten() {
                if a == b {
                    continue;
                }
                let len = dx[a].saturating_add(1).saturating_add(dy[b]);
                if via.map(|(l, _, _)| len < l).unwrap_or(true) {
                    via = Some((len, a, b));
                }
            }
        }
        let answer = match via {
            Some((len, a, b)) if len < direct => {
                self.add_edge(a, b);
                len
            }
            _ => direct,
        };
        let answer = if answer == INF { self.cap } else { (answer as f64).min(self.cap) };
        self.log.push(QueryRecord { u: x, v: y, answer, op_index: self.t });
        answer
    }

    /// All-pairs shortest paths in the recorded graph plus a clique over
    /// every vertex group, capped at the range bound. Cliques are expanded
    /// lazily during BFS: when the first member of a group settles at
    /// distance d, every unvisited member is reachable at d + 1.
    fn augmented_matrix(&self, groups: &[Vec<usize>]) -> Vec<Vec<f64>> {
        let n = self.labels.len();
        let adj: Vec<Vec<usize>> = self.adj.iter().map(|s| s.iter().copied().collect()).collect();
        let mut member_of: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (gi, g) in groups.iter().enumerate() {
            for &v in g {
                member_of[v].push(gi);
            }
        }
        let mut out = vec![vec![0.0; n]; n];
        for (s, row) in out.iter_mut().enumerate() {
            let mut dist = vec![INF; n];
            let mut expanded = vec![false; groups.len()];
            dist[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == INF {
                        dist[v] = dist[u] + 1;
                        queue.push_back(v);
                    }
                }
                for &gi in &member_of[u] {
                    if expanded[gi] {
                        continue;
                    }
                    expanded[gi] = true;
                    for &v in &groups[gi] {
                        if dist[v] == INF {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
            }
            for (v, item) in row.iter_mut().enumerate() {
                *item = if dist[v] == INF { self.cap } else { (dist[v] as f64).min(self.cap) };
            }
        }
        out
    }

    fn actives(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == Label::Active)
            .map(|(v, _)| v)
            .collect()
    }

    /// Consistent metrics for the current clean state. Refuses when a
    /// passive vertex exists.
    pub fn clean_snapshot(&self) -> Result<Snapshot> {
        let passive = self.labels.iter().filter(|&&l| l == Label::Passive).count();
        if passive > 0 {
            return Err(Error::NotClean { passive });
        }
        let actives = self.actives();
        if actives.is_empty() {
            return Err(Error::InvalidParameter("no active vertices to snapshot".into()));
        }
        // p*: the active vertex of maximum eccentricity towards other actives
        let p_star = actives
            .iter()
            .copied()
            .max_by_key(|&v| {
                let d = self.bfs(v);
                actives
                    .iter()
                    .map(|&u| if d[u] == INF { self.labels.len() + 1 } else { d[u] })
                    .max()
                    .unwrap_or(0)
            })
            .unwrap();
        let n = self.labels.len();
        let far_layer = n + 1;
        let d_star = self.bfs(p_star);
        let layers: Vec<Option<usize>> = (0..n)
            .map(|v| {
                if self.labels[v] != Label::Active {
                    None
                } else if d_star[v] == INF {
                    Some(far_layer)
                } else {
                    Some(d_star[v])
                }
            })
            .collect();
        let max_layer = layers.iter().flatten().copied().filter(|&l| l < far_layer).max().unwrap_or(0);

        let m_uni = self.augmented_matrix(&[actives.clone()]);

        // star cliques: vertices of adjacent layers form a clique, expressed
        // as one group per layer value l covering layers l and l + 1
        let layer_values: BTreeSet<usize> = actives.iter().map(|&v| layers[v].unwrap()).collect();
        let star_groups: Vec<Vec<usize>> = layer_values
            .iter()
            .map(|&l| {
                actives
                    .iter()
                    .copied()
                    .filter(|&v| {
                        let lv = layers[v].unwrap();
                        lv == l || lv == l + 1
                    })
                    .collect()
            })
            .collect();
        let m_star = self.augmented_matrix(&star_groups);

        let l1 = max_layer / 3;
        let l2 = (2 * max_layer / 3).max(l1 + 1);
        let mut range_groups = star_groups.clone();
        range_groups.push(actives.iter().copied().filter(|&v| layers[v].unwrap() <= l1).collect());
        range_groups.push(actives.iter().copied().filter(|&v| layers[v].unwrap() >= l2).collect());
        let m_range = self.augmented_matrix(&range_groups);

        // center set for the multi-center metric: greedy farthest actives
        let mut p_set = vec![p_star];
        while p_set.len() < self.k.min(actives.len()) {
            let dists: Vec<Vec<usize>> = p_set.iter().map(|&c| self.bfs(c)).collect();
            let next = actives
                .iter()
                .copied()
                .filter(|v| !p_set.contains(v))
                .max_by_key(|&v| dists.iter().map(|d| d[v].min(n + 1)).min().unwrap());
            match next {
                Some(v) => p_set.push(v),
                None => break,
            }
        }
        let ell = (max_layer / 2).max(1);
        let d_pset: Vec<Vec<usize>> = p_set.iter().map(|&c| self.bfs(c)).collect();
        let far_from_centers = |v: usize| {
            d_pset.iter().map(|d| d[v].min(n + 1)).min().unwrap() >= ell
        };
        let far_actives: Vec<usize> = actives.iter().copied().filter(|&v| far_from_centers(v)).collect();
        let m_multi = self.augmented_matrix(&[far_actives]);

        Ok(Snapshot { p_star, m_uni, m_star, m_range, m_multi, layers })
    }

    /// Fraction of active vertices within graph distance `radius` of `from`.
    pub fn layer_fraction(&self, from: usize, radius: usize) -> f64 {
        let d = self.bfs(from);
        let actives = self.actives();
        if actives.is_empty() {
            return 0.0;
        }
        let close = actives.iter().filter(|&&v| d[v] != INF && d[v] <= radius).count();
        close as f64 / actives.len() as f64
    }

    /// Test-only audit of the counting lemmas and logged-answer consistency
    /// under the given snapshot matrices.
    pub fn audit(&self, snapshot: Option<&Snapshot>) {
        if self.t >= 25 {
            assert!(
                self.active_count() * 100 >= 96 * self.t,
                "too few active vertices: {} of {} operations",
                self.active_count(),
                self.t
            );
        }
        let threshold = self.threshold();
        for v in 0..self.labels.len() {
            assert!(
                (self.adj[v].len() as f64) <= threshold,
                "vertex {v} exceeds the degree threshold"
            );
        }
        if let Some(s) = snapshot {
            for rec in &self.log {
                for m in [&s.m_uni, &s.m_star, &s.m_range, &s.m_multi] {
                    assert!(
                        (m[rec.u][rec.v] - rec.answer).abs() < 1e-9,
                        "snapshot metric contradicts logged answer {rec:?}"
                    );
                }
            }
        }
    }
}

/// One block of the oblivious hard stream: a probe point with a hidden home
/// cluster and a hidden near/far coin.
#[derive(Debug, Clone, Copy)]
pub struct ObliviousBlock {
    /// key of the probe point
    pub probe: usize,
    /// hidden anchor in the initial point set
    pub hidden_anchor: usize,
    /// true: probe at distance 1 of the anchor, false: distance Δ from all
    pub near: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScriptOp {
    Insert(usize),
    Delete(usize),
    QueryValue,
}

pub struct ObliviousScript {
    pub k: usize,
    pub delta: f64,
    pub ops: Vec<ScriptOp>,
    pub blocks: Vec<ObliviousBlock>,
    /// full matrix over the k anchors (keys 0..k-1) and all probes
    pub matrix: Vec<Vec<f64>>,
}

/// Appendix-style oblivious stream: k pairwise-far anchors, then blocks of
/// insert probe / cost query / delete probe. Each probe is near exactly one
/// uniformly chosen anchor with probability 1/2, else far from everything.
pub fn oblivious_stream(k: usize, delta: f64, num_blocks: usize, seed: u64) -> Result<ObliviousScript> {
    if k < 2 || delta <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "oblivious stream needs k >= 2 and delta > 1, got k={k}, delta={delta}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = k + num_blocks;
    // group labels: anchors are their own groups; near probes join their
    // anchor's group; far probes are singletons
    let mut group: Vec<usize> = (0..n).collect();
    let mut ops = Vec::new();
    let mut blocks = Vec::new();
    for anchor in 0..k {
        ops.push(ScriptOp::Insert(anchor));
    }
    for b in 0..num_blocks {
        let probe = k + b;
        let hidden_anchor = rng.gen_range(0..k);
        let near = rng.gen_bool(0.5);
        if near {
            group[probe] = hidden_anchor;
        }
        blocks.push(ObliviousBlock { probe, hidden_anchor, near });
        ops.push(ScriptOp::Insert(probe));
        ops.push(ScriptOp::QueryValue);
        ops.push(ScriptOp::Delete(probe));
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                matrix[i][j] = if group[i] == group[j] { 1.0 } else { delta };
            }
        }
    }
    Ok(ObliviousScript { k, delta, ops, blocks, matrix })
}
