//! Point registry and distance oracles with query counting.
//!
//! Every distance evaluation goes through [`MetricOracle::distance`], which
//! increments a shared counter. Structures never cache distances implicitly;
//! if they memoize, they do so in their own state so that the counter remains
//! a faithful measure of oracle traffic.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use crate::error::{Error, Result};

/// Identity of a registered point. Ids are strictly increasing in insertion
/// order and never reused, so a deleted point stays addressable forever.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PointId(pub u64);

impl PointId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

enum Backend {
    /// Full symmetric matrix; a point's key is its row index.
    Matrix(Vec<Vec<f64>>),
    /// Coordinates supplied at registration time.
    Euclidean,
    /// Precomputed all-pairs shortest paths; a point's key is its vertex.
    Graph(Vec<Vec<f64>>),
    /// Arbitrary user metric keyed by the external key.
    Callback(Box<dyn Fn(u64, u64) -> f64 + Send + Sync>),
}

struct PointRecord {
    key: u64,
    coords: Vec<f64>,
    live: bool,
}

struct Registry {
    points: Vec<PointRecord>,
    /// Divisor applied to every reported distance (1.0 until rescaling).
    scale: f64,
}

/// A distance source over registered points.
///
/// Queries are read-concurrent; registration and deletion are single-writer.
pub struct MetricOracle {
    backend: Backend,
    registry: RwLock<Registry>,
    query_count: AtomicU64,
    delta_bound: f64,
}

impl MetricOracle {
    pub fn new_matrix(rows: Vec<Vec<f64>>, delta_bound: f64) -> Self {
        Self::new(Backend::Matrix(rows), delta_bound)
    }

    pub fn new_euclidean(delta_bound: f64) -> Self {
        Self::new(Backend::Euclidean, delta_bound)
    }

    /// Builds the shortest-path backend from an undirected weighted edge list
    /// over `n` vertices (Floyd-Warshall; intended for test-scale graphs).
    pub fn new_graph(n: usize, edges: &[(usize, usize, f64)], delta_bound: f64) -> Self {
        let mut dist = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in dist.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(u, v, w) in edges {
            if dist[u][v] > w {
                dist[u][v] = w;
                dist[v][u] = w;
            }
        }
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = dist[i][m] + dist[m][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                    }
                }
            }
        }
        Self::new(Backend::Graph(dist), delta_bound)
    }

    pub fn new_callback<F>(f: F, delta_bound: f64) -> Self
    where
        F: Fn(u64, u64) -> f64 + Send + Sync + 'static,
    {
        Self::new(Backend::Callback(Box::new(f)), delta_bound)
    }

    fn new(backend: Backend, delta_bound: f64) -> Self {
        MetricOracle {
            backend,
            registry: RwLock::new(Registry { points: Vec::new(), scale: 1.0 }),
            query_count: AtomicU64::new(0),
            delta_bound,
        }
    }

    pub fn delta_bound(&self) -> f64 {
        self.delta_bound
    }

    /// Registers a point under an external key. For the matrix and graph
    /// backends the key selects the row/vertex; re-registering a deleted key
    /// yields a fresh id.
    pub fn register_point(&self, key: u64) -> Result<PointId> {
        self.register_with_coords(key, Vec::new())
    }

    pub fn register_with_coords(&self, key: u64, coords: Vec<f64>) -> Result<PointId> {
        let mut reg = self.registry.write().unwrap();
        if reg.points.iter().any(|r| r.live && r.key == key) {
            return Err(Error::DuplicateKey(key));
        }
        if let Backend::Matrix(rows) = &self.backend {
            if key as usize >= rows.len() {
                return Err(Error::InvalidParameter(format!(
                    "key {key} out of range for {}-row matrix",
                    rows.len()
                )));
            }
        }
        if let Backend::Graph(rows) = &self.backend {
            if key as usize >= rows.len() {
                return Err(Error::InvalidParameter(format!(
                    "key {key} out of range for {}-vertex graph",
                    rows.len()
                )));
            }
        }
        let id = PointId(reg.points.len() as u64);
        reg.points.push(PointRecord { key, coords, live: true });
        Ok(id)
    }

    pub fn delete_point(&self, p: PointId) -> Result<()> {
        let mut reg = self.registry.write().unwrap();
        let rec = reg.points.get_mut(p.index()).ok_or(Error::UnknownPoint(p))?;
        if !rec.live {
            return Err(Error::NotLive(p));
        }
        rec.live = false;
        Ok(())
    }

    pub fn is_live(&self, p: PointId) -> bool {
        let reg = self.registry.read().unwrap();
        reg.points.get(p.index()).map(|r| r.live).unwrap_or(false)
    }

    pub fn key_of(&self, p: PointId) -> Result<u64> {
        let reg = self.registry.read().unwrap();
        reg.points.get(p.index()).map(|r| r.key).ok_or(Error::UnknownPoint(p))
    }

    pub fn live_points(&self) -> Vec<PointId> {
        let reg = self.registry.read().unwrap();
        reg.points
            .iter()
            .enumerate()
            .filter(|(_, r)| r.live)
            .map(|(i, _)| PointId(i as u64))
            .collect()
    }

    pub fn num_registered(&self) -> usize {
        self.registry.read().unwrap().points.len()
    }

    pub fn query_count(&self) -> u64 {
        self.query_count.load(Ordering::Relaxed)
    }

    fn raw_distance(&self, reg: &Registry, p: PointId, q: PointId) -> Result<f64> {
        let rp = reg.points.get(p.index()).ok_or(Error::UnknownPoint(p))?;
        let rq = reg.points.get(q.index()).ok_or(Error::UnknownPoint(q))?;
        let d = match &self.backend {
            Backend::Matrix(rows) => rows[rp.key as usize][rq.key as usize],
            Backend::Graph(rows) => rows[rp.key as usize][rq.key as usize],
            Backend::Euclidean => rp
                .coords
                .iter()
                .zip(rq.coords.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Backend::Callback(f) => f(rp.key, rq.key),
        };
        Ok(d)
    }

    /// Metric distance between two registered (possibly deleted) points.
    /// Counts one oracle query unless `p == q`.
    pub fn distance(&self, p: PointId, q: PointId) -> Result<f64> {
        if p == q {
            let reg = self.registry.read().unwrap();
            if p.index() >= reg.points.len() {
                return Err(Error::UnknownPoint(p));
            }
            return Ok(0.0);
        }
        let reg = self.registry.read().unwrap();
        let d = self.raw_distance(&reg, p, q)? / reg.scale;
        self.query_count.fetch_add(1, Ordering::Relaxed);
        if d > self.delta_bound * (1.0 + 1e-9) {
            return Err(Error::AspectRatioViolated { p, q, observed: d, bound: self.delta_bound });
        }
        Ok(d)
    }

    /// Divides all reported distances by the current minimum pairwise
    /// distance among live points, so the minimum becomes 1. Returns the
    /// applied factor. Fewer than two live points is a no-op with factor 1.
    /// Internal scans here do not touch the query counter.
    pub fn rescale_to_unit_minimum(&self) -> Result<f64> {
        if matches!(self.backend, Backend::Callback(_)) {
            return Err(Error::UnsupportedBackend("rescaling a callback metric"));
        }
        let mut reg = self.registry.write().unwrap();
        let live: Vec<usize> = reg
            .points
            .iter()
            .enumerate()
            .filter(|(_, r)| r.live)
            .map(|(i, _)| i)
            .collect();
        if live.len() < 2 {
            return Ok(1.0);
        }
        let mut min = f64::INFINITY;
        for (a, &i) in live.iter().enumerate() {
            for &j in &live[a + 1..] {
                let d = self.raw_distance(&reg, PointId(i as u64), PointId(j as u64))?;
                if d > 0.0 && d < min {
                    min = d;
                }
            }
        }
        if !min.is_finite() || min <= 0.0 {
            return Err(Error::InvalidParameter(
                "no finite positive minimum pairwise distance".into(),
            ));
        }
        reg.scale = min;
        Ok(min)
    }

    /// Exhaustive symmetry + triangle inequality audit over all registered
    /// points. Intended for small test instances.
    pub fn audit_metric(&self) -> Result<()> {
        let n = self.num_registered();
        let ids: Vec<PointId> = (0..n as u64).map(PointId).collect();
        for &p in &ids {
            for &q in &ids {
                let dpq = self.distance(p, q)?;
                let dqp = self.distance(q, p)?;
                if (dpq - dqp).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!(
                        "asymmetric: d({p:?},{q:?})={dpq} vs {dqp}"
                    )));
                }
                for &r in &ids {
                    let dpr = self.distance(p, r)?;
                    let drq = self.distance(r, q)?;
                    if dpq > dpr + drq + 1e-9 {
                        return Err(Error::InvalidParameter(format!(
                            "triangle violated at ({p:?},{q:?},{r:?})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
