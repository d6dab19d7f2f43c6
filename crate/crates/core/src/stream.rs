//! Stream file format, metric input files, and workload generators.
//!
//! One operation per line: `+ <key>`, `- <key>`, `?v` (value query),
//! `?s` (solution query). Metric inputs come either as a full matrix file
//! (first line n, then n rows) or a coordinates file (`id x1 x2 ... xd`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{self, AdvOp, ScriptOp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamOp {
    Insert(u64),
    Delete(u64),
    QueryValue,
    QuerySolution,
}

pub fn parse_ops(text: &str) -> Result<Vec<StreamOp>> {
    let mut ops = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let op = match s.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["+", key] => StreamOp::Insert(parse_key(key, line)?),
            ["-", key] => StreamOp::Delete(parse_key(key, line)?),
            ["?v"] => StreamOp::QueryValue,
            ["?s"] => StreamOp::QuerySolution,
            _ => {
                return Err(Error::MalformedStream {
                    line,
                    reason: format!("unrecognized operation: {s:?}"),
                })
            }
        };
        ops.push(op);
    }
    Ok(ops)
}

fn parse_key(token: &str, line: usize) -> Result<u64> {
    token.parse().map_err(|_| Error::MalformedStream {
        line,
        reason: format!("invalid point key: {token:?}"),
    })
}

pub fn format_ops(ops: &[StreamOp]) -> String {
    let mut out = String::new();
    for op in ops {
        match op {
            StreamOp::Insert(k) => out.push_str(&format!("+ {k}\n")),
            StreamOp::Delete(k) => out.push_str(&format!("- {k}\n")),
            StreamOp::QueryValue => out.push_str("?v\n"),
            StreamOp::QuerySolution => out.push_str("?s\n"),
        }
    }
    out
}

/// Matrix file: first line n, then n whitespace-separated rows.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().enumerate().filter(|(_, s)| !s.trim().is_empty());
    let (line, first) = lines.next().ok_or(Error::MalformedStream {
        line: 1,
        reason: "empty matrix file".into(),
    })?;
    let n: usize = first.trim().parse().map_err(|_| Error::MalformedStream {
        line: line + 1,
        reason: format!("expected point count, got {:?}", first.trim()),
    })?;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (idx, raw) = lines.next().ok_or(Error::MalformedStream {
            line: 0,
            reason: format!("expected {n} matrix rows, file ended early"),
        })?;
        let row = parse_floats(raw, idx + 1)?;
        if row.len() != n {
            return Err(Error::MalformedStream {
                line: idx + 1,
                reason: format!("expected {n} entries, got {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Coordinates file: one `id x1 x2 ... xd` per line, consistent dimension.
pub fn parse_coords(text: &str) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut out: Vec<(u64, Vec<f64>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let mut parts = s.split_whitespace();
        let id = parse_key(parts.next().unwrap(), line)?;
        let coords: Vec<f64> = parse_floats(&parts.collect::<Vec<_>>().join(" "), line)?;
        if coords.is_empty() {
            return Err(Error::MalformedStream {
                line,
                reason: "point has no coordinates".into(),
            });
        }
        if let Some((_, prev)) = out.first() {
            if prev.len() != coords.len() {
                return Err(Error::MalformedStream {
                    line,
                    reason: format!(
                        "dimension mismatch: {} vs {}",
                        coords.len(),
                        prev.len()
                    ),
                });
            }
        }
        out.push((id, coords));
    }
    Ok(out)
}

fn parse_floats(raw: &str, line: usize) -> Result<Vec<f64>> {
    raw.split_whitespace()
        .map(|t| {
            t.parse().map_err(|_| Error::MalformedStream {
                line,
                reason: format!("invalid number: {t:?}"),
            })
        })
        .collect()
}

pub fn format_matrix(m: &[Vec<f64>]) -> String {
    let mut out = format!("{}\n", m.len());
    for row in m {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_coords(coords: &[(u64, Vec<f64>)]) -> String {
    let mut out = String::new();
    for (id, xs) in coords {
        let cells: Vec<String> = xs.iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!("{id} {}\n", cells.join(" ")));
    }
    out
}

/// A generated workload: the op stream plus whichever metric artifact the
/// generator produces, and optional ground-truth labels.
pub struct GeneratedStream {
    pub ops: Vec<StreamOp>,
    pub coords: Option<Vec<(u64, Vec<f64>)>>,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub labels: Option<Vec<(u64, usize)>>,
}

/// n uniform points in the unit cube; all inserted with a value query every
/// five ops, then a random half deleted with interleaved queries.
pub fn uniform_euclidean(n: usize, dim: usize, seed: u64) -> Result<GeneratedStream> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidParameter("n and dim must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<(u64, Vec<f64>)> = (0..n as u64)
        .map(|id| (id, (0..dim).map(|_| rng.gen::<f64>()).collect()))
        .collect();
    let mut ops = Vec::new();
    for id in 0..n as u64 {
        ops.push(StreamOp::Insert(id));
        if (id + 1) % 5 == 0 {
            ops.push(StreamOp::QueryValue);
        }
    }
    let mut victims: Vec<u64> = (0..n as u64).collect();
    for i in (1..victims.len()).rev() {
        victims.swap(i, rng.gen_range(0..=i));
    }
    for (i, &v) in victims.iter().take(n / 2).enumerate() {
        ops.push(StreamOp::Delete(v));
        if (i + 1) % 5 == 0 {
            ops.push(StreamOp::QueryValue);
        }
    }
    ops.push(StreamOp::QuerySolution);
    Ok(GeneratedStream { ops, coords: Some(coords), matrix: None, labels: None })
}

/// Gaussian blobs around uniformly placed cluster centers; labels record
/// each point's true cluster.
pub fn clustered_gaussian(
    n: usize,
    clusters: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Result<GeneratedStream> {
    if n == 0 || clusters == 0 || dim == 0 || spread <= 0.0 {
        return Err(Error::InvalidParameter(
            "need positive n, clusters, dim, spread".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f64>> = (0..clusters)
        .map(|_| (0..dim).map(|_| rng.gen::<f64>() * 10.0).collect())
        .collect();
    let gauss = move |rng: &mut ChaCha8Rng| {
        // Box-Muller
        let u: f64 = rng.gen::<f64>().max(1e-12);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    };
    let mut coords = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for id in 0..n as u64 {
        let c = rng.gen_range(0..clusters);
        let xs: Vec<f64> = centers[c]
            .iter()
            .map(|&x| x + spread * gauss(&mut rng))
            .collect();
        coords.push((id, xs));
        labels.push((id, c));
    }
    let mut ops = Vec::new();
    for id in 0..n as u64 {
        ops.push(StreamOp::Insert(id));
        if (id + 1) % 5 == 0 {
            ops.push(StreamOp::QueryValue);
        }
    }
    ops.push(StreamOp::QuerySolution);
    Ok(GeneratedStream { ops, coords: Some(coords), matrix: None, labels: Some(labels) })
}

/// Window of width w over `total` uniform points: w inserts, then
/// insert/delete pairs with a value query after each slide.
pub fn sliding_window(w: usize, total: usize, dim: usize, seed: u64) -> Result<GeneratedStream> {
    if w == 0 || total < w || dim == 0 {
        return Err(Error::InvalidParameter(format!(
            "need 0 < w <= total and dim > 0, got w={w}, total={total}, dim={dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<(u64, Vec<f64>)> = (0..total as u64)
        .map(|id| (id, (0..dim).map(|_| rng.gen::<f64>()).collect()))
        .collect();
    let mut ops = Vec::new();
    for id in 0..w as u64 {
        ops.push(StreamOp::Insert(id));
    }
    ops.push(StreamOp::QueryValue);
    for id in w as u64..total as u64 {
        ops.push(StreamOp::Insert(id));
        ops.push(StreamOp::Delete(id - w as u64));
        ops.push(StreamOp::QueryValue);
    }
    Ok(GeneratedStream { ops, coords: Some(coords), matrix: None, labels: None })
}

/// Oblivious hard stream: delegates to the adversary module and lowers its
/// script to the shared op format plus an explicit matrix.
pub fn adversary_oblivious(
    k: usize,
    delta: f64,
    blocks: usize,
    seed: u64,
) -> Result<GeneratedStream> {
    let script = adversary::oblivious_stream(k, delta, blocks, seed)?;
    let ops = script
        .ops
        .iter()
        .map(|op| match *op {
            ScriptOp::Insert(v) => StreamOp::Insert(v as u64),
            ScriptOp::Delete(v) => StreamOp::Delete(v as u64),
            ScriptOp::QueryValue => StreamOp::QueryValue,
        })
        .collect();
    let labels = script
        .blocks
        .iter()
        .map(|b| (b.probe as u64, if b.near { b.hidden_anchor } else { script.k + b.probe }))
        .collect();
    Ok(GeneratedStream {
        ops,
        coords: None,
        matrix: Some(script.matrix),
        labels: Some(labels),
    })
}

/// Adaptive adversary run against a seeded random prober with query budget
/// f = 5 per op; the emitted matrix is the uniform consistent metric of the
/// final clean snapshot, so the stream replays deterministically.
pub fn adversary_adaptive(k: usize, num_ops: usize, seed: u64) -> Result<GeneratedStream> {
    if k == 0 || num_ops == 0 {
        return Err(Error::InvalidParameter("need positive k and op count".into()));
    }
    let cap = (num_ops as f64).max(4.0);
    let mut adv = adversary::Adversary::new(k, cap, |_, _| 5.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::new();
    let mut emit = |adv: &mut adversary::Adversary, ops: &mut Vec<StreamOp>| {
        match adv.next_op() {
            AdvOp::Insert(v) => ops.push(StreamOp::Insert(v as u64)),
            AdvOp::Delete(v) => ops.push(StreamOp::Delete(v as u64)),
        }
        let n = adv.num_vertices();
        for _ in 0..5 {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                adv.answer(a, b);
            }
        }
    };
    for i in 0..num_ops {
        emit(&mut adv, &mut ops);
        if (i + 1) % 10 == 0 {
            ops.push(StreamOp::QueryValue);
        }
    }
    // drain passive vertices so the final snapshot is clean
    while !adv.is_clean() {
        emit(&mut adv, &mut ops);
    }
    let snap = adv.clean_snapshot()?;
    Ok(GeneratedStream {
        ops,
        coords: None,
        matrix: Some(snap.m_uni),
        labels: None,
    })
}
