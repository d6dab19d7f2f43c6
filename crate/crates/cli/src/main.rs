use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use dynclus_core::det_tree::ClusteringTree;
use dynclus_core::kcenter::OvermarsState;
use dynclus_core::ladder::{Ladder, QueryResult};
use dynclus_core::oracle::{exact_kcenter, exact_sum_of_diameters, exact_sum_of_radii};
use dynclus_core::sor::DualState;
use dynclus_core::stream::{self, StreamOp};
use dynclus_core::{MetricOracle, PointId, Solution};

#[derive(Parser)]
#[command(name = "dynclus", about = "dynamic clustering structures over update streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a stream through a clustering structure and write a CSV report
    Run(RunArgs),
    /// Generate a workload (stream plus metric input) deterministically
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objective {
    Kcenter,
    KcenterDet,
    Sor,
    Sod,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleMode {
    On,
    Off,
}

#[derive(Parser)]
struct RunArgs {
    #[arg(long, value_enum)]
    objective: Objective,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// aspect ratio bound: max distance after rescaling to unit minimum
    #[arg(long)]
    delta: f64,
    /// full distance matrix file (first line n, then n rows)
    #[arg(long, conflicts_with = "coords")]
    metric: Option<PathBuf>,
    /// coordinates file: one `id x1 x2 ... xd` per line
    #[arg(long)]
    coords: Option<PathBuf>,
    #[arg(long)]
    stream: PathBuf,
    #[arg(long, value_enum, default_value = "off")]
    oracle: OracleMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV report path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Parser)]
struct GenerateArgs {
    /// uniform-euclidean | clustered-gaussian | sliding-window |
    /// adversary-adaptive | adversary-oblivious
    #[arg(long)]
    kind: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 0.2)]
    spread: f64,
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 16.0)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    blocks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// output prefix: writes <out>.stream plus <out>.coords or <out>.matrix
    /// and <out>.labels when ground truth exists
    #[arg(long)]
    out: PathBuf,
}

enum Structure {
    Kcenter(Ladder<OvermarsState>),
    KcenterDet(Ladder<ClusteringTree>),
    Dual(Ladder<DualState>),
}

impl Structure {
    fn insert(&mut self, p: PointId) {
        match self {
            Structure::Kcenter(l) => l.insert(p),
            Structure::KcenterDet(l) => l.insert(p),
            Structure::Dual(l) => l.insert(p),
        }
    }

    fn delete(&mut self, p: PointId) {
        match self {
            Structure::Kcenter(l) => l.delete(p),
            Structure::KcenterDet(l) => l.delete(p),
            Structure::Dual(l) => l.delete(p),
        }
    }

    fn query(&self, objective: Objective, live: &[PointId]) -> Option<(f64, Solution)> {
        match self {
            Structure::Kcenter(l) => l.query(),
            Structure::KcenterDet(l) => l.query(),
            Structure::Dual(l) => {
                if objective == Objective::Sod {
                    l.query_with(|inst| match inst.sod_query(live) {
                        Some(sol) => QueryResult::Valid(sol),
                        None => QueryResult::Exceeded,
                    })
                } else {
                    l.query()
                }
            }
        }
    }
}

fn min_positive(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    if m.is_finite() {
        m
    } else {
        1.0
    }
}

/// 9 significant digits, scientific notation.
fn sig9(v: f64) -> String {
    format!("{v:.8e}")
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    if args.k == 0 {
        bail!("k must be positive");
    }
    if args.delta < 1.0 {
        bail!("delta must be at least 1");
    }
    let stream_text = fs::read_to_string(&args.stream)
        .with_context(|| format!("reading stream {}", args.stream.display()))?;
    let ops = stream::parse_ops(&stream_text)?;

    let mut coord_table: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    let metric = if let Some(path) = &args.metric {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading matrix {}", path.display()))?;
        let mut rows = stream::parse_matrix(&text)?;
        // the contract puts the minimum distance at 1 and the maximum at Δ
        let scale = min_positive(rows.iter().flatten().copied());
        for row in &mut rows {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
        Arc::new(MetricOracle::new_matrix(rows, args.delta))
    } else if let Some(path) = &args.coords {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading coordinates {}", path.display()))?;
        for (id, xs) in stream::parse_coords(&text)? {
            coord_table.insert(id, xs);
        }
        let pts: Vec<&Vec<f64>> = coord_table.values().collect();
        let scale = min_positive(pts.iter().enumerate().flat_map(|(i, a)| {
            pts[i + 1..].iter().map(move |b| {
                a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            })
        }));
        for xs in coord_table.values_mut() {
            for v in xs.iter_mut() {
                *v /= scale;
            }
        }
        Arc::new(MetricOracle::new_euclidean(args.delta))
    } else {
        bail!("either --metric or --coords is required");
    };

    let structure = build_structure(&args, &metric)?;
    let report = replay(&args, &metric, structure, &ops, &coord_table)?;
    match &args.out {
        Some(path) => fs::write(path, report)
            .with_context(|| format!("writing report {}", path.display()))?,
        None => print!("{report}"),
    }
    Ok(())
}

fn build_structure(args: &RunArgs, metric: &Arc<MetricOracle>) -> anyhow::Result<Structure> {
    let mut seed = args.seed;
    let mut next_seed = move || {
        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        seed
    };
    Ok(match args.objective {
        Objective::Kcenter => Structure::Kcenter(Ladder::new(args.epsilon, args.delta, |opt| {
            OvermarsState::new(metric.clone(), args.k, opt, next_seed())
        })?),
        Objective::KcenterDet => {
            Structure::KcenterDet(Ladder::new(args.epsilon, args.delta, |opt| {
                ClusteringTree::new(metric.clone(), args.k, opt)
            })?)
        }
        Objective::Sor | Objective::Sod => {
            dynclus_core::ladder::require_integral_reciprocal(args.epsilon)?;
            let range_top = args.k as f64 * args.delta;
            Structure::Dual(Ladder::new(args.epsilon, range_top, |opt| {
                DualState::new(metric.clone(), args.k, args.epsilon, opt, next_seed())
                    .expect("epsilon validated above")
            })?)
        }
    })
}

fn replay(
    args: &RunArgs,
    metric: &Arc<MetricOracle>,
    mut structure: Structure,
    ops: &[StreamOp],
    coord_table: &BTreeMap<u64, Vec<f64>>,
) -> anyhow::Result<String> {
    let mut live: BTreeMap<u64, PointId> = BTreeMap::new();
    let mut csv = String::from("index,kind,cost,oracle_cost,ratio,queries,wall_time\n");
    let mut max_ratio: f64 = 0.0;
    let mut warned_budget = false;
    let started = Instant::now();
    for (index, &op) in ops.iter().enumerate() {
        let op_start = Instant::now();
        let kind;
        let mut cost: Option<f64> = None;
        let mut oracle_cost: Option<f64> = None;
        match op {
            StreamOp::Insert(key) => {
                kind = "insert";
                let p = if coord_table.is_empty() {
                    metric.register_point(key)?
                } else {
                    let xs = coord_table
                        .get(&key)
                        .ok_or_else(|| anyhow!("stream inserts key {key} absent from the coordinates file"))?;
                    metric.register_with_coords(key, xs.clone())?
                };
                live.insert(key, p);
                structure.insert(p);
            }
            StreamOp::Delete(key) => {
                kind = "delete";
                let p = live
                    .remove(&key)
                    .ok_or_else(|| anyhow!("stream deletes key {key} which is not live"))?;
                metric.delete_point(p)?;
                structure.delete(p);
            }
            StreamOp::QueryValue | StreamOp::QuerySolution => {
                let solution_query = op == StreamOp::QuerySolution;
                kind = if solution_query { "query_solution" } else { "query_value" };
                let points: Vec<PointId> = live.values().copied().collect();
                let answer = structure.query(args.objective, &points);
                cost = answer.as_ref().map(|(opt, sol)| match args.objective {
                    // value answer is the guarantee at the selected estimate;
                    // solution answer is the returned set's true cost
                    Objective::Kcenter | Objective::KcenterDet if solution_query => {
                        sol.coverage_radius(metric, &points)
                    }
                    Objective::Kcenter | Objective::KcenterDet => sol.cost.max(*opt),
                    _ => sol.cost,
                });
                if args.oracle == OracleMode::On {
                    oracle_cost = exact_cost(args.objective, metric, &points, args.k);
                    if oracle_cost.is_none() && !warned_budget {
                        eprintln!(
                            "warning: instance exceeds the exact oracle budget, ratio column left blank"
                        );
                        warned_budget = true;
                    }
                }
            }
        }
        let ratio = match (cost, oracle_cost) {
            (Some(c), Some(o)) if o > 0.0 => {
                let r = c / o;
                max_ratio = max_ratio.max(r);
                Some(r)
            }
            _ => None,
        };
        csv.push_str(&format!(
            "{index},{kind},{},{},{},{},{}\n",
            cost.map(sig9).unwrap_or_default(),
            oracle_cost.map(sig9).unwrap_or_default(),
            ratio.map(sig9).unwrap_or_default(),
            metric.query_count(),
            sig9(op_start.elapsed().as_secs_f64()),
        ));
    }
    let amortized = metric.query_count() as f64 / ops.len().max(1) as f64;
    csv.push_str(&format!(
        "summary,,,,{},{},{}\n",
        sig9(max_ratio),
        metric.query_count(),
        sig9(started.elapsed().as_secs_f64()),
    ));
    csv.push_str(&format!("# amortized queries/op: {}\n", sig9(amortized)));
    Ok(csv)
}

fn exact_cost(
    objective: Objective,
    metric: &Arc<MetricOracle>,
    points: &[PointId],
    k: usize,
) -> Option<f64> {
    let result = match objective {
        Objective::Kcenter | Objective::KcenterDet => exact_kcenter(metric, points, k),
        Objective::Sor => exact_sum_of_radii(metric, points, k),
        Objective::Sod => exact_sum_of_diameters(metric, points, k),
    };
    result.ok().map(|r| r.cost)
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let generated = match args.kind.as_str() {
        "uniform-euclidean" => stream::uniform_euclidean(args.n, args.dim, args.seed)?,
        "clustered-gaussian" => {
            stream::clustered_gaussian(args.n, args.clusters, args.dim, args.spread, args.seed)?
        }
        "sliding-window" => stream::sliding_window(args.window, args.n, args.dim, args.seed)?,
        "adversary-adaptive" => stream::adversary_adaptive(args.k, args.n, args.seed)?,
        "adversary-oblivious" => {
            stream::adversary_oblivious(args.k, args.delta, args.blocks, args.seed)?
        }
        other => bail!("unknown stream kind {other:?}"),
    };
    let prefix = args.out.to_string_lossy();
    fs::write(format!("{prefix}.stream"), stream::format_ops(&generated.ops))?;
    if let Some(coords) = &generated.coords {
        fs::write(format!("{prefix}.coords"), stream::format_coords(coords))?;
    }
    if let Some(matrix) = &generated.matrix {
        fs::write(format!("{prefix}.matrix"), stream::format_matrix(matrix))?;
    }
    if let Some(labels) = &generated.labels {
        let mut text = String::new();
        for (id, label) in labels {
            text.push_str(&format!("{id} {label}\n"));
        }
        fs::write(format!("{prefix}.labels"), text)?;
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Generate(args) => generate(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
