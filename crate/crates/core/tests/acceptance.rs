//! End-to-end acceptance checks, one test per shipped guarantee. Each test
//! finishes with a single PASS line describing what it verified.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynclus_core::adversary::{self, AdvOp, Adversary};
use dynclus_core::det_tree::ClusteringTree;
use dynclus_core::kcenter::{CounterState, DelOnlyState, OvermarsState};
use dynclus_core::ladder::{Ladder, QueryResult};
use dynclus_core::oracle::{exact_kcenter, exact_sum_of_diameters, exact_sum_of_radii};
use dynclus_core::sor::DualState;
use dynclus_core::{MetricOracle, PointId};

const SLACK: f64 = 1e-9;

/// distinct integer grid points scaled by `spacing`: pairwise distance is at
/// least `spacing`, so rescaled instances have unit minimum when spacing = 1
fn grid_coords(rng: &mut ChaCha8Rng, n: usize, extent: u64, spacing: f64) -> Vec<Vec<f64>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let cell = (rng.gen_range(0..extent), rng.gen_range(0..extent));
        if seen.insert(cell) {
            out.push(vec![cell.0 as f64 * spacing, cell.1 as f64 * spacing]);
        }
    }
    out
}

/// random metric with entries in [1, 2]: triangle holds for any such matrix
fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = 1.0 + rng.gen::<f64>();
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    m
}

#[test]
fn criterion_1_kcenter_end_to_end_ratio() {
    let mut checked = 0usize;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let k = 2 + (seed as usize % 4);
        let euclidean = seed % 2 == 0;
        let (metric, delta) = if euclidean {
            (Arc::new(MetricOracle::new_euclidean(64.0)), 64.0)
        } else {
            (Arc::new(MetricOracle::new_matrix(random_metric(&mut rng, 40), 2.5)), 2.5)
        };
        let coords = grid_coords(&mut rng, 120, 40, 1.0);
        let mut free: Vec<u64> = (0..40).collect();
        let mut seed_ctr = seed * 100;
        let mut ladder = Ladder::new(0.5, delta, |opt| {
            seed_ctr += 1;
            OvermarsState::new(metric.clone(), k, opt, seed_ctr)
        })
        .unwrap();
        let mut live: Vec<PointId> = Vec::new();
        let mut next_key = 0u64;
        for op in 0..120usize {
            if live.len() < k + 2 || (live.len() < 16 && rng.gen_bool(0.6)) {
                let p = if euclidean {
                    let key = next_key;
                    next_key += 1;
                    metric.register_with_coords(key, coords[key as usize % 120].clone()).unwrap()
                } else {
                    let key = free.swap_remove(rng.gen_range(0..free.len()));
                    metric.register_point(key).unwrap()
                };
                ladder.insert(p);
                live.push(p);
            } else {
                let i = rng.gen_range(0..live.len());
                let p = live.swap_remove(i);
                if !euclidean {
                    free.push(metric.key_of(p).unwrap());
                }
                metric.delete_point(p).unwrap();
                ladder.delete(p);
            }
            if op % 5 == 4 && live.len() > k {
                let exact = exact_kcenter(&metric, &live, k).unwrap().cost;
                if exact <= 0.0 {
                    continue;
                }
                let (_, sol) = ladder.query().expect("within the declared range");
                let value = sol.cost;
                assert!(
                    value <= 6.0 * 1.5 * exact + SLACK,
                    "seed {seed}: value {value} vs exact {exact}"
                );
                let true_cost = sol.coverage_radius(&metric, &live);
                assert!(
                    true_cost <= 6.0 * 1.5 * exact + SLACK,
                    "seed {seed}: solution cost {true_cost} vs exact {exact}"
                );
                checked += 1;
            }
        }
    }
    println!("criterion 1: PASS — {checked} k-center queries within 6·(1+ε)·OPT");
}

#[test]
fn criterion_2_kcenter_linear_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 200;
    let metric = Arc::new(MetricOracle::new_matrix(random_metric(&mut rng, n), 2.5));
    let mut state = CounterState::new(metric.clone(), 5, 1.2);
    let mut live: Vec<PointId> = Vec::new();
    let mut free: Vec<u64> = (0..n as u64).collect();
    let mut ops = 0usize;
    while ops < 100_000 {
        if live.len() < 60 && (!free.is_empty() && (live.is_empty() || rng.gen_bool(0.52))) {
            let key = free.swap_remove(rng.gen_range(0..free.len()));
            let p = metric.register_point(key).unwrap();
            state.insert(p);
            live.push(p);
        } else {
            let i = rng.gen_range(0..live.len());
            let p = live.swap_remove(i);
            free.push(metric.key_of(p).unwrap());
            metric.delete_point(p).unwrap();
            state.delete(p);
        }
        ops += 1;
        state.audit();
    }
    println!("criterion 2: PASS — counter invariants held over {ops} audited operations");
}

#[test]
fn criterion_3_deletion_only_sessions() {
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let n0 = 300usize;
        let k = 2 + (seed as usize % 3);
        let metric = Arc::new(MetricOracle::new_matrix(random_metric(&mut rng, n0), 2.5));
        let mut points: Vec<PointId> =
            (0..n0 as u64).map(|key| metric.register_point(key).unwrap()).collect();
        // one estimate the instance can satisfy, one it must reject
        for &opt_prime in &[1.5, 0.45] {
            let mut state = DelOnlyState::build(
                metric.clone(),
                k,
                opt_prime,
                &points,
                ChaCha8Rng::seed_from_u64(seed * 7 + 1),
            );
            let bound = 2 * k * (n0 as f64).log2().ceil() as usize;
            let mut remaining = points.clone();
            while remaining.len() > 1 {
                let i = rng.gen_range(0..remaining.len());
                let p = remaining.swap_remove(i);
                state.delete(p);
                if remaining.len() % 10 == 0 {
                    state.audit();
                    match state.query() {
                        QueryResult::Valid(sol) => {
                            assert!(sol.num_centers() <= bound, "too many centers");
                            let radius = sol.coverage_radius(&metric, &remaining);
                            assert!(
                                radius <= 4.0 * opt_prime + SLACK,
                                "seed {seed}: cover radius {radius} at estimate {opt_prime}"
                            );
                        }
                        QueryResult::Exceeded => {
                            // k+1 pairwise-far star centers witness OPT > OPT'
                            let star = state.star_centers();
                            assert!(star.len() >= k + 1);
                            let witness = &star[..k + 1];
                            for (a, &p) in witness.iter().enumerate() {
                                for &q in &witness[a + 1..] {
                                    assert!(
                                        metric.distance(p, q).unwrap() > 2.0 * opt_prime,
                                        "assertion without a pairwise-far witness"
                                    );
                                }
                            }
                        }
                    }
                }
            }
            // ≥ k deletions between rebuilds is asserted inside the rebuild
            // itself; reaching here means no session violated it
        }
        // fresh ids for the next estimate round are not needed: deletions in
        // one session do not touch the other state, but the metric registry
        // must be rebuilt for the next seed
        points.clear();
    }
    println!("criterion 3: PASS — 20 deletion-only sessions met the 4·OPT' and witness contracts");
}

struct SorRun {
    metric: Arc<MetricOracle>,
    live: Vec<PointId>,
    k: usize,
    epsilon: f64,
}

fn sor_stream(seed: u64, cap: usize) -> SorRun {
    let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
    let metric = Arc::new(MetricOracle::new_euclidean(256.0));
    let coords = grid_coords(&mut rng, cap, 24, 2.0);
    let live = coords
        .into_iter()
        .enumerate()
        .map(|(i, xs)| metric.register_with_coords(i as u64, xs).unwrap())
        .collect();
    SorRun { metric, live, k: 2 + (seed as usize % 2), epsilon: if seed % 2 == 0 { 1.0 } else { 0.5 } }
}

#[test]
fn criterion_4_sum_of_radii() {
    let mut ratio_checks = 0usize;
    for seed in 0..50u64 {
        let oracle_scale = seed < 25;
        let run = sor_stream(seed, if oracle_scale { 12 } else { 40 });
        let SorRun { metric, live: all_points, k, epsilon } = run;
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + seed);
        let mut instance =
            DualState::new(metric.clone(), k, epsilon, 4.0, seed * 3 + 1).unwrap();
        let mut seed_ctr = seed * 1000;
        let mut ladder = Ladder::new(epsilon, k as f64 * 70.0, |opt| {
            seed_ctr += 1;
            DualState::new(metric.clone(), k, epsilon, opt, seed_ctr).unwrap()
        })
        .unwrap();
        let mut live: Vec<PointId> = Vec::new();
        let mut pool = all_points.clone();
        for _ in 0..80usize {
            if !pool.is_empty() && (live.len() <= k || rng.gen_bool(0.6)) {
                let p = pool.pop().unwrap();
                live.push(p);
                instance.insert(p);
                ladder.insert(p);
            } else {
                let i = rng.gen_range(0..live.len());
                let p = live.remove(i);
                pool.push(p);
                instance.delete(p);
                ladder.delete(p);
            }
            instance.audit(&live);
            if let QueryResult::Valid(sol) = instance.query() {
                assert!(
                    sol.cost <= (8.0 + epsilon) * instance.opt_prime() + SLACK,
                    "seed {seed}: instance cost {} at estimate {}",
                    sol.cost,
                    instance.opt_prime()
                );
            } else if oracle_scale && !live.is_empty() {
                let exact = exact_sum_of_radii(&metric, &live, k).unwrap().cost;
                assert!(
                    exact > instance.opt_prime(),
                    "seed {seed}: assertion not confirmed by the oracle"
                );
            }
            if oracle_scale && live.len() > k {
                let exact = exact_sum_of_radii(&metric, &live, k).unwrap().cost;
                if exact > 0.0 {
                    let (_, sol) = ladder.query().expect("range covers the optimum");
                    assert!(
                        sol.cost <= (8.0 + epsilon) * (1.0 + epsilon) * exact + SLACK,
                        "seed {seed}: ladder cost {} vs exact {exact}",
                        sol.cost
                    );
                    ratio_checks += 1;
                }
            }
        }
    }
    println!("criterion 4: PASS — dual audits on 50 streams, {ratio_checks} exact-ratio checks");
}

#[test]
fn criterion_5_sum_of_diameters() {
    let mut checks = 0usize;
    for seed in 0..25u64 {
        let run = sor_stream(seed * 2, 10);
        let SorRun { metric, live: all_points, k, epsilon } = run;
        let mut seed_ctr = seed * 1000 + 7;
        let mut ladder = Ladder::new(epsilon, k as f64 * 70.0, |opt| {
            seed_ctr += 1;
            DualState::new(metric.clone(), k, epsilon, opt, seed_ctr).unwrap()
        })
        .unwrap();
        let mut live: Vec<PointId> = Vec::new();
        for &p in &all_points {
            live.push(p);
            ladder.insert(p);
            if live.len() <= k {
                continue;
            }
            let sod = ladder
                .query_with(|inst| match inst.sod_query(&live) {
                    Some(sol) => QueryResult::Valid(sol),
                    None => QueryResult::Exceeded,
                })
                .expect("range covers the optimum");
            let sor = ladder.query().expect("range covers the optimum");
            assert!(sod.1.cost <= 2.0 * sor.1.cost + SLACK, "seed {seed}: SoD above twice SoR");
            let exact = exact_sum_of_diameters(&metric, &live, k).unwrap().cost;
            if exact > 0.0 {
                assert!(
                    sod.1.cost <= 2.0 * (8.0 + epsilon) * (1.0 + epsilon) * exact + SLACK,
                    "seed {seed}: SoD cost {} vs exact {exact}",
                    sod.1.cost
                );
                checks += 1;
            }
        }
    }
    println!("criterion 5: PASS — {checks} sum-of-diameters checks within the factor-2 reduction");
}

#[test]
fn criterion_6_deterministic_tree() {
    let mut ratio_checks = 0usize;
    for seed in 0..30u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        let k = [2usize, 4, 8][seed as usize % 3];
        let metric = Arc::new(MetricOracle::new_euclidean(128.0));
        let coords = grid_coords(&mut rng, 60, 80, 1.0);
        let mut ladder =
            Ladder::new(0.5, 128.0, |opt| ClusteringTree::new(metric.clone(), k, opt)).unwrap();
        let mut live: Vec<PointId> = Vec::new();
        let mut next = 0usize;
        let mut trace: Vec<(u64, bool)> = Vec::new();
        let mut replay_ops: Vec<(bool, u64)> = Vec::new();
        for _ in 0..100usize {
            if next < coords.len() && (live.len() <= k || rng.gen_bool(0.65)) {
                let p = metric
                    .register_with_coords(next as u64, coords[next].clone())
                    .unwrap();
                replay_ops.push((true, next as u64));
                next += 1;
                ladder.insert(p);
                live.push(p);
            } else if !live.is_empty() {
                let i = rng.gen_range(0..live.len());
                let p = live.swap_remove(i);
                replay_ops.push((false, metric.key_of(p).unwrap()));
                metric.delete_point(p).unwrap();
                ladder.delete(p);
            }
            let answer = ladder.query();
            trace.push((
                answer.as_ref().map(|(e, _)| e.to_bits()).unwrap_or(0),
                answer.is_some(),
            ));
            if k <= 5 && live.len() > k && live.len() <= 16 {
                let exact = exact_kcenter(&metric, &live, k).unwrap().cost;
                if exact > 0.0 {
                    let (_, sol) = answer.expect("range covers the optimum");
                    let log_term = ((live.len() as f64 / k as f64).log2().ceil() as usize).max(1);
                    let bound = 1.5 * (4 * k).min(4 * log_term) as f64 * exact;
                    assert!(
                        sol.cost <= bound + SLACK,
                        "seed {seed}: tree cost {} vs bound {bound}",
                        sol.cost
                    );
                    ratio_checks += 1;
                }
            }
        }
        // bit-exact replay on a fresh metric and tree
        let metric2 = Arc::new(MetricOracle::new_euclidean(128.0));
        let mut ladder2 =
            Ladder::new(0.5, 128.0, |opt| ClusteringTree::new(metric2.clone(), k, opt)).unwrap();
        let mut by_key = std::collections::BTreeMap::new();
        let mut trace2 = Vec::new();
        for &(is_insert, key) in &replay_ops {
            if is_insert {
                let p = metric2
                    .register_with_coords(key, coords[key as usize].clone())
                    .unwrap();
                by_key.insert(key, p);
                ladder2.insert(p);
            } else {
                let p = by_key.remove(&key).unwrap();
                metric2.delete_point(p).unwrap();
                ladder2.delete(p);
            }
            let answer = ladder2.query();
            trace2.push((
                answer.as_ref().map(|(e, _)| e.to_bits()).unwrap_or(0),
                answer.is_some(),
            ));
        }
        assert_eq!(trace, trace2, "seed {seed}: replay diverged");
    }
    println!("criterion 6: PASS — 30 deterministic-tree streams, {ratio_checks} oracle ratio checks");
}

#[test]
fn criterion_7_query_count_scaling() {
    let n = 2000usize;
    let mut amortized = Vec::new();
    for &k in &[2usize, 4, 8, 16] {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // points on a line of extent n: the covering radius is about n/(2k),
        // so a slightly larger estimate keeps every layer at Θ(k) centers
        let mut xs: Vec<u64> = (0..n as u64).collect();
        xs.shuffle(&mut rng);
        let metric = Arc::new(MetricOracle::new_euclidean(2.0 * n as f64));
        let opt_prime = 1.05 * n as f64 / (2.0 * k as f64);
        let mut state = OvermarsState::new(metric.clone(), k, opt_prime, 70 + k as u64);
        let mut live = Vec::new();
        let mut ops = 0usize;
        let mut local = ChaCha8Rng::seed_from_u64(77);
        let mut next_key = 0u64;
        for i in 0..n {
            let p = metric.register_with_coords(next_key, vec![xs[i] as f64]).unwrap();
            next_key += 1;
            state.insert(p);
            live.push(p);
            ops += 1;
        }
        // steady-state churn at n live points, deletions skewed to recent
        // arrivals so every level keeps turning over
        for _ in 0..10_000 {
            let lo = live.len().saturating_sub(100);
            let i = local.gen_range(lo..live.len());
            let q = live.remove(i);
            metric.delete_point(q).unwrap();
            state.delete(q);
            let x = local.gen_range(0.0..n as f64);
            let p = metric.register_with_coords(next_key, vec![x]).unwrap();
            next_key += 1;
            state.insert(p);
            live.push(p);
            ops += 2;
        }
        amortized.push(metric.query_count() as f64 / ops as f64);
    }
    let mut log_ratios = Vec::new();
    for w in amortized.windows(2) {
        let ratio = w[1] / w[0];
        assert!(
            ratio <= 2.8,
            "per-doubling query growth {ratio} exceeds 2.8 (amortized: {amortized:?})"
        );
        log_ratios.push(ratio.log2());
    }
    let exponent = log_ratios.iter().sum::<f64>() / log_ratios.len() as f64;
    println!(
        "criterion 7: PASS — amortized queries/op {amortized:?}, fitted exponent {exponent:.3} \
         (soft window [0.7, 1.4])"
    );
    if !(0.7..=1.4).contains(&exponent) {
        println!("criterion 7: note — exponent {exponent:.3} outside the soft window");
    }
}

#[test]
fn criterion_8_adaptive_adversary_invariants() {
    for run in 0..10u64 {
        let mut adv = Adversary::new(1, 1e6, |_, _| 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8000 + run);
        let mut live: Vec<usize> = Vec::new();
        let mut clean_ops: Vec<usize> = Vec::new();
        let mut snapshot = None;
        let total = 10_000usize;
        for _ in 0..total {
            match adv.next_op() {
                AdvOp::Insert(v) => live.push(v),
                AdvOp::Delete(v) => {
                    let i = live.iter().position(|&x| x == v).unwrap();
                    live.swap_remove(i);
                }
            }
            for _ in 0..5 {
                let (a, b) =
                    (live[rng.gen_range(0..live.len())], live[rng.gen_range(0..live.len())]);
                if a != b {
                    adv.answer(a, b);
                }
            }
            let t = adv.op_index();
            assert!(
                adv.active_count() * 100 + 100 >= 96 * t,
                "run {run}: active fraction fell below 96% at t={t}"
            );
            assert!(
                (adv.max_degree() as f64) <= 100.0 * 5.0,
                "run {run}: degree cap broken at t={t}"
            );
            if adv.is_clean() {
                clean_ops.push(t);
                if snapshot.is_none() && t >= 1100 {
                    snapshot = Some((t, adv.clean_snapshot().unwrap()));
                    adv.audit(snapshot.as_ref().map(|(_, s)| s));
                }
            }
        }
        // a clean operation inside (t, 2t] for every t
        let mut j = 0usize;
        for t in 1..=total / 2 {
            while j < clean_ops.len() && clean_ops[j] <= t {
                j += 1;
            }
            assert!(
                j < clean_ops.len() && clean_ops[j] <= 2 * t,
                "run {run}: no clean operation in ({t}, {}]",
                2 * t
            );
        }
        let (snap_t, snap) = snapshot.expect("no clean snapshot reached");
        // triangle inequality on sampled triples of each consistent metric
        let n = snap.m_uni.len();
        let mut tri = ChaCha8Rng::seed_from_u64(run);
        for m in [&snap.m_uni, &snap.m_star, &snap.m_range, &snap.m_multi] {
            for _ in 0..200_000 {
                let (a, b, c) =
                    (tri.gen_range(0..n), tri.gen_range(0..n), tri.gen_range(0..n));
                assert!(m[a][b] <= m[a][c] + m[c][b] + SLACK, "triangle violated");
                assert!((m[a][b] - m[b][a]).abs() <= SLACK);
            }
        }
        // layer census at the snapshot: the M_uni vs M(p*) gap witness
        let ell = (((n as f64) / 2.0).ln() / 502.0_f64.ln()).floor() as usize;
        if ell >= 1 {
            let fraction = adv.layer_fraction(snap.p_star, ell - 1);
            assert!(
                fraction < 0.5,
                "run {run}: {fraction} of actives within distance {} of p*",
                ell - 1
            );
        }
        let _ = snap_t;
    }
    println!("criterion 8: PASS — 10 adversary runs of 10^4 ops held all four invariants");
}

#[test]
fn criterion_9_oblivious_identification_rates() {
    let k = 32usize;
    let blocks = 1000usize;
    let script = adversary::oblivious_stream(k, 8.0, blocks, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);

    let mut full_correct = 0usize;
    let mut near_total = 0usize;
    let mut partial_hits = 0usize;
    for b in &script.blocks {
        // full queryer: all k probe-anchor distances
        let found = (0..k).find(|&a| script.matrix[b.probe][a] == 1.0);
        let full_says_near = found.is_some();
        if full_says_near == b.near && found.unwrap_or(b.hidden_anchor) == b.hidden_anchor {
            full_correct += 1;
        }
        // budgeted queryer: ⌊k/4⌋ distinct random candidates
        let mut sample = BTreeSet::new();
        while sample.len() < k / 4 {
            sample.insert(rng.gen_range(0..k));
        }
        if b.near {
            near_total += 1;
            if sample.contains(&b.hidden_anchor) {
                partial_hits += 1;
            }
        }
    }
    assert_eq!(full_correct, blocks, "full queryer must always identify the coin");
    let freq = partial_hits as f64 / near_total as f64;
    let sigma = (0.25 * 0.75 / near_total as f64).sqrt();
    assert!(
        freq <= 0.34 + 3.0 * sigma,
        "partial queryer identified {freq} of near blocks (limit {})",
        0.34 + 3.0 * sigma
    );
    println!(
        "criterion 9: PASS — full queryer 100%, ⌊k/4⌋ queryer {freq:.3} ≤ {:.3}",
        0.34 + 3.0 * sigma
    );
}
