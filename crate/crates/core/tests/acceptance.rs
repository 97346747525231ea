//! Acceptance criteria. Each test prints one `[PASS]` or `[FAIL]` line; run
//! with `cargo test -p antsteer-core --test acceptance -- --nocapture`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use antsteer::acs::{self, init_pheromone, Colony, Eta, NoSteering, PheromoneMatrix};
use antsteer::instance::{EdgeWeightType, Instance, Point, Tour};
use antsteer::oracle::{brute_force_optimum, exact_optimum};
use antsteer::session::{cluster_solve, merge_tours, to_jsonl, Session};
use antsteer::steering::{steered_select_next, SteeringState, SteeringUpdate};
use antsteer::{parse_tsplib, AcsParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BURMA14: &str = include_str!("../data/burma14.tsp");
const ULYSSES16: &str = include_str!("../data/ulysses16.tsp");
const BURMA14X2: &str = include_str!("../data/burma14x2.tsp");

/// Runs `body`, prints the verdict and fails the test on error or overrun.
fn criterion(name: &str, limit: Option<Duration>, body: impl FnOnce() -> Result<String, String>) {
    let started = Instant::now();
    let outcome = body();
    let elapsed = started.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
        (other, _) => other,
    };
    match outcome {
        Ok(detail) => println!("[PASS] {name} ({elapsed:.2?}) {detail}"),
        Err(detail) => {
            println!("[FAIL] {name} ({elapsed:.2?}) {detail}");
            panic!("{name}: {detail}");
        }
    }
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn burma14() -> Arc<Instance> {
    Arc::new(parse_tsplib(BURMA14).unwrap())
}

const A: usize = 0;
const B: usize = 1;
const C: usize = 2;
const D: usize = 3;
const E: usize = 4;

/// Costs from C are reciprocal to the wanted probabilities 0.3, 0.4, 0.1, 0.2
/// (weights 1/40, 1/30, 1/120, 1/60 out of 1/12).
fn five_nodes() -> Instance {
    let from_c = [40, 30, 0, 120, 60];
    let rows = (0..5)
        .map(|i| {
            (0..5)
                .map(|j| match (i, j) {
                    _ if i == j => 0,
                    (C, k) | (k, C) => from_c[k],
                    _ => 50,
                })
                .collect()
        })
        .collect();
    Instance::from_matrix("abcde", rows).unwrap()
}

#[test]
fn steered_transition_law() {
    criterion("steered transition law", Some(Duration::from_secs(5)), || {
        let inst = five_nodes();
        let mut state = SteeringState::new(5, 1.0).unwrap();
        state.set_him_entry(B, C, 0.5).unwrap();
        state.set_him_entry(C, B, 0.5).unwrap();
        state.set_him_entry(C, E, 0.1).unwrap();
        let tau: PheromoneMatrix<f64> = init_pheromone(5, 100).unwrap();
        let eta = Eta::new(&inst);
        let params = AcsParams { beta: 1.0, q0: 0.0, ..AcsParams::default() };
        let draws = 100_000usize;
        let mut counts = [0usize; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..draws {
            counts[steered_select_next(C, &[A, B, D, E], &state, &tau, &eta, &params, &mut rng).node] += 1;
        }
        let expected = [(A, 0.3), (B, 0.5), (D, 0.1), (E, 0.1)];
        let mut detail = String::new();
        for (node, p) in expected {
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            let dev = (counts[node] as f64 - draws as f64 * p).abs();
            ensure(dev <= 3.0 * sd, || format!("node {node}: {} draws, expected {p}, deviation {:.1} sd", counts[node], dev / sd))?;
            detail += &format!("{}={:.4} ", "ABCDE".as_bytes()[node] as char, counts[node] as f64 / draws as f64);
        }
        // Within the miss branch A and D split 3:1.
        let a_share = counts[A] as f64 / (counts[A] + counts[D]) as f64;
        Ok(format!("{detail}A|miss={a_share:.3}"))
    });
}

#[test]
fn update_rule_arithmetic() {
    criterion("update rule arithmetic", None, || {
        // tau 0.05 everywhere, rho 0.1, n 5, initial tour 10.
        let mut p: PheromoneMatrix<f64> = init_pheromone(5, 4).unwrap();
        p.local_update(1, 2, 0.1, 10);
        let local = p.get(1, 2);
        ensure((local - 0.047).abs() <= 1e-12, || format!("local update gave {local}"))?;
        ensure(p.get(2, 1) == local, || "symmetric mirror missing".into())?;

        // tau 0.02 everywhere, best tour of length 12.
        let tri = Instance::from_coordinates(
            "tri",
            EdgeWeightType::Euc2d,
            vec![Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 4.0)],
        )
        .unwrap();
        let best = Tour::new(&tri, vec![0, 1, 2]).unwrap();
        let mut p: PheromoneMatrix<f64> = init_pheromone(5, 10).unwrap();
        p.global_update(&best, 0.1);
        let global = p.get(0, 1);
        let want = 0.9 * 0.02 + 0.1 / 12.0;
        ensure((global - want).abs() <= 1e-12, || format!("global update gave {global}, want {want}"))?;
        ensure(p.get(0, 3) == 0.02, || "edge off the best tour changed".into())?;
        Ok(format!("local={local:.6} global={global:.6}"))
    });
}

fn gap(length: u64, optimum: u64) -> f64 {
    100.0 * (length as f64 - optimum as f64) / optimum as f64
}

#[test]
fn burma14_quality() {
    criterion("burma14 quality over 10 seeds", Some(Duration::from_secs(60)), || {
        let inst = burma14();
        let optimum = exact_optimum(&inst).unwrap().length;
        ensure(optimum == 3323, || format!("optimum {optimum}"))?;
        let mut gaps: Vec<f64> = (0..10u64)
            .map(|seed| {
                let best = acs::run(inst.clone(), AcsParams::default().with_seed(seed), None, &mut NoSteering, &mut acs::NullSink)
                    .unwrap();
                gap(best.tour.length(), optimum)
            })
            .collect();
        let within = gaps.iter().filter(|&&g| g <= 5.0).count();
        gaps.sort_by(f64::total_cmp);
        let median = (gaps[4] + gaps[5]) / 2.0;
        ensure(within >= 9, || format!("{within}/10 runs within 5%: {gaps:?}"))?;
        ensure(median <= 2.0, || format!("median gap {median:.2}%: {gaps:?}"))?;
        Ok(format!("within5%={within}/10 median={median:.2}% worst={:.2}%", gaps[9]))
    });
}

#[test]
fn neutrality_equivalence() {
    criterion("neutrality equivalence over 5 seeds", Some(Duration::from_secs(30)), || {
        let inst = burma14();
        for seed in 0..5u64 {
            let params = AcsParams::default().with_seed(seed);
            let mut plain_events = Vec::new();
            acs::run(inst.clone(), params.clone(), None, &mut NoSteering, &mut plain_events).unwrap();
            let plain = to_jsonl(&plain_events);
            for hif in [0.0, 1.0] {
                let mut session = Session::create(inst.clone(), params.clone(), hif).unwrap();
                session.run_to_end().unwrap();
                let steered = to_jsonl(session.events());
                ensure(steered.as_bytes() == plain.as_bytes(), || format!("seed {seed} hif {hif}: logs differ"))?;
            }
            // Impact factor zero with a populated matrix is neutral as well.
            let mut session = Session::create(inst.clone(), params.clone(), 0.0).unwrap();
            session.apply_steering_update(SteeringUpdate::entry(0, 9, 0.8).with_entry(4, 3, 0.5)).unwrap();
            session.run_to_end().unwrap();
            let tail: Vec<_> = session.events()[1..].to_vec();
            let unversioned: Vec<acs::Event> = tail.into_iter().map(without_version).collect();
            ensure(unversioned == plain_events, || format!("seed {seed}: zero impact with entries changed the run"))?;
        }
        Ok(String::new())
    });
}

fn without_version(mut e: acs::Event) -> acs::Event {
    if let acs::Event::Iteration { steering_version, .. } = &mut e {
        *steering_version = 0;
    }
    e
}

#[test]
fn pause_transparency() {
    criterion("pause transparency", Some(Duration::from_secs(30)), || {
        let inst = burma14();
        let params = AcsParams::default().with_seed(11);
        let dir = tempfile::tempdir().unwrap();

        let mut straight = Session::create(inst.clone(), params.clone(), 0.5).unwrap();
        straight.run_to_end().unwrap();
        straight.persist(&dir.path().join("straight")).unwrap();

        let mut paused = Session::create(inst, params, 0.5).unwrap();
        paused.start().unwrap();
        let pause_at = [1, 17, 60, 61, 249];
        while paused.status() == antsteer::Status::Running {
            paused.step().unwrap();
            if pause_at.contains(&paused.iteration()) {
                paused.pause().unwrap();
                let _ = paused.snapshot();
                paused.resume().unwrap();
            }
        }
        paused.persist(&dir.path().join("paused")).unwrap();

        let a = std::fs::read(dir.path().join("straight/result.json")).unwrap();
        let b = std::fs::read(dir.path().join("paused/result.json")).unwrap();
        ensure(a == b, || "result.json differs".into())?;
        let ea = std::fs::read(dir.path().join("straight/events.jsonl")).unwrap();
        let eb = std::fs::read(dir.path().join("paused/events.jsonl")).unwrap();
        ensure(ea == eb, || "events.jsonl differs".into())?;
        Ok(format!("best={}", straight.best().tour.length()))
    });
}

#[test]
fn forced_edge_compliance() {
    criterion("forced edge compliance", Some(Duration::from_secs(10)), || {
        let inst = burma14();
        let (from, to) = (1usize, 2usize);
        let params = AcsParams::default().with_seed(5);
        let mut colony = Colony::new(inst.clone(), params.clone()).unwrap();
        let mut state = SteeringState::new(14, 1.0).unwrap();
        state.set_him_entry(from, to, 1.0).unwrap();
        // Let the trail develop first so the check runs against a mid-run colony.
        colony = colony.with_steering(state.clone()).unwrap();
        for _ in 0..20 {
            colony.iterate(&mut acs::NullSink);
        }
        let mut constructions = 0usize;
        let mut leaving = 0usize;
        let mut violations = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        while constructions < 10_000 {
            let start = rng.gen_range(0..14);
            let tour = acs::construct_solution(&inst, start, colony.pheromone(), colony.eta(), &params, Some(&state), &mut rng)
                .map_err(|e| e.to_string())?;
            let order = tour.order();
            let at = order.iter().position(|&v| v == from).unwrap();
            let to_pos = order.iter().position(|&v| v == to).unwrap();
            if at + 1 < order.len() && to_pos > at {
                leaving += 1;
                violations += usize::from(order[at + 1] != to);
            }
            constructions += 1;
        }
        ensure(violations == 0, || format!("{violations} violations in {leaving} steps"))?;
        Ok(format!("constructions={constructions} steps_checked={leaving}"))
    });
}

#[test]
fn exact_oracle_cross_check() {
    criterion("Held-Karp equals brute force on 50 instances", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for k in 0..50 {
            let points = (0..8).map(|_| Point::new(rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0))).collect();
            let inst = Instance::from_coordinates(format!("r{k}"), EdgeWeightType::Euc2d, points).unwrap();
            let hk = exact_optimum(&inst).unwrap();
            let bf = brute_force_optimum(&inst).unwrap();
            ensure(hk.length == bf.length, || format!("instance {k}: {} vs {}", hk.length, bf.length))?;
        }
        Ok(String::new())
    });
}

#[test]
fn monotonicity_and_positivity() {
    criterion("burma14 monotone best and positive trail", None, || {
        let inst = burma14();
        for seed in [0u64, 1, 2] {
            let mut colony = Colony::new(inst.clone(), AcsParams::default().with_seed(seed)).unwrap();
            let mut previous = colony.best().tour.length();
            while !colony.is_done() {
                let best = colony.iterate(&mut acs::NullSink).tour.length();
                ensure(best <= previous, || format!("seed {seed} iteration {}: {previous} -> {best}", colony.iteration()))?;
                previous = best;
                let min = colony.pheromone().values().iter().copied().fold(f64::INFINITY, f64::min);
                ensure(min > 0.0, || format!("seed {seed} iteration {}: min trail {min}", colony.iteration()))?;
            }
        }
        Ok(String::new())
    });
}

/// Length the doubled instance merges to with the default parameters.
const DOUBLED_BURMA_MERGED: u64 = 7069;

#[test]
fn cluster_merge_validity() {
    criterion("cluster merge on doubled burma14", Some(Duration::from_secs(60)), || {
        let inst = parse_tsplib(BURMA14X2).unwrap();
        let south: Vec<usize> = (0..14).collect();
        let north: Vec<usize> = (14..28).collect();
        let tour = cluster_solve(&inst, [&south, &north], &AcsParams::default()).map_err(|e| e.to_string())?;
        let mut seen = tour.order().to_vec();
        seen.sort_unstable();
        ensure(seen == (0..28).collect::<Vec<_>>(), || "not a permutation of 28 nodes".into())?;
        let recomputed: u64 = tour.edges().map(|(a, b)| inst.cost(a, b)).sum();
        ensure(recomputed == tour.length(), || format!("length {} but edges sum to {recomputed}", tour.length()))?;

        // Reference: exact cluster tours joined by an independent exhaustive merge.
        let (reference, merged_exact) = exact_merge(&inst, &south, &north);
        ensure(merged_exact == reference, || format!("merge of exact cluster tours gave {merged_exact}, reference {reference}"))?;
        ensure(
            tour.length() == DOUBLED_BURMA_MERGED,
            || format!("merged length {} (pinned {DOUBLED_BURMA_MERGED}, exact-cluster reference {reference})", tour.length()),
        )?;
        Ok(format!("length={} exact_cluster_reference={reference}", tour.length()))
    });
}

/// Independent two-edge exchange over exact cluster tours, and what
/// `merge_tours` makes of the same tours.
fn exact_merge(inst: &Instance, south: &[usize], north: &[usize]) -> (u64, u64) {
    let solve = |nodes: &[usize]| -> Vec<usize> {
        let sub = inst.subset("c", nodes).unwrap();
        exact_optimum(&sub).unwrap().order.iter().map(|&k| nodes[k]).collect()
    };
    let (s, t) = (solve(south), solve(north));
    let cyc = |o: &[usize]| -> u64 { (0..o.len()).map(|k| inst.cost(o[k], o[(k + 1) % o.len()])).sum() };
    let base = cyc(&s) + cyc(&t);
    let mut best = u64::MAX;
    for i in 0..s.len() {
        let (a, b) = (s[i], s[(i + 1) % s.len()]);
        for j in 0..t.len() {
            let (c, d) = (t[j], t[(j + 1) % t.len()]);
            let removed = inst.cost(a, b) + inst.cost(c, d);
            for added in [inst.cost(a, c) + inst.cost(b, d), inst.cost(a, d) + inst.cost(b, c)] {
                best = best.min(base + added - removed);
            }
        }
    }
    (best, merge_tours(inst, &s, &t).length())
}

/// Independent TSPLIB95 reading of NODE_COORD_SECTION and distance functions.
fn reference_costs(text: &str) -> (String, Vec<Vec<u64>>) {
    let mut kind = String::new();
    let mut coords: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut in_coords = false;
    for line in text.lines().map(str::trim) {
        if line.starts_with("EDGE_WEIGHT_TYPE") {
            kind = line.split(':').nth(1).unwrap().trim().to_string();
        } else if line == "NODE_COORD_SECTION" {
            in_coords = true;
        } else if line == "EOF" || line.is_empty() {
            in_coords = false;
        } else if in_coords {
            let f: Vec<&str> = line.split_whitespace().collect();
            coords.insert(f[0].parse().unwrap(), (f[1].parse().unwrap(), f[2].parse().unwrap()));
        }
    }
    let pts: Vec<(f64, f64)> = coords.into_values().collect();
    #[allow(clippy::approx_constant)]
    let latlon = |v: f64| {
        let deg = v.trunc();
        3.141592 * (deg + 5.0 * (v - deg) / 3.0) / 180.0
    };
    let d = |p: (f64, f64), q: (f64, f64)| -> u64 {
        match kind.as_str() {
            "EUC_2D" => ((p.0 - q.0).hypot(p.1 - q.1) + 0.5).floor() as u64,
            "GEO" => {
                let (lat1, lon1, lat2, lon2) = (latlon(p.0), latlon(p.1), latlon(q.0), latlon(q.1));
                let q1 = (lon1 - lon2).cos();
                let q2 = (lat1 - lat2).cos();
                let q3 = (lat1 + lat2).cos();
                (6378.388 * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0) as u64
            }
            other => panic!("unexpected type {other}"),
        }
    };
    let costs = (0..pts.len())
        .map(|i| (0..pts.len()).map(|j| if i == j { 0 } else { d(pts[i], pts[j]) }).collect())
        .collect();
    (kind, costs)
}

#[test]
fn tsplib_bit_exactness() {
    criterion("TSPLIB distance bit-exactness", None, || {
        let euc = {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut text = String::from("NAME : rand30\nTYPE : TSP\nDIMENSION : 30\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n");
            for k in 1..=30 {
                text += &format!("{k} {:.3} {:.3}\n", rng.gen_range(0.0..5000.0), rng.gen_range(0.0..5000.0));
            }
            text + "EOF\n"
        };
        let mut checked = 0;
        for (label, text) in [("burma14", BURMA14), ("ulysses16", ULYSSES16), ("burma14x2", BURMA14X2), ("rand30", euc.as_str())] {
            let inst = parse_tsplib(text).map_err(|e| format!("{label}: {e}"))?;
            let (_, want) = reference_costs(text);
            for (i, row) in want.iter().enumerate() {
                for (j, &w) in row.iter().enumerate() {
                    ensure(inst.cost(i, j) == w, || format!("{label} ({i},{j}): {} vs {w}", inst.cost(i, j)))?;
                    checked += 1;
                }
            }
        }
        Ok(format!("pairs={checked}"))
    });
}
