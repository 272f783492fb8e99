//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every line is printed even when
//! `cargo test` captures output. Exits nonzero if any criterion fails.
//! Criterion 12 needs external Alaska dual graphs; point
//! `NESTMATCH_ALASKA_DIR` at a directory holding `tight.json`,
//! `restricted.json` and `permissive.json` to run it.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use nestmatch::election::seats_for_matching;
use nestmatch::extremal::{
    max_weight_perfect_matching, min_weight_perfect_matching, seat_range, seat_weights,
    EdgeWeights, ExtremalError,
};
use nestmatch::generators::{grid_graph, grid_with_corner_diagonals, random_planar_graph};
use nestmatch::io::{load_graph, matching_line};
use nestmatch::recom::{run_chain, ChainConfig, ChainMetrics, Partition, PlanRecord};
use nestmatch::report::{matching_ensemble_report, MatchingSource};
use nestmatch::sample::{required_sample_size, Norm, SampleSizeSpec, Sampler};
use nestmatch::{
    count_by_enumeration, count_matchings_fkt, find_all_matchings, BigCount, DualGraph,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_nestmatch"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "nestmatch {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr).trim()
    );
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn big(s: &str) -> BigCount {
    s.parse().unwrap()
}

/// The eight matchings of the toy map with their D seat counts, written
/// as two-letter district pairs.
const TOY_TABLE: [(&str, usize); 8] = [
    ("WB/RC/OY/MV", 1),
    ("WB/RO/YM/CV", 2),
    ("WB/RV/CM/OY", 2),
    ("WB/RC/OV/MY", 2),
    ("WO/BY/RC/VM", 2),
    ("WO/BY/RV/CM", 3),
    ("WR/BO/YM/CV", 3),
    ("WR/BY/OV/CM", 4),
];

/// `WB/RC` becomes `B-W,C-R` sorted, matching the CLI line format.
fn table_line(row: &str) -> String {
    let mut pairs: Vec<String> = row
        .split('/')
        .map(|p| {
            let mut c: Vec<char> = p.chars().collect();
            c.sort();
            format!("{}-{}", c[0], c[1])
        })
        .collect();
    pairs.sort();
    pairs.join(",")
}

fn toy() -> DualGraph {
    load_graph(&fixture("toy.json")).unwrap()
}

fn c1_toy_enumeration() -> Check {
    let toy = fixture("toy.json");
    let toy = toy.to_str().unwrap();
    let listed: Vec<String> = cli(&["enumerate", toy])?
        .lines()
        .map(String::from)
        .collect();
    let mut want: Vec<String> = TOY_TABLE.iter().map(|(r, _)| table_line(r)).collect();
    want.sort();
    ensure!(
        listed == want,
        "enumerate printed {listed:?}, expected {want:?}"
    );
    let count = cli(&["count", toy])?;
    ensure!(count.trim() == "8", "count printed {count:?}");
    Ok("8 matchings, identical to the table; count = 8".into())
}

fn c2_ten_node_example() -> Check {
    let path = fixture("ten_node.json");
    let listed: BTreeSet<String> = cli(&["enumerate", path.to_str().unwrap()])?
        .lines()
        .map(String::from)
        .collect();
    let want: BTreeSet<String> = ["AB/CF/IJ/ED/GH", "AB/CF/IJ/EH/GD"]
        .iter()
        .map(|r| table_line(r))
        .collect();
    ensure!(listed == want, "got {listed:?}");
    Ok("{AB,CF,IJ,ED,GH} and {AB,CF,IJ,EH,GD}".into())
}

fn timed_fkt(g: &DualGraph, want: &str, limit: Duration) -> Result<Duration, String> {
    let start = Instant::now();
    let got = count_matchings_fkt(g).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    ensure!(got == big(want), "got {got}, expected {want}");
    ensure!(t < limit, "took {t:?}");
    Ok(t)
}

fn c3_grid_dimers() -> Check {
    let limit = Duration::from_secs(2);
    let t10 = timed_fkt(&grid_graph(10, 10), "258584046368", limit)?;
    let t12 = timed_fkt(&grid_graph(12, 12), "53060477521960000", limit)?;
    let base: BigCount = big("258584046368");
    let with_diagonals = (base + 745_241_088u64).to_string();
    let td = timed_fkt(&grid_with_corner_diagonals(10), &with_diagonals, limit)?;
    Ok(format!(
        "10x10, 12x12 and diagonals exact ({:.3} s, {:.3} s, {:.3} s)",
        t10.as_secs_f64(),
        t12.as_secs_f64(),
        td.as_secs_f64()
    ))
}

fn c4_oracle_equivalence() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0004);
    let mut nonzero = 0;
    for i in 0..200 {
        let n = 1 + i % 16;
        let density = rng.random_range(0.3..1.0);
        let g = random_planar_graph(&mut rng, n, density);
        let fkt = count_matchings_fkt(&g).map_err(|e| format!("graph {i}: {e}"))?;
        let all = find_all_matchings(&g);
        ensure!(
            BigCount::from(all.len()) == fkt,
            "graph {i}: FKT {fkt}, enumeration {}",
            all.len()
        );
        let distinct: HashSet<_> = all.iter().collect();
        ensure!(
            distinct.len() == all.len(),
            "graph {i}: duplicate matchings"
        );
        ensure!(
            all.iter().all(|m| m.is_perfect_for(&g)),
            "graph {i}: imperfect matching"
        );
        nonzero += usize::from(!all.is_empty());
    }
    Ok(format!("200 graphs agree ({nonzero} with matchings)"))
}

fn c5_grid_cross_check() -> Check {
    let mut times = Vec::new();
    for (side, want) in [(2, "2"), (4, "36"), (6, "6728"), (8, "12988816")] {
        let g = grid_graph(side, side);
        let fkt = count_matchings_fkt(&g).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let enumerated = count_by_enumeration(&g);
        times.push(start.elapsed().as_secs_f64());
        ensure!(fkt == big(want), "{side}x{side}: FKT {fkt}");
        ensure!(
            enumerated == big(want),
            "{side}x{side}: enumeration {enumerated}"
        );
    }
    Ok(format!(
        "2, 36, 6728, 12988816 by both routes (8x8 enumeration {:.1} s)",
        times[3]
    ))
}

fn c6_sampler_uniformity() -> Check {
    let g = toy();
    let mut worst = (1.0f64, 0.0f64);
    for seed in [1u64, 2, 3] {
        let mut sampler = Sampler::new(&g, seed).map_err(|e| e.to_string())?;
        ensure!(
            *sampler.total() == BigCount::from(8u32),
            "total {}",
            sampler.total()
        );
        let mut freq: BTreeMap<String, u32> = BTreeMap::new();
        for _ in 0..8000 {
            let draw = sampler.draw().map_err(|e| e.to_string())?;
            ensure!(
                draw.has_probability_inverse_of(&BigCount::from(8u32)),
                "seed {seed}: telescoping probability {:?} is not 1/8",
                draw.probability()
            );
            *freq.entry(matching_line(&g, &draw.matching)).or_default() += 1;
        }
        ensure!(freq.len() == 8, "seed {seed}: saw {} matchings", freq.len());
        for (m, c) in &freq {
            let f = *c as f64 / 8000.0;
            worst = (worst.0.min(f), worst.1.max(f));
            ensure!(
                (0.105..=0.145).contains(&f),
                "seed {seed}: {m} frequency {f}"
            );
        }
    }
    Ok(format!(
        "seeds 1, 2, 3: frequencies in [{:.4}, {:.4}], every draw 1/8",
        worst.0, worst.1
    ))
}

fn c7_sample_size() -> Check {
    let linf = required_sample_size(&SampleSizeSpec {
        epsilon: 0.1,
        delta: 0.05,
        norm: Norm::LInfinity,
    })
    .map_err(|e| e.to_string())?;
    let l1 = required_sample_size(&SampleSizeSpec {
        epsilon: 0.2,
        delta: 0.05,
        norm: Norm::L1 { n: 20 },
    })
    .map_err(|e| e.to_string())?;
    ensure!(linf == 1199 && l1 == 2000, "got {linf} and {l1}");
    let printed = cli(&["samplesize", "--epsilon", "0.1", "--delta", "0.05"])?;
    ensure!(printed.trim() == "1199", "CLI printed {printed:?}");
    Ok("1199 (L-infinity), 2000 (L1, n = 20)".into())
}

fn c8_extremal() -> Check {
    let g = toy();
    let w = seat_weights(&g, "toy").map_err(|e| e.to_string())?;
    let r = seat_range(&g, &w).map_err(|e| e.to_string())?;
    ensure!((r.min, r.max) == (1, 4), "seat range {:?}", (r.min, r.max));
    let witness_seats = seats_for_matching(&g, &r.max_witness, "toy").map_err(|e| e.to_string())?;
    ensure!(witness_seats == 4, "max witness wins {witness_seats}");

    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0008);
    let mut feasible = 0;
    for i in 0..100 {
        let n = 2 * (1 + i % 7);
        let density = rng.random_range(0.4..1.0);
        let g = random_planar_graph(&mut rng, n, density);
        let mut w = EdgeWeights::new();
        for (u, v) in g.edges() {
            w.set(&g, u, v, rng.random_range(-10..=10)).unwrap();
        }
        let all = find_all_matchings(&g);
        match (
            max_weight_perfect_matching(&g, &w),
            min_weight_perfect_matching(&g, &w),
        ) {
            (Err(ExtremalError::Infeasible), Err(ExtremalError::Infeasible)) => {
                ensure!(
                    all.is_empty(),
                    "graph {i}: Blossom found no perfect matching"
                )
            }
            (Ok((hi_m, hi)), Ok((lo_m, lo))) => {
                let totals: Vec<i64> = all.iter().map(|m| w.total(m)).collect();
                let (emin, emax) = (*totals.iter().min().unwrap(), *totals.iter().max().unwrap());
                ensure!(
                    hi == emax && lo == emin,
                    "graph {i}: Blossom ({lo}, {hi}), enumeration ({emin}, {emax})"
                );
                ensure!(
                    hi_m.is_perfect_for(&g) && lo_m.is_perfect_for(&g),
                    "graph {i}: witness not perfect"
                );
                feasible += 1;
            }
            (a, b) => return Err(format!("graph {i}: inconsistent results {a:?} / {b:?}")),
        }
    }
    Ok(format!(
        "toy range (1, 4); Blossom = enumeration on 100 graphs ({feasible} feasible)"
    ))
}

fn c9_seat_histogram() -> Check {
    let g = toy();
    let report = matching_ensemble_report(&g, &["toy".into()], MatchingSource::Enumerate, None)
        .map_err(|e| e.to_string())?;
    let t = &report.treatments[0];
    let want = BTreeMap::from([(1, 1), (2, 4), (3, 2), (4, 1)]);
    ensure!(t.seat_histogram == want, "histogram {:?}", t.seat_histogram);
    ensure!(t.mean_seats == 2.375, "mean {}", t.mean_seats);
    for (row, seats) in TOY_TABLE {
        let m =
            nestmatch::io::parse_matching_line(&g, &table_line(row)).map_err(|e| e.to_string())?;
        let got = seats_for_matching(&g, &m, "toy").map_err(|e| e.to_string())?;
        ensure!(got == seats, "{row}: {got} seats, table says {seats}");
    }
    Ok("{1:1, 2:4, 3:2, 4:1}, mean 2.375".into())
}

fn column_plan(g: DualGraph) -> Partition {
    Partition::from_fn(g, 8, 0.05, |v| (v.index() % 8) as u32 + 1).unwrap()
}

fn chain_records(seed: u64, checks: bool) -> Result<Vec<PlanRecord>, String> {
    let p = column_plan(grid_graph(8, 8));
    let cfg = ChainConfig::new(8, 0.05, 10_000, seed);
    let mut records = Vec::with_capacity(10_001);
    let mut prev: Option<Partition> = None;
    let mut violation = None;
    run_chain(&p, &cfg, &ChainMetrics::default(), |r, plan| {
        if checks && violation.is_none() {
            if let Err(e) = plan.validate() {
                violation = Some(format!("step {}: {e}", r.step));
            }
            if let Some(before) = &prev {
                let changed = plan.changed_districts(before).len();
                if changed > 2 {
                    violation = Some(format!("step {}: {changed} districts changed", r.step));
                }
            }
            prev = Some(plan.clone());
        }
        records.push(r.clone());
    })
    .map_err(|e| e.to_string())?;
    match violation {
        Some(v) => Err(v),
        None => Ok(records),
    }
}

fn record_bytes(records: &[PlanRecord]) -> Vec<u8> {
    serde_json::to_vec(records).unwrap()
}

fn c10_chain_validity(seed: u64, records: &[PlanRecord]) -> Check {
    ensure!(records.len() == 10_001, "{} records", records.len());
    let again = chain_records(seed, false)?;
    ensure!(
        record_bytes(records) == record_bytes(&again),
        "record streams differ"
    );
    let accepted = records.iter().skip(1).filter(|r| r.accepted).count();
    let distinct: HashSet<&str> = records.iter().map(|r| r.fingerprint.as_str()).collect();
    Ok(format!(
        "10,000 steps all valid, <= 2 districts changed per step, identical rerun ({accepted} accepted, {} distinct plans)",
        distinct.len()
    ))
}

fn c11_matchability_scatter(records: &[PlanRecord]) -> Check {
    let mut by_edges: BTreeMap<usize, BTreeSet<BigCount>> = BTreeMap::new();
    for r in records {
        if let Some(c) = &r.matchings {
            by_edges.entry(r.dual_edges).or_default().insert(c.clone());
        }
    }
    match by_edges.iter().find(|(_, counts)| counts.len() >= 2) {
        Some((edges, counts)) => Ok(format!(
            "{edges} dual edges with {} different matching counts, e.g. {} and {}",
            counts.len(),
            counts.iter().next().unwrap(),
            counts.iter().next_back().unwrap()
        )),
        None => Err("every dual-edge count has a single matching count".into()),
    }
}

fn c10_11_chain() -> (Check, Check) {
    let seed = 20_260_101;
    match chain_records(seed, true) {
        Ok(records) => (
            c10_chain_validity(seed, &records),
            c11_matchability_scatter(&records),
        ),
        Err(e) => (Err(e), Err("chain did not complete".into())),
    }
}

fn alaska_counts(dir: &Path) -> Check {
    for (name, edges, want) in [
        ("tight.json", 89, 14_446u64),
        ("restricted.json", 92, 29_289),
        ("permissive.json", 100, 108_765),
    ] {
        let g = load_graph(&dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(
            g.edge_count() == edges,
            "{name}: {} dual edges",
            g.edge_count()
        );
        let count = count_matchings_fkt(&g).unwrap_or_else(|_| count_by_enumeration(&g));
        ensure!(count == BigCount::from(want), "{name}: {count} matchings");
    }
    Ok("Alaska dual graphs: 14,446 / 29,289 / 108,765".into())
}

struct Tally {
    passed: usize,
    failed: usize,
}

impl Tally {
    fn report(&mut self, id: &str, name: &str, limit: Duration, elapsed: Duration, result: Check) {
        let over = elapsed > limit;
        let (status, detail) = match result {
            Ok(d) if !over => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {} s limit", limit.as_secs())),
            Err(e) => ("FAIL", e),
        };
        if status == "PASS" {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!(
            "{status} [{id:>2}] {name} ({:.2} s / {} s): {detail}",
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }

    fn run(&mut self, id: &str, name: &str, limit_secs: u64, f: impl FnOnce() -> Check) {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        self.report(
            id,
            name,
            Duration::from_secs(limit_secs),
            start.elapsed(),
            result,
        );
    }
}

fn main() {
    let mut t = Tally {
        passed: 0,
        failed: 0,
    };
    t.run(
        "1",
        "toy-graph enumeration and count",
        1,
        c1_toy_enumeration,
    );
    t.run("2", "worked-example enumeration", 1, c2_ten_node_example);
    t.run("3", "grid dimer counts by FKT", 6, c3_grid_dimers);
    t.run(
        "4",
        "FKT = enumeration on 200 random planar graphs",
        60,
        c4_oracle_equivalence,
    );
    t.run(
        "5",
        "grid counts by FKT and enumeration",
        600,
        c5_grid_cross_check,
    );
    t.run(
        "6",
        "sampler uniformity and exact 1/8",
        30,
        c6_sampler_uniformity,
    );
    t.run("7", "sample-size bounds", 1, c7_sample_size);
    t.run("8", "extremal seats and Blossom oracle", 60, c8_extremal);
    t.run("9", "toy seat histogram", 1, c9_seat_histogram);

    let start = Instant::now();
    let (c10, c11) = c10_11_chain();
    let elapsed = start.elapsed();
    t.report(
        "10",
        "ReCom chain validity and reproducibility",
        Duration::from_secs(300),
        elapsed,
        c10,
    );
    t.report(
        "11",
        "equal dual edges, different matching counts",
        Duration::from_secs(300),
        elapsed,
        c11,
    );

    match std::env::var_os("NESTMATCH_ALASKA_DIR") {
        None => println!("SKIP [12] Alaska dataset values: set NESTMATCH_ALASKA_DIR to run"),
        Some(dir) => t.run("12", "Alaska dataset values", 600, || {
            alaska_counts(Path::new(&dir))
        }),
    }
    println!("acceptance: {} passed, {} failed", t.passed, t.failed);
    if t.failed > 0 {
        std::process::exit(1);
    }
}
