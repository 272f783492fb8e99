use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use nestmatch::election::{AttributeMajoritySpec, ElectionError};
use nestmatch::embed::EmbedError;
use nestmatch::extremal::{seat_range, seat_weights, ExtremalError};
use nestmatch::fkt::FktError;
use nestmatch::io::{
    emit_delimited, emit_lines, emit_structured, fmt_f64, histogram_table, matching_line,
    parse_matching_line, LoadError, RunManifest, Table,
};
use nestmatch::recom::{
    run_chain, seeded_initial_partition, ChainConfig, ChainError, ChainMetrics, ExtremePlanTracker,
    Partition, PartitionError, PlanRecord,
};
use nestmatch::report::{MatchingReport, MatchingSource, ReportError};
use nestmatch::sample::{Norm, SampleError, SampleSizeSpec, Sampler};
use nestmatch::{
    count_matchings_fkt, parse_graph, required_sample_size, stream_matchings, DualGraph,
};

/// Perfect-matching analysis of nested districting plans.
#[derive(Parser)]
#[command(name = "nestmatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count perfect matchings with FKT.
    Count(CountArgs),
    /// List every perfect matching, one per line, in sorted order.
    Enumerate(EnumerateArgs),
    /// Draw uniform perfect matchings and tabulate their frequencies.
    Sample(SampleArgs),
    /// Fewest and most seats over all perfect matchings, with witnesses.
    Extremes(ExtremesArgs),
    /// Seat and competitiveness distributions over the matchings.
    Analyze(AnalyzeArgs),
    /// Run the recombination chain on a unit-level graph.
    Chain(ChainArgs),
    /// Samples needed to estimate frequencies within epsilon.
    Samplesize(SamplesizeArgs),
}

#[derive(Args, Serialize)]
struct CountArgs {
    graph: PathBuf,
}

#[derive(Args, Serialize)]
struct EnumerateArgs {
    graph: PathBuf,
    /// Write matchings here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SampleArgs {
    graph: PathBuf,
    #[arg(long)]
    k: u64,
    #[arg(long)]
    seed: u64,
    /// Write the drawn matchings here, in draw order.
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExtremesArgs {
    graph: PathBuf,
    #[arg(long)]
    election: String,
}

#[derive(Args, Serialize)]
struct AnalyzeArgs {
    graph: PathBuf,
    /// Election to tabulate; repeat for several.
    #[arg(long = "election", required = true)]
    elections: Vec<String>,
    /// File whose first line is the enacted matching as `u-v,u-v,...`.
    #[arg(long)]
    enacted: Option<PathBuf>,
    /// Use this many uniform samples instead of full enumeration.
    #[arg(long, requires = "seed")]
    sample: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write delimited tables and a structured report here.
    #[arg(long)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ChainArgs {
    graph: PathBuf,
    #[arg(long)]
    k: u32,
    #[arg(long)]
    tol: f64,
    #[arg(long)]
    steps: u64,
    #[arg(long)]
    seed: u64,
    /// Spanning trees to try per step before keeping the plan.
    #[arg(long, default_value_t = nestmatch::recom::DEFAULT_CUT_RETRIES)]
    retries: u32,
    /// Node attribute holding each unit's initial district (1..k). Without
    /// it a random balanced plan is built from the seed.
    #[arg(long)]
    initial_attr: Option<String>,
    #[arg(long = "election")]
    elections: Vec<String>,
    /// Count districts where this attribute is a majority of `--base`.
    #[arg(long, requires = "base")]
    attribute: Option<String>,
    #[arg(long)]
    base: Option<String>,
    /// Largest non-planar district graph counted by enumeration.
    #[arg(long, default_value_t = nestmatch::recom::DEFAULT_ENUMERATION_LIMIT)]
    enumeration_limit: usize,
    /// Write records.csv and extremes.json here instead of records to stdout.
    #[arg(long)]
    #[serde(skip)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SamplesizeArgs {
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Bound the L1 error over `--n` outcomes instead of the largest error.
    #[arg(long, requires = "n")]
    l1: bool,
    #[arg(long)]
    n: Option<u64>,
}

enum Failure {
    Validation(String),
    Infeasible(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Infeasible(m) | Failure::Io(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

impl From<ElectionError> for Failure {
    fn from(e: ElectionError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<FktError> for Failure {
    fn from(e: FktError) -> Self {
        match e {
            FktError::Embed(EmbedError::MissingCoordinates(_)) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Infeasible(e.to_string()),
        }
    }
}

impl From<SampleError> for Failure {
    fn from(e: SampleError) -> Self {
        match e {
            SampleError::Counting(f) => f.into(),
            SampleError::NoMatchings => Failure::Infeasible(e.to_string()),
            SampleError::Inconsistent { .. } => Failure::Infeasible(e.to_string()),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Election(e) => e.into(),
            ReportError::Sample(e) => e.into(),
            ReportError::BadEnacted => Failure::Validation(e.to_string()),
            ReportError::NoMatchings => Failure::Infeasible(e.to_string()),
        }
    }
}

impl From<ExtremalError> for Failure {
    fn from(e: ExtremalError) -> Self {
        match e {
            ExtremalError::Infeasible => Failure::Infeasible(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<ChainError> for Failure {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Partition(PartitionError::NoInitialPartition(_)) => {
                Failure::Infeasible(e.to_string())
            }
            _ => Failure::Validation(e.to_string()),
        }
    }
}

/// Input graph plus its raw bytes, which the manifest digests.
struct Input {
    graph: DualGraph,
    bytes: Vec<u8>,
}

fn read_graph(path: &Path) -> Result<Input, Failure> {
    let bytes = std::fs::read(path).map_err(|e| io_failure(path, e))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|e| Failure::Validation(format!("{}: not UTF-8: {e}", path.display())))?;
    let graph = parse_graph(text).map_err(|e| match e {
        LoadError::Io { .. } => Failure::Io(e.to_string()),
        _ => Failure::Validation(format!("{}: {e}", path.display())),
    })?;
    Ok(Input { graph, bytes })
}

fn print(text: &str) {
    print!("{text}");
}

fn count(args: &CountArgs) -> Outcome {
    let input = read_graph(&args.graph)?;
    let start = Instant::now();
    let n = count_matchings_fkt(&input.graph)?;
    let elapsed = start.elapsed().as_secs_f64();
    println!("{n}");
    eprintln!(
        "fkt: {} nodes, {} edges, {elapsed:.6} s",
        input.graph.node_count(),
        input.graph.edge_count()
    );
    Ok(())
}

fn enumerate(args: &EnumerateArgs) -> Outcome {
    let input = read_graph(&args.graph)?;
    let g = &input.graph;
    let mut lines = Vec::new();
    let _ = stream_matchings(g, |m| {
        lines.push(matching_line(g, m));
        Ok::<_, std::convert::Infallible>(())
    });
    lines.sort();
    let mut text = String::new();
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    match &args.out {
        None => print(&text),
        Some(path) => {
            let manifest = RunManifest::new("enumerate", args, None, Some(&input.bytes));
            emit_lines(path, text.as_bytes(), &manifest).map_err(|e| io_failure(path, e))?;
        }
    }
    eprintln!("{} matchings", lines.len());
    Ok(())
}

fn sample(args: &SampleArgs) -> Outcome {
    let input = read_graph(&args.graph)?;
    let g = &input.graph;
    let mut sampler = Sampler::new(g, args.seed)?;
    let mut drawn = String::new();
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for _ in 0..args.k {
        let line = matching_line(g, &sampler.sample()?);
        *freq.entry(line.clone()).or_default() += 1;
        drawn.push_str(&line);
        drawn.push('\n');
    }
    let mut t = Table::new(&["matching", "count", "frequency"]);
    for (m, c) in &freq {
        t.push(vec![
            m.clone(),
            c.to_string(),
            fmt_f64(*c as f64 / args.k.max(1) as f64),
        ]);
    }
    print(&String::from_utf8_lossy(&t.to_bytes()));
    if let Some(path) = &args.out {
        let manifest = RunManifest::new("sample", args, Some(args.seed), Some(&input.bytes));
        emit_lines(path, drawn.as_bytes(), &manifest).map_err(|e| io_failure(path, e))?;
    }
    eprintln!("{} samples from {} matchings", args.k, sampler.total());
    Ok(())
}

fn extremes(args: &ExtremesArgs) -> Outcome {
    let input = read_graph(&args.graph)?;
    let g = &input.graph;
    let w = seat_weights(g, &args.election)?;
    let r = seat_range(g, &w)?;
    let mut t = Table::new(&["bound", "seats", "matching"]);
    t.push(vec![
        "min".into(),
        r.min.to_string(),
        matching_line(g, &r.min_witness),
    ]);
    t.push(vec![
        "max".into(),
        r.max.to_string(),
        matching_line(g, &r.max_witness),
    ]);
    print(&String::from_utf8_lossy(&t.to_bytes()));
    Ok(())
}

fn ranked_table(report: &MatchingReport, election: usize) -> Table {
    let mut t = Table::new(&["rank", "min", "q25", "median", "q75", "max"]);
    for r in &report.treatments[election].ranked_shares {
        t.push(vec![
            r.rank.to_string(),
            fmt_f64(r.min),
            fmt_f64(r.q25),
            fmt_f64(r.median),
            fmt_f64(r.q75),
            fmt_f64(r.max),
        ]);
    }
    t
}

fn summary_table(report: &MatchingReport) -> Table {
    let mut t = Table::new(&[
        "election",
        "matchings",
        "mean_seats",
        "mean_competitive",
        "enacted_seats",
        "enacted_competitive",
        "fraction_fewer_seats",
        "fraction_equal_seats",
    ]);
    for tr in &report.treatments {
        let e = tr.enacted.as_ref();
        t.push(vec![
            tr.election.clone(),
            tr.matchings.to_string(),
            fmt_f64(tr.mean_seats),
            fmt_f64(tr.mean_competitive),
            e.map(|e| e.seats.to_string()).unwrap_or_default(),
            e.map(|e| e.competitive.to_string()).unwrap_or_default(),
            e.map(|e| fmt_f64(e.fraction_fewer_seats))
                .unwrap_or_default(),
            e.map(|e| fmt_f64(e.fraction_equal_seats))
                .unwrap_or_default(),
        ]);
    }
    t
}

fn analyze(args: &AnalyzeArgs) -> Outcome {
    let input = read_graph(&args.graph)?;
    let g = &input.graph;
    let enacted = match &args.enacted {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let line = text.lines().next().unwrap_or("");
            let m = parse_matching_line(g, line)
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            Some(m)
        }
    };
    let source = match (args.sample, args.seed) {
        (Some(k), Some(seed)) => MatchingSource::Sample { k, seed },
        _ => MatchingSource::Enumerate,
    };
    let report = nestmatch::matching_ensemble_report(g, &args.elections, source, enacted.as_ref())?;
    print(&String::from_utf8_lossy(&summary_table(&report).to_bytes()));
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let manifest = RunManifest::new("analyze", args, args.seed, Some(&input.bytes));
        let write = |name: String, t: &Table| {
            let path = dir.join(name);
            emit_delimited(&path, t, &manifest).map_err(|e| io_failure(&path, e))
        };
        write("summary.csv".into(), &summary_table(&report))?;
        for (i, tr) in report.treatments.iter().enumerate() {
            write(
                format!("seats_{}.csv", tr.election),
                &histogram_table("seats", &tr.seat_histogram),
            )?;
            write(
                format!("competitive_{}.csv", tr.election),
                &histogram_table("competitive", &tr.competitive_histogram),
            )?;
            write(
                format!("ranked_{}.csv", tr.election),
                &ranked_table(&report, i),
            )?;
        }
        let path = dir.join("report.json");
        emit_structured(&path, &report, &manifest).map_err(|e| io_failure(&path, e))?;
    }
    Ok(())
}

fn record_header(metrics: &ChainMetrics) -> Vec<String> {
    let mut h: Vec<String> = [
        "step",
        "accepted",
        "dual_edges",
        "matchings",
        "count_method",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for e in &metrics.elections {
        h.push(format!("seats_{e}"));
        h.push(format!("competitive_{e}"));
    }
    if metrics.attribute.is_some() {
        h.push("attribute_majorities".into());
    }
    h.push("fingerprint".into());
    h
}

fn record_row(r: &PlanRecord, metrics: &ChainMetrics) -> Vec<String> {
    let mut row = vec![
        r.step.to_string(),
        r.accepted.to_string(),
        r.dual_edges.to_string(),
        r.matchings
            .as_ref()
            .map(|c| c.to_string())
            .unwrap_or_default(),
        r.count_method.as_str().to_string(),
    ];
    for e in &metrics.elections {
        row.push(r.seats[e].to_string());
        row.push(r.competitive[e].to_string());
    }
    if let Some(m) = r.attribute_majorities {
        row.push(m.to_string());
    }
    row.push(r.fingerprint.clone());
    row
}

fn chain(args: &ChainArgs) -> Outcome {
    let input = read_graph(&args.graph)?;
    let host = input.graph;
    let initial = match &args.initial_attr {
        Some(attr) => Partition::from_attribute(host, attr, args.k, args.tol),
        None => seeded_initial_partition(host, args.k, args.tol, args.seed),
    }
    .map_err(ChainError::from)?;
    let cfg = ChainConfig {
        k: args.k,
        tol: args.tol,
        steps: args.steps,
        seed: args.seed,
        max_cut_retries: args.retries,
    };
    let metrics = ChainMetrics {
        elections: args.elections.clone(),
        attribute: args
            .attribute
            .clone()
            .zip(args.base.clone())
            .map(|(attribute, base)| AttributeMajoritySpec { attribute, base }),
        enumeration_limit: args.enumeration_limit,
    };
    let mut table = Table {
        header: record_header(&metrics),
        rows: Vec::new(),
    };
    let mut tracker = ExtremePlanTracker::default();
    run_chain(&initial, &cfg, &metrics, |r, p| {
        tracker.observe(r, p);
        table.rows.push(record_row(r, &metrics));
    })?;
    match &args.out_dir {
        None => print(&String::from_utf8_lossy(&table.to_bytes())),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let manifest = RunManifest::new("chain", args, Some(args.seed), Some(&input.bytes));
            let path = dir.join("records.csv");
            emit_delimited(&path, &table, &manifest).map_err(|e| io_failure(&path, e))?;
            let path = dir.join("extremes.json");
            emit_structured(&path, &tracker, &manifest).map_err(|e| io_failure(&path, e))?;
            let accepted = table.rows.iter().skip(1).filter(|r| r[1] == "true").count();
            eprintln!(
                "{} records, {accepted} accepted proposals",
                table.rows.len()
            );
        }
    }
    Ok(())
}

fn samplesize(args: &SamplesizeArgs) -> Outcome {
    let norm = match (args.l1, args.n) {
        (true, Some(n)) => Norm::L1 { n },
        _ => Norm::LInfinity,
    };
    let n = required_sample_size(&SampleSizeSpec {
        epsilon: args.epsilon,
        delta: args.delta,
        norm,
    })
    .map_err(|e| Failure::Validation(e.to_string()))?;
    println!("{n}");
    Ok(())
}

fn one_line(s: &str) -> String {
    let mut out = String::new();
    for (i, part) in s
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
    {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{part}");
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first}");
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Count(a) => count(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Sample(a) => sample(a),
        Command::Extremes(a) => extremes(a),
        Command::Analyze(a) => analyze(a),
        Command::Chain(a) => chain(a),
        Command::Samplesize(a) => samplesize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", one_line(f.message()));
            ExitCode::from(f.code())
        }
    }
}
