//! Graph files, run manifests and result emission.
//!
//! A graph file is JSON:
//!
//! ```json
//! {
//!   "meta": {"description": "toy", "order": ["A", "B"]},
//!   "nodes": [{"id": "A", "population": 10, "x": 0.0, "y": 0.0,
//!              "attributes": {"native": 4},
//!              "tallies": {"gov18": {"d": 6.0, "r": 4.0}}}],
//!   "edges": [["A", "B"]]
//! }
//! ```
//!
//! `meta`, `order`, `population`, coordinates, `attributes` and `tallies`
//! are optional. Ids must be nonempty and free of whitespace, `,` and `-`,
//! which the matching line format uses as separators.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::election::VoteTally;
use crate::graph::{DualGraph, GraphError, Matching, Node};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphMeta {
    #[serde(default)]
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: String,
    #[serde(default)]
    pub population: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tallies: BTreeMap<String, VoteTally>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    #[serde(default)]
    pub meta: GraphMeta,
    pub nodes: Vec<NodeRecord>,
    #[serde(default)]
    pub edges: Vec<[String; 2]>,
}

/// One problem found while validating a graph file. `field` locates it,
/// e.g. `nodes[3].population`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    BadId { field: String, id: String },
    DuplicateId { field: String, id: String },
    NegativePopulation { field: String, id: String },
    IncompleteCoordinates { field: String, id: String },
    InvalidTally { field: String, id: String },
    DanglingEndpoint { field: String, id: String },
    SelfLoop { field: String, id: String },
    DuplicateEdge { field: String, a: String, b: String },
    BadOrder { field: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadId { field, id } => write!(
                f,
                "{field}: bad id {id:?} (must be nonempty, without whitespace, ',' or '-')"
            ),
            Violation::DuplicateId { field, id } => write!(f, "{field}: duplicate id {id:?}"),
            Violation::NegativePopulation { field, id } => {
                write!(f, "{field}: negative population on {id:?}")
            }
            Violation::IncompleteCoordinates { field, id } => {
                write!(f, "{field}: {id:?} has only one of x and y")
            }
            Violation::InvalidTally { field, id } => {
                write!(f, "{field}: tally on {id:?} must be finite and nonnegative")
            }
            Violation::DanglingEndpoint { field, id } => {
                write!(f, "{field}: edge endpoint {id:?} is not a declared node")
            }
            Violation::SelfLoop { field, id } => write!(f, "{field}: self-loop on {id:?}"),
            Violation::DuplicateEdge { field, a, b } => {
                write!(f, "{field}: duplicate edge {a:?}-{b:?}")
            }
            Violation::BadOrder { field, detail } => write!(f, "{field}: {detail}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl LoadError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            LoadError::Invalid(v) => v,
            _ => &[],
        }
    }
}

pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id
            .chars()
            .any(|c| c.is_whitespace() || c == ',' || c == '-')
}

fn edge_key<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Checks a parsed file, collecting every violation.
pub fn validate_file(file: &GraphFile) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, n) in file.nodes.iter().enumerate() {
        let field = |name: &str| format!("nodes[{i}]{name}");
        let id = n.id.clone();
        if !valid_id(&n.id) {
            out.push(Violation::BadId {
                field: field(".id"),
                id: id.clone(),
            });
        }
        if !ids.insert(n.id.as_str()) {
            out.push(Violation::DuplicateId {
                field: field(".id"),
                id: id.clone(),
            });
        }
        if n.population < 0 {
            out.push(Violation::NegativePopulation {
                field: field(".population"),
                id: id.clone(),
            });
        }
        if n.x.is_some() != n.y.is_some() {
            out.push(Violation::IncompleteCoordinates {
                field: field(""),
                id: id.clone(),
            });
        }
        for (e, t) in &n.tallies {
            if !t.is_valid() {
                out.push(Violation::InvalidTally {
                    field: field(&format!(".tallies.{e}")),
                    id: id.clone(),
                });
            }
        }
    }
    let mut seen = HashMap::new();
    for (i, [a, b]) in file.edges.iter().enumerate() {
        let field = format!("edges[{i}]");
        for end in [a, b] {
            if !ids.contains(end.as_str()) {
                out.push(Violation::DanglingEndpoint {
                    field: field.clone(),
                    id: end.clone(),
                });
            }
        }
        if a == b {
            out.push(Violation::SelfLoop {
                field: field.clone(),
                id: a.clone(),
            });
        } else if let Some(first) = seen.insert(edge_key(a, b), i) {
            out.push(Violation::DuplicateEdge {
                field: format!("{field} (first at edges[{first}])"),
                a: a.clone(),
                b: b.clone(),
            });
        }
    }
    if let Some(order) = &file.meta.order {
        let listed: HashSet<&str> = order.iter().map(String::as_str).collect();
        if order.len() != file.nodes.len() || listed.len() != order.len() || !listed.is_subset(&ids)
        {
            out.push(Violation::BadOrder {
                field: "meta.order".into(),
                detail: "must list every node id exactly once".into(),
            });
        }
    }
    out
}

/// Builds the graph of a valid file.
pub fn file_to_graph(file: &GraphFile) -> Result<DualGraph, LoadError> {
    let problems = validate_file(file);
    if !problems.is_empty() {
        return Err(LoadError::Invalid(problems));
    }
    let nodes = file
        .nodes
        .iter()
        .map(|n| {
            let mut node = Node::new(n.id.clone()).with_population(n.population as u64);
            if let (Some(x), Some(y)) = (n.x, n.y) {
                node = node.at(x, y);
            }
            node.attributes = n.attributes.clone();
            node.tallies = n.tallies.clone();
            node
        })
        .collect();
    let edges: Vec<(&str, &str)> = file
        .edges
        .iter()
        .map(|[a, b]| (a.as_str(), b.as_str()))
        .collect();
    DualGraph::with_order(nodes, &edges, file.meta.order.as_deref()).map_err(|e: GraphError| {
        // Validation above rules these out; kept as a named violation anyway.
        LoadError::Invalid(vec![Violation::BadOrder {
            field: "graph".into(),
            detail: e.to_string(),
        }])
    })
}

pub fn parse_graph(text: &str) -> Result<DualGraph, LoadError> {
    let file: GraphFile = serde_json::from_str(text).map_err(|e| LoadError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file_to_graph(&file)
}

pub fn load_graph(path: &Path) -> Result<DualGraph, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_graph(&text)
}

/// File form of a graph; `meta.order` records the canonical order.
pub fn graph_to_file(g: &DualGraph, description: &str) -> GraphFile {
    let nodes = g
        .nodes()
        .map(|v| {
            let n = g.node(v);
            NodeRecord {
                id: n.label.clone(),
                population: n.population as i64,
                x: n.position.map(|p| p.x),
                y: n.position.map(|p| p.y),
                attributes: n.attributes.clone(),
                tallies: n.tallies.clone(),
            }
        })
        .collect();
    let edges = g
        .edges()
        .map(|(u, v)| [g.label(u).to_string(), g.label(v).to_string()])
        .collect();
    GraphFile {
        meta: GraphMeta {
            description: description.to_string(),
            order: Some(g.nodes().map(|v| g.label(v).to_string()).collect()),
        },
        nodes,
        edges,
    }
}

pub fn save_graph(path: &Path, g: &DualGraph, description: &str) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(&graph_to_file(g, description))
        .map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// A matching as text: pairs `u-v` with `u < v`, sorted, joined by `,`.
pub fn matching_line(g: &DualGraph, m: &Matching) -> String {
    let mut pairs: Vec<String> = m
        .pairs()
        .iter()
        .map(|&(u, v)| {
            let (a, b) = edge_key(g.label(u), g.label(v));
            format!("{a}-{b}")
        })
        .collect();
    pairs.sort();
    pairs.join(",")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MatchingParseError {
    #[error("malformed pair {0:?}, expected u-v")]
    Malformed(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("pair {0}-{1} is not an edge")]
    NotAnEdge(String, String),
    #[error("node {0:?} appears in more than one pair")]
    Repeated(String),
}

/// Inverse of [`matching_line`]; checks that every pair is an edge and no
/// node repeats. Blank input is the empty matching.
pub fn parse_matching_line(g: &DualGraph, line: &str) -> Result<Matching, MatchingParseError> {
    let mut used = HashSet::new();
    let mut pairs = Vec::new();
    for token in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (a, b) = token
            .split_once('-')
            .ok_or_else(|| MatchingParseError::Malformed(token.to_string()))?;
        let (u, v) = (g.require(a)?, g.require(b)?);
        if !g.has_edge(u, v) {
            return Err(MatchingParseError::NotAnEdge(a.to_string(), b.to_string()));
        }
        for (x, label) in [(u, a), (v, b)] {
            if !used.insert(x) {
                return Err(MatchingParseError::Repeated(label.to_string()));
            }
        }
        pairs.push((u, v));
    }
    Ok(Matching::new(pairs))
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to reproduce an output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    pub version: String,
    /// SHA-256 of the input file bytes.
    pub input_digest: Option<String>,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: impl Serialize,
        seed: Option<u64>,
        input: Option<&[u8]>,
    ) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        RunManifest {
            command: command.to_string(),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            seed,
            rng: seed.map(|_| crate::sample::RNG_ALGORITHM.to_string()),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: input.map(sha256_hex),
            timestamp,
        }
    }
}

/// Fixed six-decimal rendering used in every table.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

/// A delimited table with a header row.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("write to memory");
        for row in &self.rows {
            w.write_record(row).expect("write to memory");
        }
        w.into_inner().expect("flush to memory")
    }
}

/// `value,count` rows in key order.
pub fn histogram_table(key: &str, h: &BTreeMap<usize, u64>) -> Table {
    let mut t = Table::new(&[key, "count"]);
    for (k, c) in h {
        t.push(vec![k.to_string(), c.to_string()]);
    }
    t
}

/// Where the manifest of a delimited output goes.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn json_bytes(value: &impl Serialize) -> std::io::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(std::io::Error::other)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes a table and its manifest sidecar.
pub fn emit_delimited(path: &Path, table: &Table, manifest: &RunManifest) -> std::io::Result<()> {
    emit_lines(path, &table.to_bytes(), manifest)
}

/// Writes preformatted text and its manifest sidecar.
pub fn emit_lines(path: &Path, bytes: &[u8], manifest: &RunManifest) -> std::io::Result<()> {
    write_atomic(path, bytes)?;
    write_atomic(&sidecar_path(path), &json_bytes(manifest)?)
}

/// Writes `{"manifest": ..., "result": ...}` as pretty JSON.
pub fn emit_structured(
    path: &Path,
    result: &impl Serialize,
    manifest: &RunManifest,
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        manifest: &'a RunManifest,
        result: &'a T,
    }
    write_atomic(path, &json_bytes(&Envelope { manifest, result })?)
}
