//! Recombination (ReCom) chain over unit-level graphs.
//!
//! Each step merges two adjacent districts, draws a random spanning tree of
//! the merged units (uniform random edge weights, minimum spanning tree) and
//! cuts one tree edge so that both sides satisfy the population bounds. If no
//! balanced cut turns up after `max_cut_retries` trees the plan is kept, and
//! the step still counts.
//!
//! Every recorded plan gets its district-level dual graph, whose perfect
//! matchings are counted by FKT on population-weighted centroids. When that
//! drawing is not planar the count falls back to enumeration for small
//! district graphs and is otherwise left uncounted.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::election::{
    competitive_count, majority_count, node_attribute_pair, node_tally, AttributeMajoritySpec,
    ElectionError, VoteTally, COMPETITIVE_HI, COMPETITIVE_LO,
};
use crate::enumerate::count_by_enumeration;
use crate::fkt::count_matchings_fkt;
use crate::graph::{BigCount, DualGraph, HostData, Node, NodeId, Point};
use crate::nodeset::NodeSet;

/// District ids run from 1 to k.
pub type DistrictId = u32;

pub const DEFAULT_CUT_RETRIES: u32 = 50;
/// Largest non-planar district graph still counted by enumeration.
pub const DEFAULT_ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("district count must be at least 1")]
    NoDistricts,
    #[error("population tolerance must lie in [0, 1), got {0}")]
    BadTolerance(f64),
    #[error("unit graph must be a full graph, not a residual")]
    Residual,
    #[error("expected an assignment for {expected} units, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("unit {unit:?} is assigned to district {district}, outside 1..={k}")]
    BadDistrict {
        unit: String,
        district: DistrictId,
        k: DistrictId,
    },
    #[error("unit {0:?} has no district attribute")]
    MissingDistrict(String),
    #[error("district {0} is empty")]
    EmptyDistrict(DistrictId),
    #[error("district {0} is not contiguous")]
    Disconnected(DistrictId),
    #[error("district {district} has population {population}, outside [{lo:.3}, {hi:.3}]")]
    PopulationOutOfBounds {
        district: DistrictId,
        population: u64,
        lo: f64,
        hi: f64,
    },
    #[error("no balanced initial partition found in {0} attempts")]
    NoInitialPartition(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error("max_cut_retries must be at least 1")]
    NoRetries,
}

/// Inclusive population window around the ideal district population.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PopulationBounds {
    pub lo: f64,
    pub hi: f64,
}

impl PopulationBounds {
    pub fn new(total: u64, k: DistrictId, tol: f64) -> Self {
        let ideal = total as f64 / k as f64;
        PopulationBounds {
            lo: ideal * (1.0 - tol),
            hi: ideal * (1.0 + tol),
        }
    }

    pub fn contains(&self, population: u64) -> bool {
        // Absorbs rounding in `ideal * (1 ± tol)` so tol = 0 admits the ideal.
        let slack = 1e-9 * self.hi.max(1.0);
        let p = population as f64;
        p >= self.lo - slack && p <= self.hi + slack
    }
}

/// A districting plan: every unit of the host graph assigned to one of `k`
/// contiguous, population-balanced districts.
#[derive(Clone, Debug)]
pub struct Partition {
    host: DualGraph,
    k: DistrictId,
    tol: f64,
    bounds: PopulationBounds,
    assignment: Vec<DistrictId>,
    populations: Vec<u64>,
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.host.same_host(&other.host) && self.k == other.k && self.assignment == other.assignment
    }
}

impl Partition {
    /// Validates a plan; `assignment` is indexed by unit canonical order.
    pub fn new(
        host: DualGraph,
        assignment: Vec<DistrictId>,
        k: DistrictId,
        tol: f64,
    ) -> Result<Self, PartitionError> {
        let p = Self::unchecked(host, assignment, k, tol)?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_fn(
        host: DualGraph,
        k: DistrictId,
        tol: f64,
        district: impl Fn(NodeId) -> DistrictId,
    ) -> Result<Self, PartitionError> {
        let assignment = host.nodes().map(district).collect();
        Self::new(host, assignment, k, tol)
    }

    /// Reads each unit's district from a numeric node attribute.
    pub fn from_attribute(
        host: DualGraph,
        attribute: &str,
        k: DistrictId,
        tol: f64,
    ) -> Result<Self, PartitionError> {
        let mut assignment = Vec::with_capacity(host.node_count());
        for v in host.nodes() {
            let node = host.node(v);
            let d = node
                .attributes
                .get(attribute)
                .ok_or_else(|| PartitionError::MissingDistrict(node.label.clone()))?;
            assignment.push(DistrictId::try_from(*d).unwrap_or(DistrictId::MAX));
        }
        Self::new(host, assignment, k, tol)
    }

    /// Builds a plan by splitting off one balanced district at a time with
    /// random spanning-tree cuts, restarting from scratch on dead ends.
    pub fn recursive_tree<R: Rng + ?Sized>(
        host: DualGraph,
        k: DistrictId,
        tol: f64,
        rng: &mut R,
        attempts: usize,
    ) -> Result<Self, PartitionError> {
        let n = host.node_count();
        let mut p = Self::unchecked(host, vec![k; n], k, tol)?;
        let host = p.host.clone();
        let h = host.host();
        let bounds = p.bounds;
        let pop = |u: usize| h.nodes[u].population;
        for _ in 0..attempts {
            let mut remaining: Vec<usize> = (0..n).collect();
            let mut assignment = vec![k; n];
            let mut ok = true;
            for d in 1..k {
                let left = (k - d) as f64;
                let rest_ok = |rest: u64| {
                    let r = rest as f64;
                    let slack = 1e-9 * bounds.hi.max(1.0);
                    r >= left * bounds.lo - slack && r <= left * bounds.hi + slack
                };
                let cut = (0..100).find_map(|_| {
                    let cuts = tree_cuts(h, &remaining, rng, pop, |side, rest| {
                        bounds.contains(side) && rest_ok(rest)
                    })?;
                    pick_cut(cuts, rng)
                });
                let Some(side) = cut else {
                    ok = false;
                    break;
                };
                let mut next = Vec::with_capacity(remaining.len());
                for (i, &u) in remaining.iter().enumerate() {
                    if side[i] {
                        assignment[u] = d;
                    } else {
                        next.push(u);
                    }
                }
                remaining = next;
            }
            if ok {
                p.assignment = assignment;
                p.recompute_populations();
                if p.validate().is_ok() {
                    return Ok(p);
                }
            }
        }
        Err(PartitionError::NoInitialPartition(attempts))
    }

    fn unchecked(
        host: DualGraph,
        assignment: Vec<DistrictId>,
        k: DistrictId,
        tol: f64,
    ) -> Result<Self, PartitionError> {
        if k == 0 {
            return Err(PartitionError::NoDistricts);
        }
        if !(0.0..1.0).contains(&tol) {
            return Err(PartitionError::BadTolerance(tol));
        }
        if host.node_count() != host.universe() {
            return Err(PartitionError::Residual);
        }
        if assignment.len() != host.node_count() {
            return Err(PartitionError::WrongLength {
                expected: host.node_count(),
                got: assignment.len(),
            });
        }
        let total = host.nodes().map(|v| host.node(v).population).sum();
        let mut p = Partition {
            bounds: PopulationBounds::new(total, k, tol),
            host,
            k,
            tol,
            assignment,
            populations: Vec::new(),
        };
        p.recompute_populations();
        Ok(p)
    }

    fn recompute_populations(&mut self) {
        self.populations = vec![0; self.k as usize];
        for (u, &d) in self.assignment.iter().enumerate() {
            if (1..=self.k).contains(&d) {
                self.populations[d as usize - 1] += self.host.host().nodes[u].population;
            }
        }
    }

    /// Checks every plan invariant: ids in range, k nonempty contiguous
    /// districts, populations within bounds.
    pub fn validate(&self) -> Result<(), PartitionError> {
        let h = self.host.host();
        let n = self.assignment.len();
        let mut members = vec![NodeSet::empty(n); self.k as usize];
        for (u, &d) in self.assignment.iter().enumerate() {
            if !(1..=self.k).contains(&d) {
                return Err(PartitionError::BadDistrict {
                    unit: h.nodes[u].label.clone(),
                    district: d,
                    k: self.k,
                });
            }
            members[d as usize - 1].insert(u);
        }
        for (i, set) in members.iter().enumerate() {
            let d = i as DistrictId + 1;
            let Some(start) = set.first() else {
                return Err(PartitionError::EmptyDistrict(d));
            };
            if h.reach_from(start, set).len() != set.len() {
                return Err(PartitionError::Disconnected(d));
            }
        }
        for i in 0..members.len() {
            let d = i as DistrictId + 1;
            let population = self.populations[i];
            if !self.bounds.contains(population) {
                return Err(PartitionError::PopulationOutOfBounds {
                    district: d,
                    population,
                    lo: self.bounds.lo,
                    hi: self.bounds.hi,
                });
            }
        }
        Ok(())
    }

    pub fn host(&self) -> &DualGraph {
        &self.host
    }

    pub fn k(&self) -> DistrictId {
        self.k
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn bounds(&self) -> PopulationBounds {
        self.bounds
    }

    pub fn assignment(&self) -> &[DistrictId] {
        &self.assignment
    }

    pub fn district_of(&self, v: NodeId) -> DistrictId {
        self.assignment[v.index()]
    }

    /// Population of district `d` (1-based).
    pub fn population(&self, d: DistrictId) -> u64 {
        self.populations[d as usize - 1]
    }

    pub fn units_of(&self, d: DistrictId) -> impl Iterator<Item = NodeId> + '_ {
        self.host
            .nodes()
            .filter(move |&v| self.assignment[v.index()] == d)
    }

    /// Unit label to district, sorted by label.
    pub fn labeled_assignment(&self) -> BTreeMap<String, DistrictId> {
        self.host
            .nodes()
            .map(|v| (self.host.label(v).to_string(), self.district_of(v)))
            .collect()
    }

    /// Hex digest of the assignment vector; equal plans on the same host
    /// share a fingerprint.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for d in &self.assignment {
            h.update(d.to_le_bytes());
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Pairs `(a, b)`, `a < b`, of districts joined by at least one unit edge.
    pub fn adjacent_pairs(&self) -> Vec<(DistrictId, DistrictId)> {
        let mut pairs = BTreeSet::new();
        for (u, v) in self.host.edges() {
            let (a, b) = (self.district_of(u), self.district_of(v));
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        pairs.into_iter().collect()
    }

    /// Districts whose unit sets differ between two plans of the same host.
    pub fn changed_districts(&self, other: &Partition) -> BTreeSet<DistrictId> {
        let mut changed = BTreeSet::new();
        for (&a, &b) in self.assignment.iter().zip(&other.assignment) {
            if a != b {
                changed.insert(a);
                changed.insert(b);
            }
        }
        changed
    }

    /// One ReCom proposal applied in place.
    pub fn recom_step<R: Rng + ?Sized>(
        &mut self,
        max_cut_retries: u32,
        rng: &mut R,
    ) -> StepOutcome {
        let pairs = self.adjacent_pairs();
        if pairs.is_empty() {
            return StepOutcome::default();
        }
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        let units: Vec<usize> = (0..self.assignment.len())
            .filter(|&u| self.assignment[u] == a || self.assignment[u] == b)
            .collect();
        let h = self.host.host();
        let bounds = self.bounds;
        for tries in 1..=max_cut_retries {
            let pop = |u: usize| h.nodes[u].population;
            let chosen = tree_cuts(h, &units, rng, pop, |side, rest| {
                bounds.contains(side) && bounds.contains(rest)
            })
            .and_then(|cuts| pick_cut(cuts, rng));
            if let Some(side) = chosen {
                for (i, &u) in units.iter().enumerate() {
                    self.assignment[u] = if side[i] { a } else { b };
                }
                self.recompute_populations();
                return StepOutcome {
                    pair: Some((a, b)),
                    accepted: true,
                    trees: tries,
                };
            }
        }
        StepOutcome {
            pair: Some((a, b)),
            accepted: false,
            trees: max_cut_retries,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct StepOutcome {
    /// The merged district pair, if any pair was adjacent.
    pub pair: Option<(DistrictId, DistrictId)>,
    pub accepted: bool,
    /// Spanning trees drawn.
    pub trees: u32,
}

/// Seeded [`Partition::recursive_tree`] for command-line use. It draws from
/// stream 1 of the seed so the chain itself (stream 0) is unaffected.
pub fn seeded_initial_partition(
    host: DualGraph,
    k: DistrictId,
    tol: f64,
    seed: u64,
) -> Result<Partition, PartitionError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Partition::recursive_tree(host, k, tol, &mut rng, 1000)
}

/// One ReCom step on a copy of `p`.
pub fn recom_step<R: Rng + ?Sized>(p: &Partition, cfg: &ChainConfig, rng: &mut R) -> Partition {
    let mut next = p.clone();
    next.recom_step(cfg.max_cut_retries, rng);
    next
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Candidate cuts of one random spanning tree over `units`.
///
/// Each candidate is a side (`true` per local unit) whose population and the
/// complement's population satisfy `ok(side, rest)`. Both orientations of a
/// tree edge are tried, so with a symmetric `ok` every balanced edge appears
/// twice and picking a candidate also picks the labeling. `None` means the
/// units are not connected.
fn tree_cuts<R: Rng + ?Sized>(
    h: &HostData,
    units: &[usize],
    rng: &mut R,
    pop: impl Fn(usize) -> u64,
    ok: impl Fn(u64, u64) -> bool,
) -> Option<Vec<Vec<bool>>> {
    let m = units.len();
    let local = |u: usize| units.binary_search(&u).ok();
    let mut edges = Vec::new();
    for (i, &u) in units.iter().enumerate() {
        for &v in &h.adj[u] {
            if v > u {
                if let Some(j) = local(v) {
                    edges.push((i, j));
                }
            }
        }
    }
    let weights: Vec<f64> = edges.iter().map(|_| rng.random::<f64>()).collect();
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&x, &y| weights[x].total_cmp(&weights[y]).then(x.cmp(&y)));

    let mut dsu = Dsu((0..m).collect());
    let mut tree = vec![Vec::new(); m];
    let mut used = 0;
    for e in order {
        let (i, j) = edges[e];
        if dsu.union(i, j) {
            tree[i].push(j);
            tree[j].push(i);
            used += 1;
        }
    }
    if m == 0 || used + 1 != m {
        return None;
    }

    let mut parent = vec![usize::MAX; m];
    let mut bfs = Vec::with_capacity(m);
    bfs.push(0);
    parent[0] = 0;
    let mut head = 0;
    while head < bfs.len() {
        let v = bfs[head];
        head += 1;
        for &w in &tree[v] {
            if parent[w] == usize::MAX {
                parent[w] = v;
                bfs.push(w);
            }
        }
    }
    let mut sub: Vec<u64> = units.iter().map(|&u| pop(u)).collect();
    for &v in bfs.iter().skip(1).rev() {
        sub[parent[v]] += sub[v];
    }
    let total = sub[0];

    let mut cuts = Vec::new();
    for &c in bfs.iter().skip(1) {
        for subtree_side in [true, false] {
            let side_pop = if subtree_side { sub[c] } else { total - sub[c] };
            if ok(side_pop, total - side_pop) {
                let mut in_sub = vec![false; m];
                for &v in &bfs {
                    in_sub[v] = v == c || (v != 0 && in_sub[parent[v]]);
                }
                if !subtree_side {
                    in_sub.iter_mut().for_each(|x| *x = !*x);
                }
                cuts.push(in_sub);
            }
        }
    }
    Some(cuts)
}

fn pick_cut<R: Rng + ?Sized>(mut cuts: Vec<Vec<bool>>, rng: &mut R) -> Option<Vec<bool>> {
    if cuts.is_empty() {
        return None;
    }
    let i = rng.random_range(0..cuts.len());
    Some(cuts.swap_remove(i))
}

/// District-level dual graph: node `d` (labels "1".."k", in that order)
/// carries the summed population, tallies and attributes of its units and
/// their population-weighted centroid; districts are adjacent iff some unit
/// edge joins them. Tallies and attributes are kept only when every unit of
/// the district has them.
pub fn district_dual_graph(p: &Partition) -> DualGraph {
    let g = &p.host;
    let k = p.k as usize;
    let mut nodes = Vec::with_capacity(k);
    for d in 1..=p.k {
        let units: Vec<&Node> = p.units_of(d).map(|v| g.node(v)).collect();
        let mut node = Node::new(d.to_string()).with_population(p.population(d));
        if let Some(first) = units.first() {
            for election in first.tallies.keys() {
                let mut sum = VoteTally::default();
                if units.iter().all(|u| match u.tallies.get(election) {
                    Some(t) => {
                        sum += *t;
                        true
                    }
                    None => false,
                }) {
                    node.tallies.insert(election.clone(), sum);
                }
            }
            for name in first.attributes.keys() {
                let values: Option<Vec<u64>> = units
                    .iter()
                    .map(|u| u.attributes.get(name).copied())
                    .collect();
                if let Some(values) = values {
                    node.attributes.insert(name.clone(), values.iter().sum());
                }
            }
        }
        node.position = centroid(&units);
        nodes.push(node);
    }
    let mut edges = BTreeSet::new();
    for (u, v) in g.edges() {
        let (a, b) = (p.district_of(u), p.district_of(v));
        if a != b {
            edges.insert((a.min(b).to_string(), a.max(b).to_string()));
        }
    }
    let edges: Vec<(String, String)> = edges.into_iter().collect();
    let order: Vec<String> = (1..=p.k).map(|d| d.to_string()).collect();
    DualGraph::with_order(nodes, &edges, Some(&order)).expect("district labels are distinct")
}

fn centroid(units: &[&Node]) -> Option<Point> {
    let points: Option<Vec<Point>> = units.iter().map(|u| u.position).collect();
    let points = points?;
    if points.is_empty() {
        return None;
    }
    let total: u64 = units.iter().map(|u| u.population).sum();
    let weight = |u: &Node| if total > 0 { u.population as f64 } else { 1.0 };
    let w: f64 = units.iter().map(|u| weight(u)).sum();
    let (mut x, mut y) = (0.0, 0.0);
    for (u, pt) in units.iter().zip(&points) {
        x += weight(u) * pt.x;
        y += weight(u) * pt.y;
    }
    Some(Point::new(x / w, y / w))
}

/// How a record's matching count was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    Fkt,
    /// Centroid drawing was not planar; counted by enumeration.
    Enumeration,
    /// Not planar and too large to enumerate.
    Uncounted,
}

impl CountMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CountMethod::Fkt => "fkt",
            CountMethod::Enumeration => "enumeration",
            CountMethod::Uncounted => "uncounted",
        }
    }
}

/// Matching count of a district graph with the method used.
pub fn count_district_matchings(
    dg: &DualGraph,
    enumeration_limit: usize,
) -> (Option<BigCount>, CountMethod) {
    match count_matchings_fkt(dg) {
        Ok(c) => (Some(c), CountMethod::Fkt),
        Err(_) if dg.node_count() <= enumeration_limit => {
            (Some(count_by_enumeration(dg)), CountMethod::Enumeration)
        }
        Err(_) => (None, CountMethod::Uncounted),
    }
}

fn count_as_string<S: Serializer>(c: &Option<BigCount>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.serialize_str(&c.to_string()),
        None => s.serialize_none(),
    }
}

/// Statistics of one recorded plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanRecord {
    /// 0 is the initial plan.
    pub step: u64,
    /// Whether the proposal leading to this plan was accepted (true at step 0).
    pub accepted: bool,
    pub dual_edges: usize,
    #[serde(serialize_with = "count_as_string")]
    pub matchings: Option<BigCount>,
    pub count_method: CountMethod,
    /// Districts won by D, per election.
    pub seats: BTreeMap<String, usize>,
    pub competitive: BTreeMap<String, usize>,
    pub attribute_majorities: Option<usize>,
    pub fingerprint: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainConfig {
    pub k: DistrictId,
    pub tol: f64,
    pub steps: u64,
    pub seed: u64,
    pub max_cut_retries: u32,
}

impl ChainConfig {
    pub fn new(k: DistrictId, tol: f64, steps: u64, seed: u64) -> Self {
        ChainConfig {
            k,
            tol,
            steps,
            seed,
            max_cut_retries: DEFAULT_CUT_RETRIES,
        }
    }
}

/// What to measure on each plan.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainMetrics {
    pub elections: Vec<String>,
    pub attribute: Option<AttributeMajoritySpec>,
    pub enumeration_limit: usize,
}

impl Default for ChainMetrics {
    fn default() -> Self {
        ChainMetrics {
            elections: Vec::new(),
            attribute: None,
            enumeration_limit: DEFAULT_ENUMERATION_LIMIT,
        }
    }
}

fn check_unit_data(g: &DualGraph, metrics: &ChainMetrics) -> Result<(), ElectionError> {
    for v in g.nodes() {
        for e in &metrics.elections {
            node_tally(g, v, e)?;
        }
        if let Some(spec) = &metrics.attribute {
            node_attribute_pair(g, v, spec)?;
        }
    }
    Ok(())
}

/// Computes the record of a plan.
pub fn plan_record(
    p: &Partition,
    step: u64,
    accepted: bool,
    metrics: &ChainMetrics,
) -> Result<PlanRecord, ElectionError> {
    let dg = district_dual_graph(p);
    let (matchings, count_method) = count_district_matchings(&dg, metrics.enumeration_limit);
    let mut seats = BTreeMap::new();
    let mut competitive = BTreeMap::new();
    for e in &metrics.elections {
        let tallies = dg
            .nodes()
            .map(|v| node_tally(&dg, v, e))
            .collect::<Result<Vec<_>, _>>()?;
        seats.insert(e.clone(), tallies.iter().filter(|t| t.is_d_seat()).count());
        competitive.insert(
            e.clone(),
            competitive_count(&tallies, COMPETITIVE_LO, COMPETITIVE_HI)?,
        );
    }
    let attribute_majorities = match &metrics.attribute {
        None => None,
        Some(spec) => {
            let pairs = dg
                .nodes()
                .map(|v| node_attribute_pair(&dg, v, spec))
                .collect::<Result<Vec<_>, _>>()?;
            Some(majority_count(&pairs))
        }
    };
    Ok(PlanRecord {
        step,
        accepted,
        dual_edges: dg.edge_count(),
        matchings,
        count_method,
        seats,
        competitive,
        attribute_majorities,
        fingerprint: p.fingerprint(),
    })
}

/// Runs the chain from `initial`, passing `steps + 1` records (the initial
/// plan first) and the plan they describe to `sink`, in order.
pub fn run_chain(
    initial: &Partition,
    cfg: &ChainConfig,
    metrics: &ChainMetrics,
    mut sink: impl FnMut(&PlanRecord, &Partition),
) -> Result<(), ChainError> {
    if cfg.max_cut_retries == 0 {
        return Err(ChainError::NoRetries);
    }
    let mut p = Partition::new(
        initial.host.clone(),
        initial.assignment.clone(),
        cfg.k,
        cfg.tol,
    )?;
    check_unit_data(&p.host, metrics)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    sink(&plan_record(&p, 0, true, metrics)?, &p);
    for step in 1..=cfg.steps {
        let outcome = p.recom_step(cfg.max_cut_retries, &mut rng);
        sink(&plan_record(&p, step, outcome.accepted, metrics)?, &p);
    }
    Ok(())
}

/// [`run_chain`] collecting every record and the extreme plans.
pub fn collect_chain(
    initial: &Partition,
    cfg: &ChainConfig,
    metrics: &ChainMetrics,
) -> Result<(Vec<PlanRecord>, ExtremePlanTracker), ChainError> {
    let mut records = Vec::with_capacity(cfg.steps as usize + 1);
    let mut tracker = ExtremePlanTracker::default();
    run_chain(initial, cfg, metrics, |r, p| {
        tracker.observe(r, p);
        records.push(r.clone());
    })?;
    Ok((records, tracker))
}

/// A stored plan with its record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtremePlan {
    pub record: PlanRecord,
    pub assignment: BTreeMap<String, DistrictId>,
}

/// Plans with extreme matching statistics. Ties keep the first plan seen.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ExtremePlanTracker {
    pub min_nonzero_matchings: Option<ExtremePlan>,
    pub max_matchings: Option<ExtremePlan>,
    pub min_dual_edges: Option<ExtremePlan>,
    pub max_dual_edges: Option<ExtremePlan>,
}

impl ExtremePlanTracker {
    pub fn observe(&mut self, r: &PlanRecord, p: &Partition) {
        let store = || ExtremePlan {
            record: r.clone(),
            assignment: p.labeled_assignment(),
        };
        if let Some(c) = r.matchings.as_ref().filter(|c| **c > BigCount::default()) {
            let slot = &mut self.min_nonzero_matchings;
            if slot
                .as_ref()
                .is_none_or(|s| s.record.matchings.as_ref().is_some_and(|m| c < m))
            {
                *slot = Some(store());
            }
        }
        if let Some(c) = &r.matchings {
            let slot = &mut self.max_matchings;
            if slot
                .as_ref()
                .is_none_or(|s| s.record.matchings.as_ref().is_some_and(|m| c > m))
            {
                *slot = Some(store());
            }
        }
        if self
            .min_dual_edges
            .as_ref()
            .is_none_or(|s| r.dual_edges < s.record.dual_edges)
        {
            self.min_dual_edges = Some(store());
        }
        if self
            .max_dual_edges
            .as_ref()
            .is_none_or(|s| r.dual_edges > s.record.dual_edges)
        {
            self.max_dual_edges = Some(store());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::grid_graph;

    fn columns(n: usize) -> Partition {
        let g = grid_graph(n, n);
        Partition::from_fn(g, n as DistrictId, 0.0, |v| {
            (v.index() % n) as DistrictId + 1
        })
        .unwrap()
    }

    fn quadrants() -> Partition {
        let g = grid_graph(4, 4);
        Partition::from_fn(g, 4, 0.0, |v| {
            let (r, c) = (v.index() / 4, v.index() % 4);
            (2 * (r / 2) + c / 2) as DistrictId + 1
        })
        .unwrap()
    }

    #[test]
    fn grid_label_order_is_row_major() {
        let g = grid_graph(4, 4);
        assert_eq!(g.label(NodeId(5)), "r01c01");
    }

    #[test]
    fn column_plan_is_a_path() {
        let dg = district_dual_graph(&columns(4));
        assert_eq!(dg.node_count(), 4);
        assert_eq!(dg.edge_count(), 3);
        let labels: Vec<_> = dg
            .edges()
            .map(|(u, v)| (dg.label(u), dg.label(v)))
            .collect();
        assert_eq!(labels, [("1", "2"), ("2", "3"), ("3", "4")]);
        assert_eq!(dg.node(NodeId(0)).population, 4);
    }

    #[test]
    fn quadrant_plan_is_a_four_cycle() {
        let p = quadrants();
        let dg = district_dual_graph(&p);
        assert_eq!(dg.edge_count(), 4);
        assert!(dg.nodes().all(|v| dg.degree(v) == 2));
        let (count, method) = count_district_matchings(&dg, DEFAULT_ENUMERATION_LIMIT);
        assert_eq!(count, Some(BigCount::from(2u32)));
        assert_eq!(method, CountMethod::Fkt);
        // Weighted centroid of the top-left quadrant.
        assert_eq!(dg.node(NodeId(0)).position, Some(Point::new(0.5, 0.5)));
    }

    #[test]
    fn invalid_plans_are_rejected() {
        let g = grid_graph(2, 2);
        let err = |a: Vec<DistrictId>, k, tol| Partition::new(g.clone(), a, k, tol).unwrap_err();
        assert_eq!(
            err(vec![1, 1, 1, 1], 2, 0.0),
            PartitionError::EmptyDistrict(2)
        );
        // Diagonal units are not adjacent.
        assert_eq!(
            err(vec![1, 2, 2, 1], 2, 0.0),
            PartitionError::Disconnected(1)
        );
        assert!(matches!(
            err(vec![1, 2, 2, 2], 2, 0.0),
            PartitionError::PopulationOutOfBounds { district: 1, .. }
        ));
        assert!(matches!(
            err(vec![1, 2, 3, 1], 2, 0.0),
            PartitionError::BadDistrict { .. }
        ));
        assert_eq!(
            err(vec![1, 2], 2, 0.0),
            PartitionError::WrongLength {
                expected: 4,
                got: 2
            }
        );
        assert_eq!(
            err(vec![1, 1, 2, 2], 2, 1.0),
            PartitionError::BadTolerance(1.0)
        );
        assert_eq!(err(vec![1, 1, 2, 2], 0, 0.0), PartitionError::NoDistricts);
        let residual = g.delete_pair(NodeId(0), NodeId(1)).unwrap();
        assert_eq!(
            Partition::new(residual, vec![1, 1], 1, 0.0).unwrap_err(),
            PartitionError::Residual
        );
    }

    #[test]
    fn zero_tolerance_keeps_sizes() {
        let mut p = quadrants();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut accepted = 0;
        for _ in 0..300 {
            let before = p.clone();
            let out = p.recom_step(DEFAULT_CUT_RETRIES, &mut rng);
            accepted += out.accepted as u32;
            p.validate().unwrap();
            assert!((1..=4).all(|d| p.units_of(d).count() == 4));
            assert!(p.changed_districts(&before).len() <= 2);
            if let Some((a, b)) = out.pair {
                assert!(p
                    .changed_districts(&before)
                    .is_subset(&BTreeSet::from([a, b])));
            }
        }
        assert!(accepted > 0);
    }

    #[test]
    fn two_by_two_reaches_exactly_the_dominoes() {
        let g = grid_graph(2, 2);
        // Oracle: every labeled assignment that is a valid plan.
        let mut valid = BTreeSet::new();
        for bits in 0u32..16 {
            let a: Vec<DistrictId> = (0..4).map(|i| 1 + (bits >> i & 1)).collect();
            if Partition::new(g.clone(), a.clone(), 2, 0.0).is_ok() {
                valid.insert(a);
            }
        }
        assert_eq!(valid.len(), 4);
        let mut p = Partition::new(g, vec![1, 1, 2, 2], 2, 0.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut seen = BTreeSet::from([p.assignment().to_vec()]);
        for _ in 0..200 {
            p.recom_step(DEFAULT_CUT_RETRIES, &mut rng);
            seen.insert(p.assignment().to_vec());
        }
        assert_eq!(seen, valid);
    }

    #[test]
    fn recursive_tree_builds_valid_plans() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for (side, k, tol) in [(6, 4, 0.1), (6, 6, 0.0), (8, 8, 0.05), (5, 1, 0.0)] {
            let p =
                Partition::recursive_tree(grid_graph(side, side), k, tol, &mut rng, 200).unwrap();
            p.validate().unwrap();
        }
        let impossible = Partition::recursive_tree(grid_graph(3, 3), 2, 0.0, &mut rng, 5);
        assert_eq!(
            impossible.unwrap_err(),
            PartitionError::NoInitialPartition(5)
        );
    }

    #[test]
    fn zero_steps_gives_the_initial_record() {
        let p = columns(4);
        let (records, tracker) = collect_chain(
            &p,
            &ChainConfig::new(4, 0.0, 0, 1),
            &ChainMetrics::default(),
        )
        .unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].step, 0);
        assert_eq!(records[0].dual_edges, 3);
        assert_eq!(records[0].matchings, Some(BigCount::from(1u32)));
        for slot in [
            &tracker.min_nonzero_matchings,
            &tracker.max_matchings,
            &tracker.min_dual_edges,
            &tracker.max_dual_edges,
        ] {
            assert_eq!(slot.as_ref().unwrap().record, records[0]);
        }
    }

    #[test]
    fn initial_plan_is_checked_against_config() {
        let p = columns(4);
        let err = collect_chain(
            &p,
            &ChainConfig::new(2, 0.0, 5, 1),
            &ChainMetrics::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            ChainError::Partition(PartitionError::BadDistrict { .. })
        ));
        let mut cfg = ChainConfig::new(4, 0.0, 5, 1);
        cfg.max_cut_retries = 0;
        assert_eq!(
            collect_chain(&p, &cfg, &ChainMetrics::default()).unwrap_err(),
            ChainError::NoRetries
        );
        let metrics = ChainMetrics {
            elections: vec!["gov".into()],
            ..ChainMetrics::default()
        };
        let err = collect_chain(&p, &ChainConfig::new(4, 0.0, 5, 1), &metrics).unwrap_err();
        assert!(matches!(
            err,
            ChainError::Election(ElectionError::MissingTally { .. })
        ));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let p = columns(6);
        let cfg = ChainConfig::new(6, 0.1, 200, 42);
        let (a, _) = collect_chain(&p, &cfg, &ChainMetrics::default()).unwrap();
        let (b, _) = collect_chain(&p, &cfg, &ChainMetrics::default()).unwrap();
        assert_eq!(a, b);
        let (c, _) = collect_chain(
            &p,
            &ChainConfig::new(6, 0.1, 200, 43),
            &ChainMetrics::default(),
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn chain_plans_stay_valid() {
        let p = columns(6);
        let cfg = ChainConfig::new(6, 0.05, 500, 9);
        let mut prev: Option<Partition> = None;
        run_chain(&p, &cfg, &ChainMetrics::default(), |r, plan| {
            plan.validate().unwrap();
            assert_eq!(r.fingerprint, plan.fingerprint());
            if let Some(before) = &prev {
                assert!(plan.changed_districts(before).len() <= 2);
                if !r.accepted {
                    assert_eq!(plan, before);
                }
            }
            prev = Some(plan.clone());
        })
        .unwrap();
    }

    #[test]
    fn two_leaves_on_one_neighbor_cannot_be_matched() {
        let nodes = vec![
            Node::new("c").at(0.0, 0.0).with_population(1),
            Node::new("x").at(1.0, 0.0).with_population(1),
            Node::new("y").at(-1.0, 0.0).with_population(1),
            Node::new("z").at(0.0, 1.0).with_population(1),
        ];
        let g = DualGraph::new(nodes, &[("c", "x"), ("c", "y"), ("c", "z")]).unwrap();
        let p = Partition::from_fn(g, 4, 0.0, |v| v.index() as DistrictId + 1).unwrap();
        let r = plan_record(&p, 0, true, &ChainMetrics::default()).unwrap();
        assert_eq!(r.dual_edges, 3);
        assert_eq!(r.matchings, Some(BigCount::default()));
    }

    #[test]
    fn metrics_aggregate_units() {
        let t = |d: f64, r: f64| VoteTally::new(d, r);
        let nodes = vec![
            Node::new("a")
                .at(0.0, 0.0)
                .with_population(10)
                .with_tally("e", t(6.0, 4.0))
                .with_attribute("x", 6),
            Node::new("b")
                .at(1.0, 0.0)
                .with_population(10)
                .with_tally("e", t(1.0, 9.0))
                .with_attribute("x", 1),
            Node::new("c")
                .at(2.0, 0.0)
                .with_population(10)
                .with_tally("e", t(4.0, 6.0))
                .with_attribute("x", 6),
            Node::new("d")
                .at(3.0, 0.0)
                .with_population(10)
                .with_tally("e", t(5.0, 5.0))
                .with_attribute("x", 5),
        ];
        let g = DualGraph::new(nodes, &[("a", "b"), ("b", "c"), ("c", "d")]).unwrap();
        let p = Partition::new(g, vec![1, 1, 2, 2], 2, 0.0).unwrap();
        let metrics = ChainMetrics {
            elections: vec!["e".into()],
            attribute: Some(AttributeMajoritySpec {
                attribute: "x".into(),
                base: "population".into(),
            }),
            ..ChainMetrics::default()
        };
        let r = plan_record(&p, 0, true, &metrics).unwrap();
        // District 1: 7-13 (share .35), district 2: 9-11 (share .45).
        assert_eq!(r.seats["e"], 0);
        assert_eq!(r.competitive["e"], 1);
        // x sums 7 and 11 against populations 20 and 20.
        assert_eq!(r.attribute_majorities, Some(1));
        let dg = district_dual_graph(&p);
        assert_eq!(dg.node(NodeId(1)).tallies["e"], t(9.0, 11.0));
        assert_eq!(dg.node(NodeId(1)).position, Some(Point::new(2.5, 0.0)));
    }

    #[test]
    fn tracker_prefers_first_and_skips_zero() {
        let p = columns(4);
        let base = plan_record(&p, 0, true, &ChainMetrics::default()).unwrap();
        let with = |step, count: Option<u64>, edges| PlanRecord {
            step,
            matchings: count.map(BigCount::from),
            dual_edges: edges,
            ..base.clone()
        };
        let mut t = ExtremePlanTracker::default();
        for r in [
            with(0, Some(0), 9),
            with(1, Some(961176), 12),
            with(2, Some(852), 9),
            with(3, Some(852), 12),
            with(4, None, 15),
            with(5, Some(961176), 7),
        ] {
            t.observe(&r, &p);
        }
        assert_eq!(t.min_nonzero_matchings.unwrap().record.step, 2);
        assert_eq!(t.max_matchings.unwrap().record.step, 1);
        assert_eq!(t.min_dual_edges.unwrap().record.step, 5);
        assert_eq!(t.max_dual_edges.unwrap().record.step, 4);
    }
}
