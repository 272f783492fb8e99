//! Dual graphs, residual subgraphs and perfect matchings.
//!
//! A [`DualGraph`] is an immutable host graph plus the set of nodes still
//! present. Deleting nodes produces a new value that shares the host, so node
//! indices are fixed once at construction (canonical order) and stay stable
//! in every residual graph derived from it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use thiserror::Error;

use crate::election::VoteTally;
use crate::nodeset::NodeSet;

/// Exact, arbitrary-precision matching count.
pub type BigCount = BigUint;

/// Position of a node in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// A district or unit together with its data.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Node {
    pub label: String,
    pub population: u64,
    pub position: Option<Point>,
    /// Two-party tallies keyed by election treatment name.
    pub tallies: BTreeMap<String, VoteTally>,
    /// Named nonnegative counts, e.g. a demographic population.
    pub attributes: BTreeMap<String, u64>,
}

impl Node {
    pub fn new(label: impl Into<String>) -> Self {
        Node {
            label: label.into(),
            ..Default::default()
        }
    }

    pub fn at(mut self, x: f64, y: f64) -> Self {
        self.position = Some(Point::new(x, y));
        self
    }

    pub fn with_population(mut self, population: u64) -> Self {
        self.population = population;
        self
    }

    pub fn with_tally(mut self, election: impl Into<String>, tally: VoteTally) -> Self {
        self.tallies.insert(election.into(), tally);
        self
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: u64) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate node label {0:?}")]
    DuplicateLabel(String),
    #[error("empty node label")]
    EmptyLabel,
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("duplicate edge {0:?}-{1:?}")]
    DuplicateEdge(String, String),
    #[error("self-loop on node {0:?}")]
    SelfLoop(String),
    #[error("explicit node order does not list every node exactly once (at {0:?})")]
    BadOrder(String),
    #[error("cannot pair node {0:?} with itself")]
    SameNode(String),
    #[error("graph has no nodes")]
    Empty,
}

#[derive(Debug)]
pub(crate) struct HostData {
    pub(crate) nodes: Vec<Node>,
    pub(crate) adj: Vec<Vec<usize>>,
    pub(crate) adj_bits: Vec<NodeSet>,
    by_label: HashMap<String, usize>,
}

impl HostData {
    #[inline]
    pub(crate) fn degree_in(&self, v: usize, alive: &NodeSet) -> usize {
        self.adj_bits[v].intersection_len(alive)
    }

    /// Connected components of the subgraph induced by `alive`, each as a
    /// node set, ordered by smallest member.
    pub(crate) fn components_in(&self, alive: &NodeSet) -> Vec<NodeSet> {
        let mut remaining = alive.clone();
        let mut out = Vec::new();
        while let Some(start) = remaining.first() {
            let comp = self.reach_from(start, &remaining);
            remaining.difference_with(&comp);
            out.push(comp);
        }
        out
    }

    /// Nodes reachable from `start` inside `within`.
    pub(crate) fn reach_from(&self, start: usize, within: &NodeSet) -> NodeSet {
        let universe = self.nodes.len();
        let mut seen = NodeSet::empty(universe);
        seen.insert(start);
        let mut frontier = vec![start];
        while let Some(v) = frontier.pop() {
            for &w in &self.adj[v] {
                if within.contains(w) && !seen.contains(w) {
                    seen.insert(w);
                    frontier.push(w);
                }
            }
        }
        seen
    }

    /// True when some connected component of `alive` has odd size.
    pub(crate) fn has_odd_component(&self, alive: &NodeSet) -> bool {
        let mut remaining = alive.clone();
        while let Some(start) = remaining.first() {
            let comp = self.reach_from(start, &remaining);
            if comp.len() % 2 == 1 {
                return true;
            }
            remaining.difference_with(&comp);
        }
        false
    }
}

/// Undirected simple graph of districts or units.
#[derive(Clone)]
pub struct DualGraph {
    host: Arc<HostData>,
    alive: NodeSet,
}

impl DualGraph {
    /// Builds a graph with nodes in lexicographic label order.
    pub fn new<S: AsRef<str>>(nodes: Vec<Node>, edges: &[(S, S)]) -> Result<Self, GraphError> {
        Self::with_order(nodes, edges, None)
    }

    /// Builds a graph; `order`, when given, fixes the canonical node order and
    /// must list every label exactly once.
    pub fn with_order<S: AsRef<str>>(
        mut nodes: Vec<Node>,
        edges: &[(S, S)],
        order: Option<&[String]>,
    ) -> Result<Self, GraphError> {
        let mut seen = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if n.label.is_empty() {
                return Err(GraphError::EmptyLabel);
            }
            if seen.insert(n.label.clone(), i).is_some() {
                return Err(GraphError::DuplicateLabel(n.label.clone()));
            }
        }
        match order {
            None => nodes.sort_by(|a, b| a.label.cmp(&b.label)),
            Some(order) => {
                if order.len() != nodes.len() {
                    return Err(GraphError::BadOrder(format!(
                        "{} labels for {} nodes",
                        order.len(),
                        nodes.len()
                    )));
                }
                let mut slots: Vec<Option<Node>> = nodes.into_iter().map(Some).collect();
                let mut ordered = Vec::with_capacity(slots.len());
                for label in order {
                    let i = *seen
                        .get(label)
                        .ok_or_else(|| GraphError::BadOrder(label.clone()))?;
                    let node = slots[i]
                        .take()
                        .ok_or_else(|| GraphError::BadOrder(label.clone()))?;
                    ordered.push(node);
                }
                nodes = ordered;
            }
        }

        let n = nodes.len();
        let by_label: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| (node.label.clone(), i))
            .collect();
        let mut adj = vec![Vec::new(); n];
        let mut adj_bits = vec![NodeSet::empty(n); n];
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let u = *by_label
                .get(a)
                .ok_or_else(|| GraphError::UnknownNode(a.to_string()))?;
            let v = *by_label
                .get(b)
                .ok_or_else(|| GraphError::UnknownNode(b.to_string()))?;
            if u == v {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            if adj_bits[u].contains(v) {
                return Err(GraphError::DuplicateEdge(a.to_string(), b.to_string()));
            }
            adj_bits[u].insert(v);
            adj_bits[v].insert(u);
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(DualGraph {
            alive: NodeSet::full(n),
            host: Arc::new(HostData {
                nodes,
                adj,
                adj_bits,
                by_label,
            }),
        })
    }

    /// Convenience constructor for bare topology: every label mentioned in an
    /// edge (plus any in `isolated`) becomes a node without data.
    pub fn from_edges(edges: &[(&str, &str)], isolated: &[&str]) -> Result<Self, GraphError> {
        let mut labels: Vec<&str> = edges
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(isolated.iter().copied())
            .collect();
        labels.sort_unstable();
        labels.dedup();
        let nodes = labels.into_iter().map(Node::new).collect();
        Self::new(nodes, edges)
    }

    pub(crate) fn host(&self) -> &HostData {
        &self.host
    }

    /// Both graphs are views of the same host (one derives from the other
    /// or they share an ancestor).
    pub fn same_host(&self, other: &DualGraph) -> bool {
        Arc::ptr_eq(&self.host, &other.host)
    }

    /// Nodes present in this (possibly residual) graph.
    pub fn node_set(&self) -> &NodeSet {
        &self.alive
    }

    /// Size of the index space shared with the original graph.
    pub fn universe(&self) -> usize {
        self.host.nodes.len()
    }

    /// Same host, restricted to `keep ∩ self.nodes`.
    pub fn induced(&self, keep: &NodeSet) -> DualGraph {
        let mut alive = self.alive.clone();
        alive.intersect_with(keep);
        DualGraph {
            host: Arc::clone(&self.host),
            alive,
        }
    }

    pub fn node_count(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.alive
            .iter()
            .map(|v| self.host.degree_in(v, &self.alive))
            .sum::<usize>()
            / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.alive.iter().map(NodeId)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.alive.contains(v.0)
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.host.nodes[v.0]
    }

    pub fn label(&self, v: NodeId) -> &str {
        &self.host.nodes[v.0].label
    }

    /// Looks up a label among the nodes present in this graph.
    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.host
            .by_label
            .get(label)
            .copied()
            .filter(|&i| self.alive.contains(i))
            .map(NodeId)
    }

    pub fn require(&self, label: &str) -> Result<NodeId, GraphError> {
        self.find(label)
            .ok_or_else(|| GraphError::UnknownNode(label.to_string()))
    }

    /// Neighbors in ascending canonical order.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.host.adj[v.0]
            .iter()
            .copied()
            .filter(|&w| self.alive.contains(w))
            .map(NodeId)
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.host.degree_in(v.0, &self.alive)
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.contains(u) && self.contains(v) && self.host.adj_bits[u.0].contains(v.0)
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic index order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            self.neighbors(u)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// The subgraph with `u` and `v` removed. The receiver is unchanged.
    pub fn delete_pair(&self, u: NodeId, v: NodeId) -> Result<DualGraph, GraphError> {
        for w in [u, v] {
            if !self.contains(w) {
                let name = self
                    .host
                    .nodes
                    .get(w.0)
                    .map_or_else(|| w.to_string(), |n| n.label.clone());
                return Err(GraphError::UnknownNode(name));
            }
        }
        if u == v {
            return Err(GraphError::SameNode(self.label(u).to_string()));
        }
        let mut alive = self.alive.clone();
        alive.remove(u.0);
        alive.remove(v.0);
        Ok(DualGraph {
            host: Arc::clone(&self.host),
            alive,
        })
    }

    pub fn delete_pair_by_label(&self, u: &str, v: &str) -> Result<DualGraph, GraphError> {
        self.delete_pair(self.require(u)?, self.require(v)?)
    }

    /// Connected components ordered by smallest member; members ascending.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        self.host
            .components_in(&self.alive)
            .into_iter()
            .map(|c| c.iter().map(NodeId).collect())
            .collect()
    }

    /// A node of minimum degree, ties going to the smallest canonical index.
    pub fn first_min_degree_node(&self) -> Result<NodeId, GraphError> {
        self.nodes()
            .min_by_key(|&v| (self.degree(v), v))
            .ok_or(GraphError::Empty)
    }

    /// Every node carries coordinates.
    pub fn has_positions(&self) -> bool {
        self.nodes().all(|v| self.node(v).position.is_some())
    }
}

impl fmt::Debug for DualGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self
            .edges()
            .map(|(u, v)| format!("{}-{}", self.label(u), self.label(v)))
            .collect();
        f.debug_struct("DualGraph")
            .field(
                "nodes",
                &self.nodes().map(|v| self.label(v)).collect::<Vec<_>>(),
            )
            .field("edges", &edges)
            .finish()
    }
}

/// A set of disjoint node pairs, stored normalized (`u < v`, pairs sorted).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Matching {
    pairs: Vec<(NodeId, NodeId)>,
}

impl Matching {
    pub fn new(pairs: impl IntoIterator<Item = (NodeId, NodeId)>) -> Self {
        let mut pairs: Vec<_> = pairs
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        pairs.sort_unstable();
        Matching { pairs }
    }

    pub fn from_labels(g: &DualGraph, pairs: &[(&str, &str)]) -> Result<Self, GraphError> {
        let ids = pairs
            .iter()
            .map(|&(a, b)| Ok((g.require(a)?, g.require(b)?)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        Ok(Matching::new(ids))
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains_pair(&self, u: NodeId, v: NodeId) -> bool {
        let key = if u <= v { (u, v) } else { (v, u) };
        self.pairs.binary_search(&key).is_ok()
    }

    /// Every pair is an edge of `g` and every node of `g` is covered once.
    pub fn is_perfect_for(&self, g: &DualGraph) -> bool {
        if self.pairs.len() * 2 != g.node_count() {
            return false;
        }
        let mut covered = NodeSet::empty(g.universe());
        for &(u, v) in &self.pairs {
            if !g.has_edge(u, v) || covered.contains(u.0) || covered.contains(v.0) {
                return false;
            }
            covered.insert(u.0);
            covered.insert(v.0);
        }
        true
    }

    /// Pairs as labels, each pair ordered by label and the list sorted.
    pub fn label_pairs<'g>(&self, g: &'g DualGraph) -> Vec<(&'g str, &'g str)> {
        let mut out: Vec<_> = self
            .pairs
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (g.label(u), g.label(v));
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            })
            .collect();
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path4() -> DualGraph {
        DualGraph::from_edges(&[("a", "b"), ("b", "c"), ("c", "d")], &[]).unwrap()
    }

    fn ten_node_example() -> DualGraph {
        DualGraph::from_edges(
            &[
                ("I", "J"),
                ("F", "J"),
                ("G", "H"),
                ("F", "I"),
                ("E", "H"),
                ("D", "H"),
                ("D", "G"),
                ("D", "E"),
                ("C", "F"),
                ("E", "C"),
                ("C", "B"),
                ("B", "A"),
            ],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn delete_pair_on_path_leaves_isolated_ends() {
        let g = path4();
        let h = g.delete_pair_by_label("b", "c").unwrap();
        assert_eq!(h.node_count(), 2);
        assert_eq!(h.edge_count(), 0);
        assert!(h.find("a").is_some() && h.find("d").is_some());
        // original untouched
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn delete_pair_on_triangle() {
        let g = DualGraph::from_edges(&[("a", "b"), ("b", "c"), ("a", "c")], &[]).unwrap();
        let h = g.delete_pair_by_label("a", "b").unwrap();
        assert_eq!(h.nodes().map(|v| h.label(v)).collect::<Vec<_>>(), ["c"]);
        assert_eq!(h.edge_count(), 0);
    }

    #[test]
    fn delete_pair_ten_node_example() {
        let g = ten_node_example();
        let h = g.delete_pair_by_label("A", "B").unwrap();
        assert_eq!(h.node_count(), 8);
        let c = h.require("C").unwrap();
        let nbrs: Vec<_> = h.neighbors(c).map(|v| h.label(v)).collect();
        assert_eq!(nbrs, ["E", "F"]);
        assert_eq!(h.first_min_degree_node().unwrap(), c);
    }

    #[test]
    fn delete_pair_errors_name_the_label() {
        let g = path4();
        let h = g.delete_pair_by_label("a", "b").unwrap();
        let a = g.require("a").unwrap();
        let c = g.require("c").unwrap();
        assert_eq!(
            h.delete_pair(a, c).unwrap_err(),
            GraphError::UnknownNode("a".into())
        );
        assert_eq!(
            g.delete_pair_by_label("zz", "a").unwrap_err(),
            GraphError::UnknownNode("zz".into())
        );
        assert_eq!(
            g.delete_pair(a, a).unwrap_err(),
            GraphError::SameNode("a".into())
        );
    }

    #[test]
    fn components_cases() {
        let empty = DualGraph::new::<&str>(vec![], &[]).unwrap();
        assert!(empty.components().is_empty());

        let two = DualGraph::from_edges(&[("a", "b"), ("c", "d")], &[]).unwrap();
        let comps = two.components();
        assert_eq!(comps.len(), 2);
        assert!(comps.iter().all(|c| c.len() == 2));
        assert!(comps[0][0] < comps[1][0]);
    }

    #[test]
    fn first_min_degree_cases() {
        let star = DualGraph::from_edges(&[("c", "l1"), ("c", "l2")], &[]).unwrap();
        let v = star.first_min_degree_node().unwrap();
        assert_eq!(star.label(v), "l1");

        let cycle =
            DualGraph::from_edges(&[("a", "b"), ("b", "c"), ("c", "d"), ("d", "a")], &[]).unwrap();
        assert_eq!(cycle.label(cycle.first_min_degree_node().unwrap()), "a");

        let empty = DualGraph::new::<&str>(vec![], &[]).unwrap();
        assert_eq!(empty.first_min_degree_node(), Err(GraphError::Empty));
    }

    #[test]
    fn construction_rejects_bad_input() {
        let nodes = || vec![Node::new("a"), Node::new("b")];
        assert_eq!(
            DualGraph::new(nodes(), &[("a", "b"), ("b", "a")]).unwrap_err(),
            GraphError::DuplicateEdge("b".into(), "a".into())
        );
        assert_eq!(
            DualGraph::new(nodes(), &[("a", "x")]).unwrap_err(),
            GraphError::UnknownNode("x".into())
        );
        assert_eq!(
            DualGraph::new(nodes(), &[("a", "a")]).unwrap_err(),
            GraphError::SelfLoop("a".into())
        );
        assert_eq!(
            DualGraph::new::<&str>(vec![Node::new("a"), Node::new("a")], &[]).unwrap_err(),
            GraphError::DuplicateLabel("a".into())
        );
    }

    #[test]
    fn explicit_order_overrides_lexicographic() {
        let order = vec!["10".to_string(), "2".to_string(), "1".to_string()];
        let nodes = vec![Node::new("1"), Node::new("2"), Node::new("10")];
        let g = DualGraph::with_order(nodes, &[("1", "2")], Some(&order)).unwrap();
        let labels: Vec<_> = g.nodes().map(|v| g.label(v)).collect();
        assert_eq!(labels, ["10", "2", "1"]);

        let lex = DualGraph::new(
            vec![Node::new("1"), Node::new("2"), Node::new("10")],
            &[("1", "2")],
        )
        .unwrap();
        let labels: Vec<_> = lex.nodes().map(|v| lex.label(v)).collect();
        assert_eq!(labels, ["1", "10", "2"]);
    }

    #[test]
    fn matching_validity() {
        let g = path4();
        let m = Matching::from_labels(&g, &[("d", "c"), ("b", "a")]).unwrap();
        assert!(m.is_perfect_for(&g));
        assert_eq!(m.label_pairs(&g), [("a", "b"), ("c", "d")]);
        let bad = Matching::from_labels(&g, &[("a", "c"), ("b", "d")]).unwrap();
        assert!(!bad.is_perfect_for(&g));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = DualGraph> {
            (1usize..14).prop_flat_map(|n| {
                proptest::collection::vec((0..n, 0..n), 0..30).prop_map(move |raw| {
                    let labels: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
                    let mut edges = Vec::new();
                    let mut seen = std::collections::HashSet::new();
                    for (a, b) in raw {
                        if a != b && seen.insert((a.min(b), a.max(b))) {
                            edges.push((labels[a].clone(), labels[b].clone()));
                        }
                    }
                    let nodes = labels.iter().map(Node::new).collect();
                    DualGraph::new(nodes, &edges).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn components_partition_nodes(g in arb_graph()) {
                let comps = g.components();
                let mut all: Vec<NodeId> = comps.iter().flatten().copied().collect();
                all.sort();
                let total = all.len();
                all.dedup();
                prop_assert_eq!(all.len(), total);
                prop_assert_eq!(all, g.nodes().collect::<Vec<_>>());
                for c in &comps {
                    for &u in c {
                        for v in g.neighbors(u) {
                            prop_assert!(c.contains(&v));
                        }
                    }
                }
            }

            #[test]
            fn delete_pair_shrinks_by_two(g in arb_graph(), i in 0usize..14, j in 0usize..14) {
                let ids: Vec<NodeId> = g.nodes().collect();
                prop_assume!(ids.len() >= 2);
                let (u, v) = (ids[i % ids.len()], ids[j % ids.len()]);
                prop_assume!(u != v);
                let h = g.delete_pair(u, v).unwrap();
                prop_assert_eq!(h.node_count() + 2, g.node_count());
                for (a, b) in h.edges() {
                    prop_assert!(g.has_edge(a, b));
                }
                prop_assert!(h.edge_count() <= g.edge_count());
            }
        }
    }
}
