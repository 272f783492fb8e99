//! Perfect-matching counts of planar graphs by Pfaffian orientation.
//!
//! Faces are traced counterclockwise (see [`crate::embed`]), so an edge is
//! clockwise with respect to a bounded face when its orientation runs against
//! the traversal. An orientation in which every bounded face has an odd
//! number of clockwise edges makes `det A` the square of the matching count.
//! Odd-clockwise and odd-counterclockwise are mirror images of one another;
//! either works, and this module uses clockwise throughout.

use std::collections::{HashMap, VecDeque};

use num_bigint::BigInt;
use num_traits::One;
use thiserror::Error;

use crate::embed::{
    embed_from_coordinates, embed_unchecked, face_darts, verify_embedding, EmbedError, Embedding,
};
use crate::graph::{BigCount, DualGraph, NodeId};
use crate::linalg::{determinant, integer_sqrt_exact};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FktError {
    #[error("{0}; count non-planar graphs by enumeration instead")]
    Embed(#[from] EmbedError),
    #[error("invalid embedding: {}", .0.join("; "))]
    InvalidEmbedding(Vec<String>),
    #[error("internal error: determinant {0} is not a perfect square")]
    NotPerfectSquare(BigInt),
    #[error("graph does not derive from the counter's host graph")]
    ForeignGraph,
}

/// A direction for every edge, stored as `(tail, head)` in edge order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Orientation {
    directed: Vec<(NodeId, NodeId)>,
}

impl Orientation {
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.directed
    }

    /// True when the edge `{u, v}` is oriented `u -> v`.
    pub fn points(&self, u: NodeId, v: NodeId) -> Option<bool> {
        self.directed.iter().find_map(|&(a, b)| {
            if (a, b) == (u, v) {
                Some(true)
            } else if (a, b) == (v, u) {
                Some(false)
            } else {
                None
            }
        })
    }

    /// Flips the edge `{u, v}`; a no-op if it is absent.
    pub fn flip(&mut self, u: NodeId, v: NodeId) {
        for e in &mut self.directed {
            if *e == (u, v) || *e == (v, u) {
                *e = (e.1, e.0);
            }
        }
    }

    /// Clockwise edge count of face `f`, counted per dart.
    pub fn clockwise_count(&self, e: &Embedding, f: usize) -> usize {
        let forward: HashMap<(NodeId, NodeId), ()> =
            self.directed.iter().map(|&d| (d, ())).collect();
        let nodes = e.nodes();
        face_darts(&e.faces_local()[f])
            .filter(|&(a, b)| forward.contains_key(&(nodes[b], nodes[a])))
            .count()
    }
}

/// Every bounded face of `e` has an odd number of clockwise edges.
pub fn is_pfaffian(e: &Embedding, o: &Orientation) -> bool {
    (0..e.face_count())
        .filter(|&f| !e.is_outer(f))
        .all(|f| o.clockwise_count(e, f) % 2 == 1)
}

/// Local-index orientation: `forward[k]` is true when edge `k` (stored as
/// `(a, b)` with `a < b`) points `a -> b`.
struct LocalOrientation {
    edges: Vec<(usize, usize)>,
    forward: Vec<bool>,
}

fn orient(e: &Embedding) -> Result<LocalOrientation, FktError> {
    let rotation = e.rotation_local();
    let n = rotation.len();
    let mut edges = Vec::new();
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    for (a, around) in rotation.iter().enumerate() {
        for &b in around {
            if a < b {
                edge_id.insert((a, b), edges.len());
                edges.push((a, b));
            }
        }
    }
    let key = |a: usize, b: usize| edge_id[&(a.min(b), a.max(b))];

    // Spanning forest; its edges keep the default a -> b direction.
    let mut in_tree = vec![false; edges.len()];
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &w in &rotation[v] {
                if !seen[w] {
                    seen[w] = true;
                    in_tree[key(v, w)] = true;
                    queue.push_back(w);
                }
            }
        }
    }

    let faces = e.faces_local();
    let mut face_of_dart: HashMap<(usize, usize), usize> = HashMap::new();
    for (f, cycle) in faces.iter().enumerate() {
        for dart in face_darts(cycle) {
            face_of_dart.insert(dart, f);
        }
    }
    // Non-tree edges form a spanning tree of the faces of each component.
    let mut dual: Vec<Vec<(usize, usize)>> = vec![Vec::new(); faces.len()];
    for (k, &(a, b)) in edges.iter().enumerate() {
        if in_tree[k] {
            continue;
        }
        let (f, g) = match (face_of_dart.get(&(a, b)), face_of_dart.get(&(b, a))) {
            (Some(&f), Some(&g)) => (f, g),
            _ => {
                return Err(FktError::InvalidEmbedding(vec![format!(
                    "edge {k} lacks a face"
                )]))
            }
        };
        dual[f].push((g, k));
        dual[g].push((f, k));
    }
    let mut parent_edge: Vec<Option<usize>> = vec![None; faces.len()];
    let mut reached = vec![false; faces.len()];
    let mut order = Vec::with_capacity(faces.len());
    for &root in e.outer_faces() {
        reached[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(f) = queue.pop_front() {
            order.push(f);
            for &(g, k) in &dual[f] {
                if !reached[g] {
                    reached[g] = true;
                    parent_edge[g] = Some(k);
                    queue.push_back(g);
                }
            }
        }
    }
    if order.len() != faces.len() {
        return Err(FktError::InvalidEmbedding(vec![
            "faces are not connected through non-tree edges".to_string(),
        ]));
    }

    let mut forward = vec![true; edges.len()];
    let mut fixed = in_tree.clone();
    for &f in order.iter().rev() {
        let Some(pe) = parent_edge[f] else { continue };
        let mut clockwise = 0usize;
        let mut open_dart = None;
        for (a, b) in face_darts(&faces[f]) {
            let k = key(a, b);
            if k == pe {
                open_dart = Some((a, b));
                continue;
            }
            if !fixed[k] {
                return Err(FktError::InvalidEmbedding(vec![format!(
                    "face {f} has more than one undetermined edge"
                )]));
            }
            // dart a->b runs with the face; edge oriented b->a is clockwise
            let points_a_to_b = forward[k] == (a < b);
            if !points_a_to_b {
                clockwise += 1;
            }
        }
        let (a, b) = open_dart.expect("parent edge lies on the face");
        // Make the open dart clockwise exactly when the rest is even.
        let want_clockwise = clockwise.is_multiple_of(2);
        let points_a_to_b = !want_clockwise;
        forward[pe] = points_a_to_b == (a < b);
        fixed[pe] = true;
    }
    Ok(LocalOrientation { edges, forward })
}

/// Builds a Pfaffian orientation of `g` from a valid embedding.
pub fn pfaffian_orientation(g: &DualGraph, e: &Embedding) -> Result<Orientation, FktError> {
    let check = verify_embedding(e, g);
    if !check.is_valid() {
        return Err(FktError::InvalidEmbedding(check.problems));
    }
    let local = orient(e)?;
    let nodes = e.nodes();
    let directed = local
        .edges
        .iter()
        .zip(&local.forward)
        .map(|(&(a, b), &fwd)| {
            if fwd {
                (nodes[a], nodes[b])
            } else {
                (nodes[b], nodes[a])
            }
        })
        .collect();
    Ok(Orientation { directed })
}

/// Skew-symmetric signed adjacency matrix, rows in the order of `nodes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedAdjacency {
    nodes: Vec<NodeId>,
    entries: Vec<Vec<i64>>,
}

impl SignedAdjacency {
    /// Matrix of `o` restricted to `nodes` (edges leaving the set are ignored).
    pub fn new(nodes: &[NodeId], o: &Orientation) -> Self {
        let index: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut entries = vec![vec![0i64; nodes.len()]; nodes.len()];
        for &(u, v) in o.edges() {
            if let (Some(&i), Some(&j)) = (index.get(&u), index.get(&v)) {
                entries[i][j] = 1;
                entries[j][i] = -1;
            }
        }
        SignedAdjacency {
            nodes: nodes.to_vec(),
            entries,
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn entries(&self) -> &[Vec<i64>] {
        &self.entries
    }

    pub fn is_skew_symmetric(&self) -> bool {
        let n = self.entries.len();
        (0..n).all(|i| (0..n).all(|j| self.entries[i][j] == -self.entries[j][i]))
    }
}

/// Exact determinant by fraction-free elimination.
pub fn exact_determinant(a: &SignedAdjacency) -> BigInt {
    determinant(&a.entries)
}

/// Number of perfect matchings of a planar graph drawn by its coordinates.
/// Disconnected graphs are counted per component and multiplied.
pub fn count_matchings_fkt(g: &DualGraph) -> Result<BigCount, FktError> {
    if let Some(early) = trivial_count(g) {
        return Ok(early);
    }
    let e = embed_from_coordinates(g)?;
    count_embedded(g, &e)
}

/// Like [`count_matchings_fkt`] with a caller-supplied embedding.
pub fn count_with_embedding(g: &DualGraph, e: &Embedding) -> Result<BigCount, FktError> {
    let check = verify_embedding(e, g);
    if !check.is_valid() {
        return Err(FktError::InvalidEmbedding(check.problems));
    }
    if let Some(early) = trivial_count(g) {
        return Ok(early);
    }
    count_embedded(g, e)
}

fn trivial_count(g: &DualGraph) -> Option<BigCount> {
    if g.is_empty() {
        Some(BigCount::one())
    } else if g.node_count() % 2 == 1 || g.host().has_odd_component(g.node_set()) {
        Some(BigCount::default())
    } else {
        None
    }
}

fn count_embedded(g: &DualGraph, e: &Embedding) -> Result<BigCount, FktError> {
    let local = orient(e)?;
    let nodes = e.nodes();
    let mut total = BigCount::one();
    for comp in g.components() {
        if comp.len() == 2 {
            continue;
        }
        let pos: HashMap<usize, usize> = comp
            .iter()
            .enumerate()
            .map(|(i, v)| (nodes.binary_search(v).expect("node"), i))
            .collect();
        let mut m = vec![vec![0i64; comp.len()]; comp.len()];
        for (&(a, b), &fwd) in local.edges.iter().zip(&local.forward) {
            if let (Some(&i), Some(&j)) = (pos.get(&a), pos.get(&b)) {
                let s = if fwd { 1 } else { -1 };
                m[i][j] = s;
                m[j][i] = -s;
            }
        }
        let det = determinant(&m);
        let root = integer_sqrt_exact(&det).ok_or(FktError::NotPerfectSquare(det))?;
        total *= root;
        if total == BigCount::default() {
            break;
        }
    }
    Ok(total)
}

/// Counts matchings of induced subgraphs of one planar drawing.
///
/// The host drawing is checked for crossings once; induced subgraphs of a
/// planar straight-line drawing are planar, so later counts skip the check.
#[derive(Clone, Debug)]
pub struct PlanarCounter {
    host: DualGraph,
}

impl PlanarCounter {
    pub fn new(g: &DualGraph) -> Result<Self, FktError> {
        embed_from_coordinates(g)?;
        Ok(PlanarCounter { host: g.clone() })
    }

    pub fn host(&self) -> &DualGraph {
        &self.host
    }

    pub fn count(&self, g: &DualGraph) -> Result<BigCount, FktError> {
        if !self.host.same_host(g) {
            return Err(FktError::ForeignGraph);
        }
        if let Some(early) = trivial_count(g) {
            return Ok(early);
        }
        let e = embed_unchecked(g)?;
        count_embedded(g, &e)
    }
}
