//! Combinatorial planar embeddings derived from straight-line drawings.
//!
//! Rotations list neighbors counterclockwise by angle. Faces are traced with
//! the face kept on the left of every dart, so bounded faces come out
//! counterclockwise (positive signed area) and the unbounded face of each
//! component comes out clockwise.

use std::cmp::Ordering;

use thiserror::Error;

use crate::graph::{DualGraph, NodeId, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("node {0:?} has no coordinates")]
    MissingCoordinates(String),
    #[error("nodes {0:?} and {1:?} share a position")]
    CoincidentNodes(String, String),
    #[error("drawing is not planar: edge {0}-{1} crosses edge {2}-{3}")]
    Crossing(String, String, String, String),
    #[error("drawing is not planar: node {0:?} lies on edge {1}-{2}")]
    NodeOnEdge(String, String, String),
}

/// A rotation system with its traced faces.
///
/// Nodes are addressed by a dense local index (`0..nodes().len()`, ascending
/// canonical order). A face is a vertex cycle `[v0, v1, .., vk]` standing for
/// the darts `v0→v1, .., vk→v0`; a one-vertex face is the face of an
/// isolated node and has no darts.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    nodes: Vec<NodeId>,
    rotation: Vec<Vec<usize>>,
    faces: Vec<Vec<usize>>,
    outer_faces: Vec<usize>,
}

impl Embedding {
    /// Assembles an embedding from explicit parts, in `NodeId` terms.
    /// Nothing is checked here; see [`verify_embedding`].
    pub fn from_parts(
        rotation: Vec<(NodeId, Vec<NodeId>)>,
        faces: Vec<Vec<NodeId>>,
        outer_faces: Vec<usize>,
    ) -> Self {
        let mut nodes: Vec<NodeId> = rotation.iter().map(|(v, _)| *v).collect();
        nodes.sort_unstable();
        let local = |v: NodeId| nodes.binary_search(&v).unwrap_or(usize::MAX);
        let mut rot = vec![Vec::new(); nodes.len()];
        for (v, around) in &rotation {
            rot[local(*v)] = around.iter().map(|&w| local(w)).collect();
        }
        let faces = faces
            .iter()
            .map(|f| f.iter().map(|&w| local(w)).collect())
            .collect();
        Embedding {
            nodes,
            rotation: rot,
            faces,
            outer_faces,
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn local_index(&self, v: NodeId) -> Option<usize> {
        self.nodes.binary_search(&v).ok()
    }

    /// Neighbors of `v` in counterclockwise order.
    pub fn rotation(&self, v: NodeId) -> Option<Vec<NodeId>> {
        let i = self.local_index(v)?;
        Some(self.rotation[i].iter().map(|&w| self.nodes[w]).collect())
    }

    pub(crate) fn rotation_local(&self) -> &[Vec<usize>] {
        &self.rotation
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Face `f` as a vertex cycle.
    pub fn face(&self, f: usize) -> Vec<NodeId> {
        self.faces[f].iter().map(|&w| self.nodes[w]).collect()
    }

    pub(crate) fn faces_local(&self) -> &[Vec<usize>] {
        &self.faces
    }

    /// Index of the unbounded face of each connected component.
    pub fn outer_faces(&self) -> &[usize] {
        &self.outer_faces
    }

    pub fn is_outer(&self, f: usize) -> bool {
        self.outer_faces.contains(&f)
    }

    /// Reverses the vertex cycle of face `f`.
    pub fn reverse_face(&mut self, f: usize) {
        self.faces[f].reverse();
    }
}

/// Darts of a face, in traversal order.
pub(crate) fn face_darts(face: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    let k = face.len();
    let n = if k >= 2 { k } else { 0 };
    (0..n).map(move |i| (face[i], face[(i + 1) % k]))
}

/// Embeds `g` using its node coordinates, rejecting non-planar drawings.
pub fn embed_from_coordinates(g: &DualGraph) -> Result<Embedding, EmbedError> {
    let points = positions(g)?;
    check_drawing(g, &points)?;
    Ok(embed_positions(g, &points))
}

/// Like [`embed_from_coordinates`] but trusts the drawing to be planar.
/// Used for subgraphs of a drawing that has already been checked.
pub(crate) fn embed_unchecked(g: &DualGraph) -> Result<Embedding, EmbedError> {
    let points = positions(g)?;
    Ok(embed_positions(g, &points))
}

fn positions(g: &DualGraph) -> Result<Vec<Point>, EmbedError> {
    g.nodes()
        .map(|v| match g.node(v).position {
            Some(p) if p.x.is_finite() && p.y.is_finite() => Ok(p),
            _ => Err(EmbedError::MissingCoordinates(g.label(v).to_string())),
        })
        .collect()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn sign(x: f64) -> i8 {
    match x.partial_cmp(&0.0) {
        Some(Ordering::Greater) => 1,
        Some(Ordering::Less) => -1,
        _ => 0,
    }
}

/// `p` lies on the closed segment `ab`, given that the three are collinear.
fn within_box(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = sign(cross(a, b, c));
    let d2 = sign(cross(a, b, d));
    let d3 = sign(cross(c, d, a));
    let d4 = sign(cross(c, d, b));
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    (d1 == 0 && within_box(a, b, c))
        || (d2 == 0 && within_box(a, b, d))
        || (d3 == 0 && within_box(c, d, a))
        || (d4 == 0 && within_box(c, d, b))
}

/// Node `w` sits on the closed segment of edge `(u, v)` without being an
/// endpoint.
pub(crate) fn node_on_edge(points: &[Point], (u, v): (usize, usize), w: usize) -> bool {
    if w == u || w == v {
        return false;
    }
    let (a, b, p) = (points[u], points[v], points[w]);
    sign(cross(a, b, p)) == 0 && within_box(a, b, p)
}

/// The straight segments of two distinct edges meet somewhere other than a
/// shared endpoint.
pub(crate) fn edges_conflict(
    points: &[Point],
    (a, b): (usize, usize),
    (c, d): (usize, usize),
) -> bool {
    if a == c || a == d || b == c || b == d {
        // Shared endpoint: only a collinear overlap is a crossing.
        let (p, q, r) = if a == c {
            (a, b, d)
        } else if a == d {
            (a, b, c)
        } else if b == c {
            (b, a, d)
        } else {
            (b, a, c)
        };
        let (pp, qq, rr) = (points[p], points[q], points[r]);
        let dot = (qq.x - pp.x) * (rr.x - pp.x) + (qq.y - pp.y) * (rr.y - pp.y);
        sign(cross(pp, qq, rr)) == 0 && dot > 0.0
    } else {
        segments_touch(points[a], points[b], points[c], points[d])
    }
}

fn check_drawing(g: &DualGraph, points: &[Point]) -> Result<(), EmbedError> {
    let ids: Vec<NodeId> = g.nodes().collect();
    let label = |i: usize| g.label(ids[i]).to_string();
    let n = ids.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        (points[i].x, points[i].y)
            .partial_cmp(&(points[j].x, points[j].y))
            .unwrap_or(Ordering::Equal)
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(EmbedError::CoincidentNodes(label(a), label(b)));
        }
    }

    let local = |v: NodeId| ids.binary_search(&v).expect("node of g");
    let edges: Vec<(usize, usize)> = g.edges().map(|(u, v)| (local(u), local(v))).collect();

    for &(u, v) in &edges {
        for w in 0..n {
            if node_on_edge(points, (u, v), w) {
                return Err(EmbedError::NodeOnEdge(label(w), label(u), label(v)));
            }
        }
    }

    for (i, &(a, b)) in edges.iter().enumerate() {
        for &(c, d) in &edges[i + 1..] {
            if edges_conflict(points, (a, b), (c, d)) {
                return Err(EmbedError::Crossing(label(a), label(b), label(c), label(d)));
            }
        }
    }
    Ok(())
}

fn embed_positions(g: &DualGraph, points: &[Point]) -> Embedding {
    let ids: Vec<NodeId> = g.nodes().collect();
    let n = ids.len();
    let local = |v: NodeId| ids.binary_search(&v).expect("node of g");

    let mut rotation: Vec<Vec<usize>> = ids
        .iter()
        .map(|&v| g.neighbors(v).map(local).collect())
        .collect();
    for (v, around) in rotation.iter_mut().enumerate() {
        let o = points[v];
        let angle = |w: usize| (points[w].y - o.y).atan2(points[w].x - o.x);
        around.sort_by(|&a, &b| {
            angle(a)
                .partial_cmp(&angle(b))
                .unwrap_or(Ordering::Equal)
                .then_with(|| {
                    let da = (points[a].x - o.x).hypot(points[a].y - o.y);
                    let db = (points[b].x - o.x).hypot(points[b].y - o.y);
                    da.partial_cmp(&db)
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| g.label(ids[a]).cmp(g.label(ids[b])))
                })
        });
    }

    // Dart (v, i) is v -> rotation[v][i].
    let offsets: Vec<usize> = std::iter::once(0)
        .chain(rotation.iter().scan(0, |acc, r| {
            *acc += r.len();
            Some(*acc)
        }))
        .collect();
    let total_darts = offsets[n];
    let mut used = vec![false; total_darts];
    let position_in = |v: usize, w: usize| {
        rotation[v]
            .iter()
            .position(|&x| x == w)
            .expect("rotation lists are symmetric")
    };

    let mut faces: Vec<Vec<usize>> = Vec::new();
    for v in 0..n {
        if rotation[v].is_empty() {
            faces.push(vec![v]);
            continue;
        }
        for i in 0..rotation[v].len() {
            if used[offsets[v] + i] {
                continue;
            }
            let mut cycle = Vec::new();
            let (mut a, mut ai) = (v, i);
            while !used[offsets[a] + ai] {
                used[offsets[a] + ai] = true;
                cycle.push(a);
                let b = rotation[a][ai];
                let back = position_in(b, a);
                let deg = rotation[b].len();
                let next = (back + deg - 1) % deg;
                a = b;
                ai = next;
            }
            faces.push(cycle);
        }
    }

    // Assign faces to components and pick the most negative area per component.
    let comps = g.components();
    let mut comp_of = vec![0usize; n];
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            comp_of[local(m)] = c;
        }
    }
    let mut best: Vec<Option<(f64, usize)>> = vec![None; comps.len()];
    for (f, cycle) in faces.iter().enumerate() {
        let area = signed_area(cycle, points);
        let c = comp_of[cycle[0]];
        match best[c] {
            Some((a, _)) if a <= area => {}
            _ => best[c] = Some((area, f)),
        }
    }
    let outer_faces = best
        .into_iter()
        .map(|b| b.expect("component has a face").1)
        .collect();

    Embedding {
        nodes: ids,
        rotation,
        faces,
        outer_faces,
    }
}

fn signed_area(cycle: &[usize], points: &[Point]) -> f64 {
    let k = cycle.len();
    if k < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..k {
        let p = points[cycle[i]];
        let q = points[cycle[(i + 1) % k]];
        twice += p.x * q.y - q.x * p.y;
    }
    twice / 2.0
}

/// Outcome of [`verify_embedding`]: empty `problems` means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verification {
    pub problems: Vec<String>,
}

impl Verification {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Checks that every edge of `g` is traversed once in each direction across
/// the faces, and that Euler's formula holds on each component.
pub fn verify_embedding(e: &Embedding, g: &DualGraph) -> Verification {
    let mut problems = Vec::new();
    let ids: Vec<NodeId> = g.nodes().collect();
    if ids != e.nodes {
        problems.push("node set differs from graph".to_string());
        return Verification { problems };
    }
    let n = ids.len();
    for (v, around) in e.rotation.iter().enumerate() {
        let mut got: Vec<usize> = around.clone();
        got.sort_unstable();
        let want: Vec<usize> = g
            .neighbors(ids[v])
            .map(|w| ids.binary_search(&w).expect("node"))
            .collect();
        if got != want {
            problems.push(format!(
                "rotation at {} is not its neighbor set",
                g.label(ids[v])
            ));
        }
    }

    let mut dart_uses = std::collections::HashMap::new();
    for (f, cycle) in e.faces.iter().enumerate() {
        if cycle.is_empty() || cycle.iter().any(|&v| v >= n) {
            problems.push(format!("face {f} is malformed"));
            continue;
        }
        for (a, b) in face_darts(cycle) {
            if !g.has_edge(ids[a], ids[b]) {
                problems.push(format!(
                    "face {f} uses non-edge {}-{}",
                    g.label(ids[a]),
                    g.label(ids[b])
                ));
            }
            *dart_uses.entry((a, b)).or_insert(0usize) += 1;
        }
    }
    for (u, v) in g.edges() {
        let (a, b) = (
            ids.binary_search(&u).expect("node"),
            ids.binary_search(&v).expect("node"),
        );
        for dart in [(a, b), (b, a)] {
            let uses = dart_uses.get(&dart).copied().unwrap_or(0);
            if uses != 1 {
                problems.push(format!(
                    "dart {}->{} appears in {uses} faces",
                    g.label(ids[dart.0]),
                    g.label(ids[dart.1])
                ));
            }
        }
    }
    if !problems.is_empty() {
        return Verification { problems };
    }

    let comps = g.components();
    let mut comp_of = vec![0usize; n];
    for (c, members) in comps.iter().enumerate() {
        for &m in members {
            comp_of[ids.binary_search(&m).expect("node")] = c;
        }
    }
    let mut faces_per = vec![0i64; comps.len()];
    let mut edges_per = vec![0i64; comps.len()];
    for cycle in &e.faces {
        faces_per[comp_of[cycle[0]]] += 1;
    }
    for (u, _) in g.edges() {
        edges_per[comp_of[ids.binary_search(&u).expect("node")]] += 1;
    }
    for (c, members) in comps.iter().enumerate() {
        let chi = members.len() as i64 - edges_per[c] + faces_per[c];
        if chi != 2 {
            problems.push(format!("component {c}: V - E + F = {chi}, expected 2"));
        }
    }
    if e.outer_faces.len() != comps.len() {
        problems.push(format!(
            "{} outer faces for {} components",
            e.outer_faces.len(),
            comps.len()
        ));
    } else {
        for (c, &f) in e.outer_faces.iter().enumerate() {
            if f >= e.faces.len() || comp_of[e.faces[f][0]] != c {
                problems.push(format!("outer face of component {c} is invalid"));
            }
        }
    }
    Verification { problems }
}
