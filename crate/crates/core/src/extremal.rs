//! Maximum- and minimum-weight perfect matchings, and the exact range of
//! seat outcomes they certify.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::blossom::Blossom;
use crate::election::{merged_tally, ElectionError};
use crate::graph::{DualGraph, GraphError, Matching, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExtremalError {
    #[error("graph has no perfect matching")]
    Infeasible,
    #[error("weighted pair {0}-{1} is not an edge")]
    NotAnEdge(String, String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Election(#[from] ElectionError),
}

/// Integer edge weights; edges without an entry weigh 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeWeights {
    w: BTreeMap<(NodeId, NodeId), i64>,
}

fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

impl EdgeWeights {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(
        &mut self,
        g: &DualGraph,
        u: NodeId,
        v: NodeId,
        weight: i64,
    ) -> Result<(), ExtremalError> {
        if !g.has_edge(u, v) {
            return Err(ExtremalError::NotAnEdge(
                g.node(u).label.clone(),
                g.node(v).label.clone(),
            ));
        }
        self.w.insert(key(u, v), weight);
        Ok(())
    }

    pub fn set_by_label(
        &mut self,
        g: &DualGraph,
        u: &str,
        v: &str,
        weight: i64,
    ) -> Result<(), ExtremalError> {
        self.set(g, g.require(u)?, g.require(v)?, weight)
    }

    pub fn get(&self, u: NodeId, v: NodeId) -> i64 {
        self.w.get(&key(u, v)).copied().unwrap_or(0)
    }

    pub fn negated(&self) -> Self {
        EdgeWeights {
            w: self.w.iter().map(|(&k, &x)| (k, -x)).collect(),
        }
    }

    /// Total weight of the pairs of `m`.
    pub fn total(&self, m: &Matching) -> i64 {
        m.pairs().iter().map(|&(u, v)| self.get(u, v)).sum()
    }
}

/// 0/1 weights: 1 on every edge whose merged tally is a Democratic seat.
pub fn seat_weights(g: &DualGraph, election: &str) -> Result<EdgeWeights, ExtremalError> {
    let mut w = EdgeWeights::new();
    for (u, v) in g.edges() {
        if merged_tally(g, u, v, election)?.is_d_seat() {
            w.set(g, u, v, 1)?;
        }
    }
    Ok(w)
}

/// A perfect matching of maximum total weight, with that weight.
/// Which optimal matching is returned among ties is unspecified.
pub fn max_weight_perfect_matching(
    g: &DualGraph,
    w: &EdgeWeights,
) -> Result<(Matching, i64), ExtremalError> {
    if g.is_empty() {
        return Ok((Matching::default(), 0));
    }
    let ids: Vec<NodeId> = g.nodes().collect();
    if ids.len() % 2 == 1 {
        return Err(ExtremalError::Infeasible);
    }
    let local = |v: NodeId| ids.binary_search(&v).expect("node of g");
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    // Perfect matchings all have n/2 edges, so shifting every weight by the
    // same amount keeps the optimum and makes weights nonnegative.
    let floor = edges
        .iter()
        .map(|&(u, v)| w.get(u, v))
        .min()
        .unwrap_or(0)
        .min(0);
    let input = edges
        .iter()
        .map(|&(u, v)| (local(u), local(v), w.get(u, v) - floor))
        .collect();
    let mates = Blossom::new(ids.len(), input, true).solve();
    if mates.iter().any(Option::is_none) {
        return Err(ExtremalError::Infeasible);
    }
    let m = Matching::new(
        mates
            .iter()
            .enumerate()
            .filter_map(|(i, &j)| j.filter(|&j| i < j).map(|j| (ids[i], ids[j]))),
    );
    debug_assert!(m.is_perfect_for(g));
    let total = w.total(&m);
    Ok((m, total))
}

/// A perfect matching of minimum total weight, with that weight.
pub fn min_weight_perfect_matching(
    g: &DualGraph,
    w: &EdgeWeights,
) -> Result<(Matching, i64), ExtremalError> {
    let (m, neg) = max_weight_perfect_matching(g, &w.negated())?;
    Ok((m, -neg))
}

/// Extreme seat outcomes with witness matchings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeatRange {
    pub min: i64,
    pub max: i64,
    pub min_witness: Matching,
    pub max_witness: Matching,
}

/// `(min, max)` of the total weight over all perfect matchings. With 0/1
/// seat weights this is the exact range of seat counts.
pub fn seat_range(g: &DualGraph, w: &EdgeWeights) -> Result<SeatRange, ExtremalError> {
    let (max_witness, max) = max_weight_perfect_matching(g, w)?;
    let (min_witness, min) = min_weight_perfect_matching(g, w)?;
    Ok(SeatRange {
        min,
        max,
        min_witness,
        max_witness,
    })
}
