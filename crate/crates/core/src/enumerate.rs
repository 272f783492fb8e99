//! Exhaustive perfect-matching generation by prune-and-choose.
//!
//! Each step first forces the pair of the first degree-one node, repeating
//! until none is left; then abandons the branch if some component has an odd
//! number of nodes; otherwise it branches on the first node of minimum degree
//! paired with each of its neighbors in ascending order. "First" always means
//! smallest index in the original canonical order, so the output sequence is
//! deterministic. An empty graph has exactly one (empty) matching.

use thiserror::Error;

use crate::graph::{BigCount, DualGraph, HostData, Matching, NodeId};
use crate::nodeset::NodeSet;

/// A visitor stopped the stream early.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("visitor failed after {visited} matchings: {source}")]
pub struct StreamError<E: std::error::Error + 'static> {
    /// Matchings fully processed before the failing one.
    pub visited: u64,
    #[source]
    pub source: E,
}

struct Search<'h, F> {
    host: &'h HostData,
    chosen: Vec<(usize, usize)>,
    leaf: F,
}

impl<F, E> Search<'_, F>
where
    F: FnMut(&[(usize, usize)]) -> Result<(), E>,
{
    fn run(&mut self, mut alive: NodeSet) -> Result<(), E> {
        let depth = self.chosen.len();
        let result = self.descend(&mut alive);
        self.chosen.truncate(depth);
        result
    }

    fn descend(&mut self, alive: &mut NodeSet) -> Result<(), E> {
        let host = self.host;
        loop {
            if alive.is_empty() {
                return (self.leaf)(&self.chosen);
            }
            let leaf = alive.iter().find(|&v| host.degree_in(v, alive) == 1);
            match leaf {
                Some(u) => {
                    let w = host.adj[u]
                        .iter()
                        .copied()
                        .find(|&w| alive.contains(w))
                        .expect("degree-one node has a neighbor");
                    self.chosen.push((u, w));
                    alive.remove(u);
                    alive.remove(w);
                }
                None => break,
            }
        }
        if host.has_odd_component(alive) {
            return Ok(());
        }
        let u = alive
            .iter()
            .min_by_key(|&v| (host.degree_in(v, alive), v))
            .expect("nonempty");
        for &w in &host.adj[u] {
            if !alive.contains(w) {
                continue;
            }
            let mut rest = alive.clone();
            rest.remove(u);
            rest.remove(w);
            self.chosen.push((u, w));
            self.run(rest)?;
            self.chosen.pop();
        }
        Ok(())
    }
}

fn search<E>(g: &DualGraph, leaf: impl FnMut(&[(usize, usize)]) -> Result<(), E>) -> Result<(), E> {
    let mut s = Search {
        host: g.host(),
        chosen: Vec::with_capacity(g.node_count() / 2),
        leaf,
    };
    s.run(g.node_set().clone())
}

fn to_matching(pairs: &[(usize, usize)]) -> Matching {
    Matching::new(pairs.iter().map(|&(u, v)| (NodeId(u), NodeId(v))))
}

/// Applies `visit` to every perfect matching of `g` exactly once, in the
/// same order as [`find_all_matchings`], and returns how many were visited.
pub fn stream_matchings<E>(
    g: &DualGraph,
    mut visit: impl FnMut(&Matching) -> Result<(), E>,
) -> Result<u64, StreamError<E>>
where
    E: std::error::Error + 'static,
{
    let mut visited = 0u64;
    search(g, |pairs| {
        visit(&to_matching(pairs))?;
        visited += 1;
        Ok(())
    })
    .map_err(|source| StreamError { visited, source })?;
    Ok(visited)
}

/// Every perfect matching of `g`. Holds the whole set in memory; prefer
/// [`stream_matchings`] beyond a few million matchings.
pub fn find_all_matchings(g: &DualGraph) -> Vec<Matching> {
    let mut out = Vec::new();
    let _ = search::<std::convert::Infallible>(g, |pairs| {
        out.push(to_matching(pairs));
        Ok(())
    });
    out
}

/// Number of perfect matchings, counted without storing them.
pub fn count_by_enumeration(g: &DualGraph) -> BigCount {
    let mut n = 0u64;
    let _ = search::<std::convert::Infallible>(g, |_| {
        n += 1;
        Ok(())
    });
    BigCount::from(n)
}
