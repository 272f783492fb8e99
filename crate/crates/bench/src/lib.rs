//! Shared workloads for the benchmarks.

use nestmatch::extremal::EdgeWeights;
use nestmatch::generators::grid_graph;
use nestmatch::recom::Partition;
use nestmatch::DualGraph;

/// `side` x `side` unit grid split into `side` column districts.
pub fn column_plan(side: usize, tol: f64) -> Partition {
    Partition::from_fn(grid_graph(side, side), side as u32, tol, |v| {
        (v.index() % side) as u32 + 1
    })
    .expect("columns are balanced and contiguous")
}

/// Deterministic weights in `-5..=5` on every edge.
pub fn patterned_weights(g: &DualGraph) -> EdgeWeights {
    let mut w = EdgeWeights::new();
    for (i, (u, v)) in g.edges().enumerate() {
        w.set(g, u, v, (i * 7 % 11) as i64 - 5).expect("edge of g");
    }
    w
}
