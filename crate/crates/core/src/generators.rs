//! Graph builders for tests, benchmarks and demonstrations.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::embed::{edges_conflict, node_on_edge};
use crate::graph::{DualGraph, Node, Point};

/// Label of grid cell `(row, col)`; zero padding keeps row-major order
/// lexicographic.
pub fn grid_label(row: usize, col: usize) -> String {
    format!("r{row:02}c{col:02}")
}

/// `rows x cols` grid with unit populations, drawn at integer coordinates.
pub fn grid_graph(rows: usize, cols: usize) -> DualGraph {
    grid_with_extra(rows, cols, &[])
}

/// Square grid plus a diagonal from each corner to its diagonal neighbor.
pub fn grid_with_corner_diagonals(side: usize) -> DualGraph {
    let last = side - 1;
    let extra = [
        ((0, 0), (1, 1)),
        ((0, last), (1, last - 1)),
        ((last, 0), (last - 1, 1)),
        ((last, last), (last - 1, last - 1)),
    ];
    grid_with_extra(side, side, &extra)
}

/// Extra edge between two `(row, col)` cells.
type CellPair = ((usize, usize), (usize, usize));

fn grid_with_extra(rows: usize, cols: usize, extra: &[CellPair]) -> DualGraph {
    let mut nodes = Vec::with_capacity(rows * cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            nodes.push(
                Node::new(grid_label(r, c))
                    .at(c as f64, r as f64)
                    .with_population(1),
            );
            if c + 1 < cols {
                edges.push((grid_label(r, c), grid_label(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((grid_label(r, c), grid_label(r + 1, c)));
            }
        }
    }
    for &((r1, c1), (r2, c2)) in extra {
        edges.push((grid_label(r1, c1), grid_label(r2, c2)));
    }
    DualGraph::new(nodes, &edges).expect("grid is well formed")
}

/// Random straight-line planar graph on `n` points in the unit square.
///
/// Candidate edges are visited in random order and each is kept with
/// probability `density` when it crosses nothing kept so far.
pub fn random_planar_graph<R: Rng + ?Sized>(rng: &mut R, n: usize, density: f64) -> DualGraph {
    let points: Vec<Point> = (0..n)
        .map(|_| Point::new(rng.random::<f64>(), rng.random::<f64>()))
        .collect();
    let mut candidates: Vec<(usize, usize)> = (0..n)
        .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
        .collect();
    candidates.shuffle(rng);
    let mut kept: Vec<(usize, usize)> = Vec::new();
    for cand in candidates {
        if !rng.random_bool(density.clamp(0.0, 1.0)) {
            continue;
        }
        let blocked = (0..n).any(|w| node_on_edge(&points, cand, w))
            || kept.iter().any(|&e| edges_conflict(&points, cand, e));
        if !blocked {
            kept.push(cand);
        }
    }
    let label = |i: usize| format!("v{i:02}");
    let nodes = points
        .iter()
        .enumerate()
        .map(|(i, p)| Node::new(label(i)).at(p.x, p.y).with_population(1))
        .collect();
    let edges: Vec<(String, String)> = kept.iter().map(|&(a, b)| (label(a), label(b))).collect();
    DualGraph::new(nodes, &edges).expect("generated graph is simple")
}
