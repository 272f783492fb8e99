//! Counting, enumerating, sampling and optimizing perfect matchings of
//! district dual graphs, plus a recombination chain for districting
//! ensembles.

mod blossom;
pub mod election;
pub mod embed;
pub mod enumerate;
pub mod extremal;
pub mod fkt;
pub mod generators;
pub mod graph;
pub mod io;
pub mod linalg;
pub mod nodeset;
pub mod recom;
pub mod report;
pub mod sample;

pub use election::VoteTally;
pub use embed::{embed_from_coordinates, verify_embedding, Embedding};
pub use enumerate::{count_by_enumeration, find_all_matchings, stream_matchings};
pub use extremal::{max_weight_perfect_matching, seat_range, EdgeWeights};
pub use fkt::{count_matchings_fkt, PlanarCounter};
pub use graph::{BigCount, DualGraph, GraphError, Matching, Node, NodeId, Point};
pub use io::{load_graph, parse_graph, RunManifest};
pub use recom::{district_dual_graph, run_chain, ChainConfig, Partition, PlanRecord};
pub use report::{matching_ensemble_report, MatchingReport, MatchingSource};
pub use sample::{required_sample_size, sample_matching, Sampler};
