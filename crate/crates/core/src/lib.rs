//! Maximal safe paths for minimum flow decompositions of DAG flows.

pub mod corpus;
pub mod engine;
pub mod fd_safety;
pub mod fixtures;
pub mod generate;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod preprocess;

pub use graph::{Decomposition, FlowGraph, NodeId, Route, WeightedPath};

/// Removes duplicates and any path that is a contiguous piece of another,
/// then sorts by first node, length descending, then lexicographically.
pub fn postprocess(mut paths: Vec<Vec<NodeId>>) -> Vec<Vec<NodeId>> {
    paths.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    paths.dedup();
    let mut kept: Vec<Vec<NodeId>> = Vec::with_capacity(paths.len());
    for p in paths {
        if !kept.iter().any(|k| graph::contains_subpath(k, &p)) {
            kept.push(p);
        }
    }
    kept.sort_by(|a, b| {
        a.first()
            .cmp(&b.first())
            .then_with(|| b.len().cmp(&a.len()))
            .then_with(|| a.cmp(b))
    });
    kept
}
