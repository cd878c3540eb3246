//! Random flow networks built by superposing weighted paths.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{GroundTruth, TruthPath};
use crate::graph::FlowGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenParams {
    pub max_nodes: usize,
    pub max_paths: usize,
    pub max_weight: u64,
    pub max_edges: usize,
    pub max_outflow: u64,
    /// Chance, in percent, of each forward skeleton edge beyond the spine.
    pub density: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_nodes: 8,
            max_paths: 5,
            max_weight: 8,
            max_edges: 12,
            max_outflow: 20,
            density: 35,
        }
    }
}

/// One instance: a random DAG skeleton on `0..n` with the spine `i -> i+1`,
/// a few random-walk paths from `0` to `n-1` with random weights, and the
/// flow they induce. Unused nodes are dropped. Retries until the limits
/// hold.
pub fn random_instance(rng: &mut impl Rng, params: &GenParams, id: &str) -> (FlowGraph, GroundTruth) {
    loop {
        let n = rng.gen_range(2..=params.max_nodes.max(2));
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (u, out) in succ.iter_mut().enumerate() {
            for v in u + 1..n {
                if v == u + 1 || rng.gen_range(0..100) < params.density {
                    out.push(v);
                }
            }
        }
        let count = rng.gen_range(1..=params.max_paths.max(1));
        let mut paths = Vec::with_capacity(count);
        for _ in 0..count {
            let mut nodes = vec![0usize];
            while *nodes.last().unwrap() != n - 1 {
                let at = *nodes.last().unwrap();
                nodes.push(*succ[at].choose(rng).unwrap());
            }
            let weight = rng.gen_range(1..=params.max_weight.max(1));
            paths.push((nodes, weight));
        }
        let total: u64 = paths.iter().map(|p| p.1).sum();
        if total > params.max_outflow {
            continue;
        }
        let mut flow = std::collections::BTreeMap::new();
        for (nodes, w) in &paths {
            for pair in nodes.windows(2) {
                *flow.entry((pair[0], pair[1])).or_insert(0u64) += w;
            }
        }
        if flow.len() > params.max_edges {
            continue;
        }
        let edges: Vec<(u64, u64, u64)> = flow.iter().map(|(&(u, v), &f)| (u as u64, v as u64, f)).collect();
        let mut labels: Vec<u64> = edges.iter().flat_map(|e| [e.0, e.1]).collect();
        labels.sort_unstable();
        labels.dedup();
        let dense = |x: u64| labels.binary_search(&x).unwrap();
        let raw: Vec<(usize, usize, u64)> = edges.iter().map(|&(u, v, f)| (dense(u), dense(v), f)).collect();
        let g = FlowGraph::with_labels(id, labels.clone(), &raw).expect("superposed paths form a flow");
        let truth = GroundTruth {
            graph_id: id.to_string(),
            paths: paths
                .into_iter()
                .map(|(nodes, weight)| TruthPath {
                    weight,
                    nodes: nodes.into_iter().map(|v| v as u64).collect(),
                })
                .collect(),
        };
        return (g, truth);
    }
}

/// `count` instances named `{prefix}{index}` from a fixed seed.
pub fn random_corpus(seed: u64, count: usize, params: &GenParams, prefix: &str) -> Vec<(FlowGraph, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| random_instance(&mut rng, params, &format!("{prefix}{i}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_limits_and_truth_verifies() {
        let params = GenParams::default();
        for (g, truth) in random_corpus(7, 200, &params, "r") {
            assert!(g.num_edges() <= params.max_edges);
            assert!(g.out_flow(g.source()) <= params.max_outflow);
            assert!(g.validate().is_empty());
            truth.resolve(&g).unwrap();
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a: Vec<_> = random_corpus(3, 20, &GenParams::default(), "r")
            .into_iter()
            .map(|x| x.0)
            .collect();
        let b: Vec<_> = random_corpus(3, 20, &GenParams::default(), "r")
            .into_iter()
            .map(|x| x.0)
            .collect();
        assert_eq!(a, b);
    }
}
