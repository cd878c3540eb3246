//! Safety for all flow decompositions via excess flow.
//!
//! The excess flow of a path is the flow on its first edge minus the flow
//! leaving its internal nodes along edges not on the path. A path is a
//! subpath of some path in every flow decomposition iff its excess is
//! positive.

use std::collections::BTreeSet;

use crate::graph::{FlowGraph, NodeId, PathError, Route};
use crate::postprocess;

/// Excess flow of `path`, which must be a path with at least one edge.
pub fn excess_flow(g: &FlowGraph, path: &[NodeId]) -> Result<i64, PathError> {
    let edges = g.path_edges(path)?;
    let mut excess = g.edge(edges[0]).flow as i64;
    for (i, &v) in path.iter().enumerate().take(path.len() - 1).skip(1) {
        excess -= g.out_flow(v) as i64 - g.edge(edges[i]).flow as i64;
    }
    Ok(excess)
}

pub fn is_fd_safe(g: &FlowGraph, path: &[NodeId]) -> Result<bool, PathError> {
    Ok(excess_flow(g, path)? > 0)
}

/// Sliding window `[left, right]` (inclusive node positions) over a fixed
/// path, keeping its excess flow up to date in O(1) per move.
#[derive(Debug, Clone)]
pub struct ExcessWindow<'a> {
    path: &'a [NodeId],
    edge_flow: Vec<i64>,
    out_flow: Vec<i64>,
    left: usize,
    right: usize,
    excess: i64,
}

impl<'a> ExcessWindow<'a> {
    /// Window over the single edge starting at position `left`.
    pub fn new(g: &FlowGraph, path: &'a [NodeId], left: usize) -> Result<Self, PathError> {
        let edges = g.path_edges(path)?;
        let edge_flow: Vec<i64> = edges.iter().map(|&e| g.edge(e).flow as i64).collect();
        let out_flow = path.iter().map(|&v| g.out_flow(v) as i64).collect();
        assert!(left + 1 < path.len(), "window start {left} has no edge");
        Ok(ExcessWindow {
            path,
            excess: edge_flow[left],
            edge_flow,
            out_flow,
            left,
            right: left + 1,
        })
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn excess(&self) -> i64 {
        self.excess
    }

    pub fn nodes(&self) -> &'a [NodeId] {
        &self.path[self.left..=self.right]
    }

    /// Excess the window would have after [`Self::extend_right`].
    pub fn peek_right(&self) -> Option<i64> {
        (self.right + 1 < self.path.len())
            .then(|| self.excess - (self.out_flow[self.right] - self.edge_flow[self.right]))
    }

    pub fn extend_right(&mut self) -> bool {
        match self.peek_right() {
            Some(x) => {
                self.excess = x;
                self.right += 1;
                true
            }
            None => false,
        }
    }

    /// Drops the first node; refuses to shrink below one edge.
    pub fn advance_left(&mut self) -> bool {
        if self.left + 1 >= self.right {
            return false;
        }
        self.excess += self.out_flow[self.left + 1] - self.edge_flow[self.left];
        self.left += 1;
        true
    }
}

/// Maximal windows of `path` with positive excess, by the two-pointer
/// sweep. Windows are `(left, right)` inclusive node positions.
pub fn maximal_fd_safe_windows(g: &FlowGraph, path: &[NodeId]) -> Result<Vec<(usize, usize)>, PathError> {
    let mut w = ExcessWindow::new(g, path, 0)?;
    let mut out = Vec::new();
    loop {
        while matches!(w.peek_right(), Some(x) if x > 0) {
            w.extend_right();
        }
        out.push((w.left(), w.right()));
        if !w.extend_right() {
            return Ok(out);
        }
        while w.excess() <= 0 {
            let moved = w.advance_left();
            debug_assert!(moved, "single edges have positive excess");
        }
    }
}

/// Repeatedly peels the widest source-to-sink path. Works on multigraphs.
pub fn greedy_decomposition(g: &FlowGraph) -> Vec<Route> {
    let mut residual: Vec<u64> = g.edges().iter().map(|e| e.flow).collect();
    let mut routes = Vec::new();
    loop {
        let mut best = vec![0u64; g.num_nodes()];
        let mut pred: Vec<Option<usize>> = vec![None; g.num_nodes()];
        best[g.source()] = u64::MAX;
        for &v in g.topological_order() {
            if best[v] == 0 {
                continue;
            }
            for &e in g.out_edges(v) {
                let width = best[v].min(residual[e]);
                let h = g.edge(e).head;
                if width > best[h] {
                    best[h] = width;
                    pred[h] = Some(e);
                }
            }
        }
        let width = best[g.sink()];
        if width == 0 {
            break;
        }
        let mut edges = Vec::new();
        let mut at = g.sink();
        while let Some(e) = pred[at] {
            edges.push(e);
            residual[e] -= width;
            at = g.edge(e).tail;
        }
        edges.reverse();
        routes.push(Route { edges, weight: width });
    }
    debug_assert!(residual.iter().all(|&r| r == 0));
    routes
}

/// All maximal paths that are safe for every flow decomposition, from a
/// two-pointer sweep over the paths of a greedy decomposition.
pub fn safe_flow_maximal_paths(g: &FlowGraph) -> Vec<Vec<NodeId>> {
    let mut found = BTreeSet::new();
    for route in greedy_decomposition(g) {
        let nodes = g.route_nodes(&route.edges);
        for (l, r) in maximal_fd_safe_windows(g, &nodes).expect("greedy paths are paths") {
            found.insert(nodes[l..=r].to_vec());
        }
    }
    postprocess(found.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{balanced_two_by_two, two_mfds};

    /// s=0, a=1, b=2, t=3: s->a 5, a->t 3, a->b 2, b->t 2.
    fn fork() -> FlowGraph {
        FlowGraph::new("f", 4, &[(0, 1, 5), (1, 3, 3), (1, 2, 2), (2, 3, 2)]).unwrap()
    }

    #[test]
    fn excess_examples() {
        let g = FlowGraph::new("e", 2, &[(0, 1, 7)]).unwrap();
        assert_eq!(excess_flow(&g, &[0, 1]).unwrap(), 7);
        assert_eq!(excess_flow(&fork(), &[0, 1, 3]).unwrap(), 3);
        assert_eq!(excess_flow(&fork(), &[0, 1, 2, 3]).unwrap(), 2);
    }

    #[test]
    fn two_mfds_excess_values() {
        let g = two_mfds();
        // s a b c d = 0 1 2 3 4
        assert_eq!(excess_flow(&g, &[0, 1, 2]).unwrap(), 3);
        assert_eq!(excess_flow(&g, &[0, 1, 2, 3]).unwrap(), -6);
        assert_eq!(excess_flow(&g, &[0, 1, 2, 3, 4]).unwrap(), -6);
        assert!(!is_fd_safe(&g, &[0, 1, 2, 3]).unwrap());
        assert!(is_fd_safe(&g, &[2, 3, 4]).unwrap());
    }

    #[test]
    fn zero_edge_path_rejected() {
        assert_eq!(excess_flow(&fork(), &[0]), Err(PathError::NoEdges));
        assert!(excess_flow(&fork(), &[0, 2]).is_err());
    }

    #[test]
    fn window_moves_match_recomputation() {
        let g = two_mfds();
        let path = [0, 1, 2, 3, 4, 5, 6, 7];
        let mut w = ExcessWindow::new(&g, &path, 0).unwrap();
        while w.extend_right() {
            assert_eq!(w.excess(), excess_flow(&g, w.nodes()).unwrap());
        }
        while w.advance_left() {
            assert_eq!(w.excess(), excess_flow(&g, w.nodes()).unwrap());
        }
        assert_eq!(w.nodes(), &[6, 7]);
    }

    #[test]
    fn safe_flow_on_two_mfds() {
        let paths = safe_flow_maximal_paths(&two_mfds());
        assert!(paths.contains(&vec![0, 1, 2]));
        assert!(paths.contains(&vec![2, 3, 4]));
        assert!(!paths.iter().any(|p| crate::graph::contains_subpath(p, &[0, 1, 2, 3])));
    }

    #[test]
    fn safe_flow_on_funnel() {
        let g = FlowGraph::new("d", 4, &[(0, 1, 3), (0, 2, 4), (1, 3, 3), (2, 3, 4)]).unwrap();
        assert_eq!(safe_flow_maximal_paths(&g), vec![vec![0, 1, 3], vec![0, 2, 3]]);
    }

    #[test]
    fn branching_node_with_balanced_flows() {
        let got = safe_flow_maximal_paths(&balanced_two_by_two());
        assert_eq!(got, vec![vec![0, 1, 3], vec![0, 2, 3], vec![3, 4, 6], vec![3, 5, 6]]);
    }

    #[test]
    fn greedy_peels_widest_first() {
        let routes = greedy_decomposition(&fork());
        assert_eq!(routes[0].weight, 3);
        assert!(crate::graph::verify_routes(&fork(), &routes).is_ok());
    }
}
