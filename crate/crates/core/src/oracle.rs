//! Brute force over all decompositions of small flows.
//!
//! Every flow decomposition is a non-negative integer weight on each
//! source-to-sink route; routes with weight zero are unused. These weight
//! vectors are enumerated exhaustively, and minimum decompositions are the
//! ones with the smallest support. A decomposition that repeats a route is
//! covered by the one that merges the copies, which has the same route set.

use thiserror::Error;

use crate::graph::{contains_subpath, Decomposition, FlowGraph, NodeId, WeightedPath};
use crate::postprocess;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_edges: usize,
    pub max_outflow: u64,
    pub max_states: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_edges: 12,
            max_outflow: 20,
            max_states: 1_000_000,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{edges} edges exceed the limit of {limit}")]
    TooManyEdges { edges: usize, limit: usize },
    #[error("source outflow {flow} exceeds the limit of {limit}")]
    TooMuchFlow { flow: u64, limit: u64 },
    #[error("enumeration exceeded {0} states")]
    StateCap(u64),
}

/// Every decomposition of one graph, as weights over its routes.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub routes: Vec<Vec<NodeId>>,
    pub weights: Vec<Vec<u64>>,
}

impl Enumeration {
    fn decomposition(&self, w: &[u64]) -> Decomposition {
        Decomposition::new(
            w.iter()
                .zip(&self.routes)
                .filter(|(&x, _)| x > 0)
                .map(|(&weight, nodes)| WeightedPath {
                    nodes: nodes.clone(),
                    weight,
                })
                .collect(),
        )
        .canonical()
    }

    pub fn all(&self) -> Vec<Decomposition> {
        self.weights.iter().map(|w| self.decomposition(w)).collect()
    }

    pub fn minimum(&self) -> DecompositionSet {
        let support = |w: &Vec<u64>| w.iter().filter(|&&x| x > 0).count();
        let k = self.weights.iter().map(support).min().unwrap_or(0);
        DecompositionSet {
            k,
            decompositions: self
                .weights
                .iter()
                .filter(|w| support(w) == k)
                .map(|w| self.decomposition(w))
                .collect(),
        }
    }

    /// Whether `path` lies on a used route of every decomposition.
    pub fn in_every(&self, path: &[NodeId]) -> bool {
        let hits: Vec<bool> = self.routes.iter().map(|r| contains_subpath(r, path)).collect();
        self.weights
            .iter()
            .all(|w| w.iter().zip(&hits).any(|(&x, &h)| x > 0 && h))
    }
}

/// All minimum decompositions, each in canonical order, without repeats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionSet {
    pub k: usize,
    pub decompositions: Vec<Decomposition>,
}

impl DecompositionSet {
    pub fn is_safe(&self, path: &[NodeId]) -> bool {
        self.decompositions
            .iter()
            .all(|d| d.paths.iter().any(|p| contains_subpath(&p.nodes, path)))
    }

    /// Maximal safe paths. Safe paths lie inside the paths of any single
    /// decomposition, so the subpaths of the first one are candidates enough.
    pub fn maximal_safe(&self) -> Vec<Vec<NodeId>> {
        let Some(first) = self.decompositions.first() else {
            return Vec::new();
        };
        let mut safe = Vec::new();
        for p in &first.paths {
            let n = p.nodes.len();
            for l in 0..n {
                for r in l + 1..n {
                    let sub = &p.nodes[l..=r];
                    if self.is_safe(sub) {
                        safe.push(sub.to_vec());
                    }
                }
            }
        }
        postprocess(safe)
    }
}

fn all_routes(g: &FlowGraph) -> Vec<Vec<NodeId>> {
    fn go(g: &FlowGraph, stack: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let v = *stack.last().unwrap();
        if v == g.sink() {
            out.push(stack.clone());
            return;
        }
        for &e in g.out_edges(v) {
            stack.push(g.edge(e).head);
            go(g, stack, out);
            stack.pop();
        }
    }
    let mut out = Vec::new();
    go(g, &mut vec![g.source()], &mut out);
    out
}

pub fn enumerate_all_fds(g: &FlowGraph, limits: OracleLimits) -> Result<Enumeration, OracleError> {
    if g.num_edges() > limits.max_edges {
        return Err(OracleError::TooManyEdges {
            edges: g.num_edges(),
            limit: limits.max_edges,
        });
    }
    let flow = g.out_flow(g.source());
    if flow > limits.max_outflow {
        return Err(OracleError::TooMuchFlow {
            flow,
            limit: limits.max_outflow,
        });
    }
    let routes = all_routes(g);
    let route_edges: Vec<Vec<usize>> = routes
        .iter()
        .map(|r| g.path_edges(r).expect("routes are paths"))
        .collect();
    // Edges whose last covering route is `r` must be exactly met once `r` is fixed.
    let mut closes: Vec<Vec<usize>> = vec![Vec::new(); routes.len()];
    for e in 0..g.num_edges() {
        let last = (0..routes.len()).rev().find(|&r| route_edges[r].contains(&e));
        closes[last.expect("every edge lies on a route")].push(e);
    }

    struct State<'a> {
        route_edges: &'a [Vec<usize>],
        closes: &'a [Vec<usize>],
        residual: Vec<u64>,
        current: Vec<u64>,
        found: Vec<Vec<u64>>,
        states: u64,
        cap: u64,
    }

    fn go(s: &mut State, r: usize) -> Result<(), OracleError> {
        s.states += 1;
        if s.states > s.cap {
            return Err(OracleError::StateCap(s.cap));
        }
        if r == s.route_edges.len() {
            s.found.push(s.current.clone());
            return Ok(());
        }
        let top = s.route_edges[r].iter().map(|&e| s.residual[e]).min().unwrap();
        for w in 0..=top {
            for &e in &s.route_edges[r] {
                s.residual[e] -= w;
            }
            if s.closes[r].iter().all(|&e| s.residual[e] == 0) {
                s.current[r] = w;
                go(s, r + 1)?;
            }
            for &e in &s.route_edges[r] {
                s.residual[e] += w;
            }
        }
        s.current[r] = 0;
        Ok(())
    }

    let mut state = State {
        route_edges: &route_edges,
        closes: &closes,
        residual: g.edges().iter().map(|e| e.flow).collect(),
        current: vec![0; routes.len()],
        found: Vec::new(),
        states: 0,
        cap: limits.max_states,
    };
    go(&mut state, 0)?;
    Ok(Enumeration {
        routes,
        weights: state.found,
    })
}

pub fn enumerate_all_mfds(g: &FlowGraph, limits: OracleLimits) -> Result<DecompositionSet, OracleError> {
    Ok(enumerate_all_fds(g, limits)?.minimum())
}

pub fn oracle_safe(g: &FlowGraph, path: &[NodeId], limits: OracleLimits) -> Result<bool, OracleError> {
    Ok(enumerate_all_mfds(g, limits)?.is_safe(path))
}

pub fn oracle_maximal_safe(g: &FlowGraph, limits: OracleLimits) -> Result<Vec<Vec<NodeId>>, OracleError> {
    Ok(enumerate_all_mfds(g, limits)?.maximal_safe())
}

pub fn oracle_fd_safe(g: &FlowGraph, path: &[NodeId], limits: OracleLimits) -> Result<bool, OracleError> {
    Ok(enumerate_all_fds(g, limits)?.in_every(path))
}
