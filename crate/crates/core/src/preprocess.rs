//! Y-to-V contraction and trivial safe paths.
//!
//! A node with a single in-edge `(u, v)` is removed by prepending that edge
//! to each of its out-edges; symmetrically for a single out-edge. Repeating
//! this to a fixpoint leaves every internal node with in- and out-degree at
//! least two. Each contracted edge remembers the original node sequence it
//! stands for. Source-to-sink edges of the result are reported directly
//! as safe and dropped from the residual graph.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::graph::{EdgeId, FlowGraph, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExpandError {
    #[error("edge {0} out of range")]
    UnknownEdge(EdgeId),
    #[error("edge {edge} does not start at node {node}")]
    Disconnected { edge: EdgeId, node: NodeId },
    #[error("node {0} out of range")]
    UnknownNode(NodeId),
}

/// The part of a contracted graph that still needs solving.
#[derive(Debug, Clone)]
pub struct Residual {
    /// Dense multigraph; its labels are original node ids.
    pub graph: FlowGraph,
    /// Residual node -> original node.
    pub node_origin: Vec<NodeId>,
    /// Residual edge -> original node sequence it replaces.
    pub expansions: Vec<Vec<NodeId>>,
}

impl Residual {
    pub fn expand_route(&self, route: &[EdgeId]) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = Vec::new();
        for &e in route {
            let exp = &self.expansions[e];
            if out.is_empty() {
                out.extend_from_slice(exp);
            } else {
                out.extend_from_slice(&exp[1..]);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ContractedGraph {
    trivial: Vec<Vec<NodeId>>,
    residual: Option<Residual>,
}

impl ContractedGraph {
    /// Original node sequences of the removed source-to-sink edges.
    pub fn trivial_safe(&self) -> &[Vec<NodeId>] {
        &self.trivial
    }

    pub fn residual(&self) -> Option<&Residual> {
        self.residual.as_ref()
    }

    /// True when nothing remains after contraction: the flow has a unique
    /// decomposition, given by the trivial paths.
    pub fn is_funnel(&self) -> bool {
        self.residual.is_none()
    }

    /// Expands a residual path, given as a start node and a chain of edges,
    /// into original coordinates. An empty chain yields the start node.
    pub fn expand_path(&self, start: NodeId, edges: &[EdgeId]) -> Result<Vec<NodeId>, ExpandError> {
        let r = self.residual.as_ref().ok_or(ExpandError::UnknownNode(start))?;
        if start >= r.graph.num_nodes() {
            return Err(ExpandError::UnknownNode(start));
        }
        let mut at = start;
        for &e in edges {
            if e >= r.graph.num_edges() {
                return Err(ExpandError::UnknownEdge(e));
            }
            if r.graph.edge(e).tail != at {
                return Err(ExpandError::Disconnected { edge: e, node: at });
            }
            at = r.graph.edge(e).head;
        }
        if edges.is_empty() {
            return Ok(vec![r.node_origin[start]]);
        }
        Ok(r.expand_route(edges))
    }
}

#[derive(Debug, Clone)]
struct WorkEdge {
    tail: NodeId,
    head: NodeId,
    flow: u64,
    expansion: Vec<NodeId>,
}

/// Contracts `g` to its Y-to-V fixpoint and splits off source-to-sink edges.
pub fn y_to_v_contract(g: &FlowGraph) -> ContractedGraph {
    let n = g.num_nodes();
    let (s, t) = (g.source(), g.sink());
    let mut edges: Vec<Option<WorkEdge>> = g
        .edges()
        .iter()
        .map(|e| {
            Some(WorkEdge {
                tail: e.tail,
                head: e.head,
                flow: e.flow,
                expansion: vec![e.tail, e.head],
            })
        })
        .collect();
    let mut outs: Vec<Vec<EdgeId>> = (0..n).map(|v| g.out_edges(v).to_vec()).collect();
    let mut ins: Vec<Vec<EdgeId>> = (0..n).map(|v| g.in_edges(v).to_vec()).collect();

    let mut changed = true;
    while changed {
        changed = false;
        for v in 0..n {
            if v == s || v == t || (ins[v].is_empty() && outs[v].is_empty()) {
                continue;
            }
            if ins[v].len() == 1 {
                let ein = ins[v][0];
                let front = edges[ein].take().unwrap();
                outs[front.tail].retain(|&e| e != ein);
                for eout in std::mem::take(&mut outs[v]) {
                    let back = edges[eout].take().unwrap();
                    ins[back.head].retain(|&e| e != eout);
                    let mut expansion = front.expansion.clone();
                    expansion.extend_from_slice(&back.expansion[1..]);
                    let id = edges.len();
                    edges.push(Some(WorkEdge {
                        tail: front.tail,
                        head: back.head,
                        flow: back.flow,
                        expansion,
                    }));
                    outs[front.tail].push(id);
                    ins[back.head].push(id);
                }
                ins[v].clear();
                changed = true;
            } else if outs[v].len() == 1 {
                let eout = outs[v][0];
                let back = edges[eout].take().unwrap();
                ins[back.head].retain(|&e| e != eout);
                for ein in std::mem::take(&mut ins[v]) {
                    let front = edges[ein].take().unwrap();
                    outs[front.tail].retain(|&e| e != ein);
                    let mut expansion = front.expansion.clone();
                    expansion.extend_from_slice(&back.expansion[1..]);
                    let id = edges.len();
                    edges.push(Some(WorkEdge {
                        tail: front.tail,
                        head: back.head,
                        flow: front.flow,
                        expansion,
                    }));
                    outs[front.tail].push(id);
                    ins[back.head].push(id);
                }
                outs[v].clear();
                changed = true;
            }
        }
    }

    let mut trivial = Vec::new();
    let mut remaining = Vec::new();
    for e in edges.into_iter().flatten() {
        if e.tail == s && e.head == t {
            trivial.push(e.expansion);
        } else {
            remaining.push(e);
        }
    }
    if remaining.is_empty() {
        return ContractedGraph {
            trivial,
            residual: None,
        };
    }
    let mut index: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    index.insert(s, 0);
    index.insert(t, 0);
    for e in &remaining {
        index.insert(e.tail, 0);
        index.insert(e.head, 0);
    }
    let node_origin: Vec<NodeId> = index.keys().copied().collect();
    for (i, v) in node_origin.iter().enumerate() {
        index.insert(*v, i);
    }
    let raw: Vec<(NodeId, NodeId, u64)> = remaining
        .iter()
        .map(|e| (index[&e.tail], index[&e.head], e.flow))
        .collect();
    let labels = node_origin.iter().map(|&v| v as u64).collect();
    let graph = FlowGraph::multigraph(format!("{}#residual", g.id()), labels, &raw)
        .expect("contraction preserves flow-network invariants");
    ContractedGraph {
        trivial,
        residual: Some(Residual {
            graph,
            node_origin,
            expansions: remaining.into_iter().map(|e| e.expansion).collect(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn single_path_is_funnel() {
        let g = FlowGraph::new("p", 3, &[(0, 1, 5), (1, 2, 5)]).unwrap();
        let c = y_to_v_contract(&g);
        assert!(c.is_funnel());
        assert_eq!(c.trivial_safe(), &[vec![0, 1, 2]]);
    }

    #[test]
    fn diamond_is_funnel_with_two_unitigs() {
        let g = FlowGraph::new("d", 4, &[(0, 1, 3), (0, 2, 4), (1, 3, 3), (2, 3, 4)]).unwrap();
        let c = y_to_v_contract(&g);
        assert!(c.is_funnel());
        let got: BTreeSet<_> = c.trivial_safe().iter().cloned().collect();
        assert_eq!(got, BTreeSet::from([vec![0, 1, 3], vec![0, 2, 3]]));
    }

    /// s=0, x=1, y=2, b=3, z=4, w=5, t=6; b has in- and out-degree two.
    fn two_by_two() -> FlowGraph {
        FlowGraph::new(
            "b",
            7,
            &[
                (0, 1, 3),
                (0, 2, 4),
                (1, 3, 3),
                (2, 3, 4),
                (3, 4, 2),
                (3, 5, 5),
                (4, 6, 2),
                (5, 6, 5),
            ],
        )
        .unwrap()
    }

    /// Maximal chains through nodes with in- and out-degree one, computed
    /// directly on the original graph.
    fn unitig_chains(g: &FlowGraph) -> BTreeSet<Vec<NodeId>> {
        let simple =
            |v: NodeId| v != g.source() && v != g.sink() && g.in_edges(v).len() == 1 && g.out_edges(v).len() == 1;
        let mut out = BTreeSet::new();
        for e in g.edges() {
            if simple(e.tail) {
                continue;
            }
            let mut chain = vec![e.tail, e.head];
            while simple(*chain.last().unwrap()) {
                let v = *chain.last().unwrap();
                chain.push(g.edge(g.out_edges(v)[0]).head);
            }
            out.insert(chain);
        }
        out
    }

    #[test]
    fn branching_node_survives() {
        let g = two_by_two();
        let c = y_to_v_contract(&g);
        assert!(!c.is_funnel());
        assert!(c.trivial_safe().is_empty());
        let r = c.residual().unwrap();
        assert_eq!(r.node_origin, vec![0, 3, 6]);
        let got: BTreeSet<_> = r.expansions.iter().cloned().collect();
        assert_eq!(got, unitig_chains(&g));
    }

    #[test]
    fn flows_follow_expansions() {
        let g = two_by_two();
        let c = y_to_v_contract(&g);
        let r = c.residual().unwrap();
        for (e, exp) in r.expansions.iter().enumerate() {
            let last = g.edge_between(exp[exp.len() - 2], exp[exp.len() - 1]).unwrap();
            let first = g.edge_between(exp[0], exp[1]).unwrap();
            let f = r.graph.edge(e).flow;
            assert!(f == g.edge(last).flow || f == g.edge(first).flow);
        }
        assert!(r.graph.validate().is_empty());
    }

    #[test]
    fn contraction_is_idempotent() {
        let g = two_by_two();
        let c = y_to_v_contract(&g);
        let r = c.residual().unwrap();
        let again = y_to_v_contract(&r.graph);
        let r2 = again.residual().unwrap();
        assert_eq!(r2.graph.edges(), r.graph.edges());
        assert!(r2.expansions.iter().all(|e| e.len() == 2));
    }

    #[test]
    fn expand_paths() {
        let c = y_to_v_contract(&two_by_two());
        let r = c.residual().unwrap();
        let e0 = r.graph.out_edges(r.graph.source())[0];
        let e1 = r.graph.out_edges(1)[0];
        let whole = c.expand_path(0, &[e0, e1]).unwrap();
        let mut expected = r.expansions[e0].clone();
        expected.extend_from_slice(&r.expansions[e1][1..]);
        assert_eq!(whole, expected);
        assert_eq!(c.expand_path(1, &[]).unwrap(), vec![3]);
        assert!(c.expand_path(1, &[e0]).is_err());
    }

    #[test]
    fn y_shape_duplicates_prefix() {
        // s -> a (in-degree 1) fans out to b and c, which both reach t.
        let g = FlowGraph::new("y", 5, &[(0, 1, 5), (1, 2, 2), (1, 3, 3), (2, 4, 2), (3, 4, 3)]).unwrap();
        let c = y_to_v_contract(&g);
        assert!(c.is_funnel());
        let got: BTreeSet<_> = c.trivial_safe().iter().cloned().collect();
        assert_eq!(got, BTreeSet::from([vec![0, 1, 2, 4], vec![0, 1, 3, 4]]));
    }
}
