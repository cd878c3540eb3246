//! Flow networks on DAGs, weighted paths and decompositions.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub tail: NodeId,
    pub head: NodeId,
    pub flow: u64,
}

/// A structural problem found while validating a flow network. Nodes are
/// reported by their external label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoEdges,
    NodeOutOfRange { node: usize },
    SelfLoop { node: u64 },
    ParallelEdge { tail: u64, head: u64 },
    ZeroFlow { tail: u64, head: u64 },
    Cycle,
    NoSource,
    MultipleSources(Vec<u64>),
    NoSink,
    MultipleSinks(Vec<u64>),
    Conservation { node: u64, inflow: u64, outflow: u64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoEdges => write!(f, "graph has no edges"),
            Violation::NodeOutOfRange { node } => write!(f, "edge endpoint {node} out of range"),
            Violation::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Violation::ParallelEdge { tail, head } => {
                write!(f, "parallel edges {tail} -> {head}")
            }
            Violation::ZeroFlow { tail, head } => write!(f, "edge {tail} -> {head} has zero flow"),
            Violation::Cycle => write!(f, "graph is not acyclic"),
            Violation::NoSource => write!(f, "no node with in-degree 0"),
            Violation::MultipleSources(v) => write!(f, "multiple sources {v:?}"),
            Violation::NoSink => write!(f, "no node with out-degree 0"),
            Violation::MultipleSinks(v) => write!(f, "multiple sinks {v:?}"),
            Violation::Conservation { node, inflow, outflow } => write!(
                f,
                "flow conservation violated at node {node} (in {inflow}, out {outflow})"
            ),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid graph {graph_id}: {}", render_violations(.violations))]
pub struct InvalidGraph {
    pub graph_id: String,
    pub violations: Vec<Violation>,
}

fn render_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("path has no edges")]
    NoEdges,
    #[error("({0}, {1}) is not an edge of the graph")]
    MissingEdge(NodeId, NodeId),
    #[error("path repeats node {0}")]
    RepeatedNode(NodeId),
    #[error("path does not run from source to sink")]
    NotSourceToSink,
}

/// Checks every flow-network invariant over a raw edge list. `labels[v]` is
/// the external id of dense node `v`.
pub fn check_network(labels: &[u64], edges: &[Edge], allow_parallel: bool) -> Vec<Violation> {
    let n = labels.len();
    let mut out = Vec::new();
    if edges.is_empty() {
        out.push(Violation::NoEdges);
        return out;
    }
    for e in edges {
        for v in [e.tail, e.head] {
            if v >= n {
                out.push(Violation::NodeOutOfRange { node: v });
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    let mut seen = BTreeSet::new();
    for e in edges {
        if e.tail == e.head {
            out.push(Violation::SelfLoop { node: labels[e.tail] });
        }
        if e.flow == 0 {
            out.push(Violation::ZeroFlow {
                tail: labels[e.tail],
                head: labels[e.head],
            });
        }
        if !seen.insert((e.tail, e.head)) && !allow_parallel {
            out.push(Violation::ParallelEdge {
                tail: labels[e.tail],
                head: labels[e.head],
            });
        }
    }
    if topological_sort(n, edges).is_none() {
        out.push(Violation::Cycle);
    }
    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    let mut inflow = vec![0u64; n];
    let mut outflow = vec![0u64; n];
    for e in edges {
        outdeg[e.tail] += 1;
        indeg[e.head] += 1;
        outflow[e.tail] += e.flow;
        inflow[e.head] += e.flow;
    }
    let sources: Vec<NodeId> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let sinks: Vec<NodeId> = (0..n).filter(|&v| outdeg[v] == 0).collect();
    match sources.len() {
        0 => out.push(Violation::NoSource),
        1 => {}
        _ => out.push(Violation::MultipleSources(sources.iter().map(|&v| labels[v]).collect())),
    }
    match sinks.len() {
        0 => out.push(Violation::NoSink),
        1 => {}
        _ => out.push(Violation::MultipleSinks(sinks.iter().map(|&v| labels[v]).collect())),
    }
    for v in 0..n {
        if indeg[v] > 0 && outdeg[v] > 0 && inflow[v] != outflow[v] {
            out.push(Violation::Conservation {
                node: labels[v],
                inflow: inflow[v],
                outflow: outflow[v],
            });
        }
    }
    out
}

/// Kahn's algorithm with ties broken by ascending node id. `None` on a cycle.
pub fn topological_sort(num_nodes: usize, edges: &[Edge]) -> Option<Vec<NodeId>> {
    let mut indeg = vec![0usize; num_nodes];
    let mut adj = vec![Vec::new(); num_nodes];
    for e in edges {
        indeg[e.head] += 1;
        adj[e.tail].push(e.head);
    }
    let mut heap: BinaryHeap<Reverse<NodeId>> = (0..num_nodes).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(num_nodes);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(v);
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                heap.push(Reverse(w));
            }
        }
    }
    (order.len() == num_nodes).then_some(order)
}

/// A validated flow network: a DAG with a unique source and sink, positive
/// integer flows and conservation at every internal node.
///
/// Edges are addressed by [`EdgeId`]. Graphs read from files never carry
/// parallel edges; contracted graphs built with [`FlowGraph::multigraph`]
/// may.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowGraph {
    id: String,
    labels: Vec<u64>,
    edges: Vec<Edge>,
    source: NodeId,
    sink: NodeId,
    out_edges: Vec<Vec<EdgeId>>,
    in_edges: Vec<Vec<EdgeId>>,
    order: Vec<NodeId>,
    rank: Vec<usize>,
}

impl FlowGraph {
    /// Builds a graph over nodes `0..num_nodes` labelled by their own index.
    pub fn new(id: impl Into<String>, num_nodes: usize, edges: &[(NodeId, NodeId, u64)]) -> Result<Self, InvalidGraph> {
        Self::with_labels(id, (0..num_nodes as u64).collect(), edges)
    }

    pub fn with_labels(
        id: impl Into<String>,
        labels: Vec<u64>,
        edges: &[(NodeId, NodeId, u64)],
    ) -> Result<Self, InvalidGraph> {
        Self::build(id.into(), labels, edges, false)
    }

    /// Like [`FlowGraph::with_labels`] but admits parallel edges.
    pub fn multigraph(
        id: impl Into<String>,
        labels: Vec<u64>,
        edges: &[(NodeId, NodeId, u64)],
    ) -> Result<Self, InvalidGraph> {
        Self::build(id.into(), labels, edges, true)
    }

    fn build(
        id: String,
        labels: Vec<u64>,
        raw: &[(NodeId, NodeId, u64)],
        allow_parallel: bool,
    ) -> Result<Self, InvalidGraph> {
        let edges: Vec<Edge> = raw
            .iter()
            .map(|&(tail, head, flow)| Edge { tail, head, flow })
            .collect();
        let violations = check_network(&labels, &edges, allow_parallel);
        if !violations.is_empty() {
            return Err(InvalidGraph {
                graph_id: id,
                violations,
            });
        }
        let n = labels.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        for (i, e) in edges.iter().enumerate() {
            out_edges[e.tail].push(i);
            in_edges[e.head].push(i);
        }
        let order = topological_sort(n, &edges).expect("checked acyclic");
        let mut rank = vec![0; n];
        for (i, &v) in order.iter().enumerate() {
            rank[v] = i;
        }
        let source = (0..n).find(|&v| in_edges[v].is_empty()).unwrap();
        let sink = (0..n).find(|&v| out_edges[v].is_empty()).unwrap();
        Ok(FlowGraph {
            id,
            labels,
            edges,
            source,
            sink,
            out_edges,
            in_edges,
            order,
            rank,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn out_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.out_edges[v]
    }

    pub fn in_edges(&self, v: NodeId) -> &[EdgeId] {
        &self.in_edges[v]
    }

    pub fn out_flow(&self, v: NodeId) -> u64 {
        self.out_edges[v].iter().map(|&e| self.edges[e].flow).sum()
    }

    pub fn in_flow(&self, v: NodeId) -> u64 {
        self.in_edges[v].iter().map(|&e| self.edges[e].flow).sum()
    }

    /// Flow leaving the source, an upper bound on any path weight.
    pub fn total_flow(&self) -> u64 {
        self.out_flow(self.source)
    }

    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label_path(&self, nodes: &[NodeId]) -> Vec<u64> {
        nodes.iter().map(|&v| self.labels[v]).collect()
    }

    /// Dense id of an external label.
    pub fn node_of_label(&self, label: u64) -> Option<NodeId> {
        self.labels.binary_search(&label).ok().or_else(|| {
            // labels are sorted for parsed graphs; fall back for hand-built ones
            self.labels.iter().position(|&l| l == label)
        })
    }

    /// Deterministic topological order, ties broken by ascending node id.
    pub fn topological_order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn rank(&self, v: NodeId) -> usize {
        self.rank[v]
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        self.out_edges
            .get(u)?
            .iter()
            .copied()
            .find(|&e| self.edges[e].head == v)
    }

    /// Edge ids along a node sequence with at least one edge.
    pub fn path_edges(&self, nodes: &[NodeId]) -> Result<Vec<EdgeId>, PathError> {
        if nodes.len() < 2 {
            return Err(PathError::NoEdges);
        }
        let mut seen = BTreeSet::new();
        for &v in nodes {
            if v >= self.num_nodes() {
                return Err(PathError::MissingEdge(v, v));
            }
            if !seen.insert(v) {
                return Err(PathError::RepeatedNode(v));
            }
        }
        nodes
            .windows(2)
            .map(|w| self.edge_between(w[0], w[1]).ok_or(PathError::MissingEdge(w[0], w[1])))
            .collect()
    }

    pub fn is_path(&self, nodes: &[NodeId]) -> bool {
        self.path_edges(nodes).is_ok()
    }

    /// Node sequence of a chain of edge ids.
    pub fn route_nodes(&self, route: &[EdgeId]) -> Vec<NodeId> {
        let mut nodes = Vec::with_capacity(route.len() + 1);
        if let Some(&first) = route.first() {
            nodes.push(self.edges[first].tail);
        }
        nodes.extend(route.iter().map(|&e| self.edges[e].head));
        nodes
    }

    /// All violations of the flow-network invariants; empty for any graph
    /// built through the checked constructors.
    pub fn validate(&self) -> Vec<Violation> {
        check_network(&self.labels, &self.edges, true)
    }
}

/// A path (node sequence) with a positive integer weight.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightedPath {
    pub nodes: Vec<NodeId>,
    pub weight: u64,
}

/// A path given as edge ids, for graphs that may carry parallel edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Route {
    pub edges: Vec<EdgeId>,
    pub weight: u64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("path {index}: {source}")]
    BadPath { index: usize, source: PathError },
    #[error("path {0} has zero weight")]
    ZeroWeight(usize),
    #[error("edge {tail} -> {head}: paths carry {carried}, flow is {flow}")]
    Superposition {
        tail: NodeId,
        head: NodeId,
        carried: u64,
        flow: u64,
    },
}

/// A multiset of weighted source-to-sink paths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Decomposition {
    pub paths: Vec<WeightedPath>,
}

impl Decomposition {
    pub fn new(paths: Vec<WeightedPath>) -> Self {
        Decomposition { paths }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Checks that every path is a source-to-sink path and the weighted
    /// superposition equals the flow on every edge.
    pub fn verify(&self, g: &FlowGraph) -> Result<(), DecompositionError> {
        let mut carried = vec![0u64; g.num_edges()];
        for (index, p) in self.paths.iter().enumerate() {
            if p.weight == 0 {
                return Err(DecompositionError::ZeroWeight(index));
            }
            let edges = g
                .path_edges(&p.nodes)
                .map_err(|source| DecompositionError::BadPath { index, source })?;
            if p.nodes[0] != g.source() || *p.nodes.last().unwrap() != g.sink() {
                return Err(DecompositionError::BadPath {
                    index,
                    source: PathError::NotSourceToSink,
                });
            }
            for e in edges {
                carried[e] += p.weight;
            }
        }
        check_superposition(g, &carried)
    }

    /// Canonical form: paths sorted, so equal multisets compare equal.
    pub fn canonical(mut self) -> Self {
        self.paths.sort();
        self
    }
}

/// [`Decomposition::verify`] over routes given by edge ids.
pub fn verify_routes(g: &FlowGraph, routes: &[Route]) -> Result<(), DecompositionError> {
    let mut carried = vec![0u64; g.num_edges()];
    for (index, r) in routes.iter().enumerate() {
        if r.weight == 0 {
            return Err(DecompositionError::ZeroWeight(index));
        }
        let nodes = g.route_nodes(&r.edges);
        let chained = r.edges.windows(2).all(|w| g.edge(w[0]).head == g.edge(w[1]).tail);
        let distinct = nodes.iter().collect::<BTreeSet<_>>().len() == nodes.len();
        if r.edges.is_empty() || !chained || !distinct {
            return Err(DecompositionError::BadPath {
                index,
                source: PathError::NoEdges,
            });
        }
        if nodes[0] != g.source() || *nodes.last().unwrap() != g.sink() {
            return Err(DecompositionError::BadPath {
                index,
                source: PathError::NotSourceToSink,
            });
        }
        for &e in &r.edges {
            carried[e] += r.weight;
        }
    }
    check_superposition(g, &carried)
}

fn check_superposition(g: &FlowGraph, carried: &[u64]) -> Result<(), DecompositionError> {
    for (e, edge) in g.edges().iter().enumerate() {
        if carried[e] != edge.flow {
            return Err(DecompositionError::Superposition {
                tail: edge.tail,
                head: edge.head,
                carried: carried[e],
                flow: edge.flow,
            });
        }
    }
    Ok(())
}

/// True if `inner` occurs as a contiguous block of `outer`.
pub fn contains_subpath<T: PartialEq>(outer: &[T], inner: &[T]) -> bool {
    if inner.is_empty() {
        return true;
    }
    inner.len() <= outer.len() && outer.windows(inner.len()).any(|w| w == inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> FlowGraph {
        FlowGraph::new("d", 4, &[(0, 1, 3), (0, 2, 4), (1, 3, 3), (2, 3, 4)]).unwrap()
    }

    #[test]
    fn validate_diamond_is_clean() {
        assert!(diamond().validate().is_empty());
        assert_eq!(diamond().source(), 0);
        assert_eq!(diamond().sink(), 3);
    }

    #[test]
    fn cycle_is_reported() {
        let v = check_network(
            &[0, 1],
            &[
                Edge {
                    tail: 0,
                    head: 1,
                    flow: 1,
                },
                Edge {
                    tail: 1,
                    head: 0,
                    flow: 1,
                },
            ],
            false,
        );
        assert!(v.contains(&Violation::Cycle));
    }

    #[test]
    fn two_sources_reported() {
        let err = FlowGraph::new("x", 3, &[(0, 2, 1), (1, 2, 1)]).unwrap_err();
        assert_eq!(err.violations, vec![Violation::MultipleSources(vec![0, 1])]);
    }

    #[test]
    fn conservation_names_node() {
        let err = FlowGraph::new("x", 3, &[(0, 1, 3), (1, 2, 5)]).unwrap_err();
        assert_eq!(
            err.violations,
            vec![Violation::Conservation {
                node: 1,
                inflow: 3,
                outflow: 5
            }]
        );
    }

    #[test]
    fn parallel_edges_rejected_unless_multigraph() {
        let e = [(0, 1, 1), (0, 1, 2)];
        assert!(FlowGraph::new("p", 2, &e).is_err());
        assert!(FlowGraph::multigraph("p", vec![0, 1], &e).is_ok());
    }

    #[test]
    fn topological_orders() {
        assert_eq!(
            FlowGraph::new("e", 2, &[(0, 1, 5)]).unwrap().topological_order(),
            &[0, 1]
        );
        assert_eq!(diamond().topological_order(), &[0, 1, 2, 3]);
        let p = FlowGraph::new("p", 3, &[(0, 1, 2), (1, 2, 2)]).unwrap();
        assert_eq!(p.topological_order(), &[0, 1, 2]);
        let q = FlowGraph::new("q", 3, &[(0, 2, 2), (2, 1, 2)]).unwrap();
        assert_eq!(q.topological_order(), &[0, 2, 1]);
    }

    #[test]
    fn verify_decomposition() {
        let g = diamond();
        let d = Decomposition::new(vec![
            WeightedPath {
                nodes: vec![0, 1, 3],
                weight: 3,
            },
            WeightedPath {
                nodes: vec![0, 2, 3],
                weight: 4,
            },
        ]);
        assert!(d.verify(&g).is_ok());
        let bad = Decomposition::new(vec![WeightedPath {
            nodes: vec![0, 1, 3],
            weight: 3,
        }]);
        assert!(matches!(bad.verify(&g), Err(DecompositionError::Superposition { .. })));
    }

    #[test]
    fn subpath_containment() {
        assert!(contains_subpath(&[1, 2, 3, 4], &[2, 3]));
        assert!(!contains_subpath(&[1, 2, 3, 4], &[1, 3]));
        assert!(!contains_subpath(&[1, 2], &[1, 2, 3]));
    }
}
