//! Group safety tests over a fixed minimum decomposition, and the outer
//! strategies that enumerate maximal safe paths with them.
//!
//! Base paths are the witness routes of the contracted residual graph,
//! expanded to original node ids. A tested original path is covered by a
//! residual route iff the route contains one of its candidate chains: the
//! minimal residual edge sequences whose expansion contains the path.

pub mod variants;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::fd_safety::excess_flow;
use crate::graph::{contains_subpath, EdgeId, FlowGraph, NodeId, Route};
use crate::model::{Backend, BackendError, Deadline, GroupTest, MfdModelSpec, ModelError, SolveStatus};
use crate::preprocess::Residual;

pub use variants::{bottom_up, extending_core, top_down, trimming_core, two_pointer, two_pointer_bin};

/// Nodes `left..=right` (0-based) of base path `path`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubpathRef {
    pub path: usize,
    pub left: usize,
    pub right: usize,
}

impl SubpathRef {
    pub fn new(path: usize, left: usize, right: usize) -> Self {
        debug_assert!(left < right);
        SubpathRef { path, left, right }
    }

    pub fn edges(&self) -> usize {
        self.right - self.left
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreKind {
    Trimming,
    Extending,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreSet {
    pub kind: CoreKind,
    pub members: BTreeSet<SubpathRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Trivial,
    ExcessFlow,
    Ilp,
    Fallback,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Trivial => "trivial",
            Provenance::ExcessFlow => "excess_flow",
            Provenance::Ilp => "ilp",
            Provenance::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    TopDown,
    BottomUp,
    TwoPointer,
    TwoPointerBin,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::TopDown,
        Variant::BottomUp,
        Variant::TwoPointer,
        Variant::TwoPointerBin,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::TopDown => "topdown",
            Variant::BottomUp => "bottomup",
            Variant::TwoPointer => "twopointer",
            Variant::TwoPointerBin => "twopointerbin",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineStats {
    pub ilp_calls: usize,
    pub ilp_tested: usize,
    pub by_trivial: usize,
    pub by_excess: usize,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("time budget exhausted")]
    Timeout,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("group test model infeasible at the minimum k")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    pub prefilter: bool,
    pub symmetry: bool,
    pub bin_threshold: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            prefilter: true,
            symmetry: false,
            bin_threshold: 4,
        }
    }
}

pub struct SafetyContext<'a> {
    graph: &'a FlowGraph,
    trivial: &'a [Vec<NodeId>],
    residual: &'a Residual,
    residual_graph: Arc<FlowGraph>,
    k: usize,
    base: Vec<Vec<NodeId>>,
    backend: &'a mut dyn Backend,
    deadline: Deadline,
    options: EngineOptions,
    stats: EngineStats,
    provenance: HashMap<Vec<NodeId>, Provenance>,
    edge_index: HashMap<(NodeId, NodeId), Vec<(EdgeId, usize)>>,
    candidate_cache: HashMap<Vec<NodeId>, GroupTest>,
}

impl<'a> SafetyContext<'a> {
    /// `witness` is a minimum decomposition of the residual graph.
    pub fn new(
        graph: &'a FlowGraph,
        trivial: &'a [Vec<NodeId>],
        residual: &'a Residual,
        witness: &[Route],
        backend: &'a mut dyn Backend,
        deadline: Deadline,
        options: EngineOptions,
    ) -> Self {
        let mut edge_index: HashMap<(NodeId, NodeId), Vec<(EdgeId, usize)>> = HashMap::new();
        for (e, exp) in residual.expansions.iter().enumerate() {
            for (o, pair) in exp.windows(2).enumerate() {
                edge_index.entry((pair[0], pair[1])).or_default().push((e, o));
            }
        }
        SafetyContext {
            graph,
            trivial,
            residual,
            residual_graph: Arc::new(residual.graph.clone()),
            k: witness.len(),
            base: witness.iter().map(|r| residual.expand_route(&r.edges)).collect(),
            backend,
            deadline,
            options,
            stats: EngineStats::default(),
            provenance: HashMap::new(),
            edge_index,
            candidate_cache: HashMap::new(),
        }
    }

    pub fn graph(&self) -> &FlowGraph {
        self.graph
    }

    pub fn base(&self) -> &[Vec<NodeId>] {
        &self.base
    }

    pub fn options(&self) -> EngineOptions {
        self.options
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn nodes(&self, p: SubpathRef) -> &[NodeId] {
        &self.base[p.path][p.left..=p.right]
    }

    pub fn full_path(&self, i: usize) -> SubpathRef {
        SubpathRef::new(i, 0, self.base[i].len() - 1)
    }

    /// How `nodes` was shown safe, if it was.
    pub fn provenance(&self, nodes: &[NodeId]) -> Option<Provenance> {
        self.provenance.get(nodes).copied()
    }

    pub(crate) fn mark(&mut self, nodes: &[NodeId], how: Provenance) {
        self.provenance.entry(nodes.to_vec()).or_insert(how);
    }

    /// Residual edge chains whose expansion contains `nodes` and that are
    /// minimal with that property.
    pub fn candidates(&mut self, nodes: &[NodeId]) -> GroupTest {
        if let Some(c) = self.candidate_cache.get(nodes) {
            return c.clone();
        }
        let mut out = BTreeSet::new();
        if let Some(starts) = self.edge_index.get(&(nodes[0], nodes[1])) {
            for &(e, off) in starts {
                let mut chain = vec![e];
                self.match_chain(nodes, &mut chain, off, 0, &mut out);
            }
        }
        let out: GroupTest = out.into_iter().collect();
        self.candidate_cache.insert(nodes.to_vec(), out.clone());
        out
    }

    fn match_chain(
        &self,
        nodes: &[NodeId],
        chain: &mut Vec<EdgeId>,
        mut pos: usize,
        mut j: usize,
        out: &mut BTreeSet<Vec<EdgeId>>,
    ) {
        let e = *chain.last().unwrap();
        let exp = &self.residual.expansions[e];
        while pos < exp.len() && j < nodes.len() {
            if exp[pos] != nodes[j] {
                return;
            }
            pos += 1;
            j += 1;
        }
        if j == nodes.len() {
            out.insert(chain.clone());
            return;
        }
        let head = self.residual_graph.edge(e).head;
        for &next in self.residual_graph.out_edges(head) {
            chain.push(next);
            self.match_chain(nodes, chain, 1, j, out);
            chain.pop();
        }
    }

    /// Safety shown without a solver call: inside a removed source-to-sink
    /// path, or (with the prefilter) positive excess flow.
    fn certify(&mut self, nodes: &[NodeId]) -> Option<Provenance> {
        if self.trivial.iter().any(|t| contains_subpath(t, nodes)) {
            self.stats.by_trivial += 1;
            return Some(Provenance::Trivial);
        }
        if self.options.prefilter && excess_flow(self.graph, nodes).is_ok_and(|x| x > 0) {
            self.stats.by_excess += 1;
            return Some(Provenance::ExcessFlow);
        }
        None
    }

    /// One solver call maximizing how many of `paths` some minimum
    /// decomposition avoids at once. Returns the avoided ones.
    pub fn group_test(&mut self, paths: &[SubpathRef]) -> Result<Vec<SubpathRef>, EngineError> {
        let tests: Vec<GroupTest> = paths
            .iter()
            .map(|&p| {
                let nodes = self.nodes(p).to_vec();
                self.candidates(&nodes)
            })
            .collect();
        let spec = MfdModelSpec::build(Arc::clone(&self.residual_graph), self.k, self.options.symmetry)?
            .with_group_tests(tests)?;
        self.stats.ilp_calls += 1;
        self.stats.ilp_tested += paths.len();
        let outcome = self.backend.solve(&spec, self.deadline)?;
        match outcome.status {
            SolveStatus::Timeout => Err(EngineError::Timeout),
            SolveStatus::Infeasible => Err(EngineError::Infeasible),
            SolveStatus::Optimal => {
                let values = outcome
                    .assignment
                    .ok_or_else(|| BackendError::InvalidSolution("optimal without assignment".into()))?;
                Ok(paths
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| values[spec.gamma(j)] == 1)
                    .map(|(_, &p)| p)
                    .collect())
            }
        }
    }

    /// The safe members of `paths`, in input order.
    pub fn get_safe(&mut self, paths: &[SubpathRef]) -> Result<Vec<SubpathRef>, EngineError> {
        let mut safe = BTreeSet::new();
        let mut open = Vec::new();
        for &p in paths {
            let nodes = self.nodes(p).to_vec();
            match self.certify(&nodes) {
                Some(how) => {
                    self.mark(&nodes, how);
                    safe.insert(p);
                }
                None => open.push(p),
            }
        }
        while !open.is_empty() {
            let avoided: BTreeSet<SubpathRef> = self.group_test(&open)?.into_iter().collect();
            if avoided.is_empty() {
                for &p in &open {
                    let nodes = self.nodes(p).to_vec();
                    self.mark(&nodes, Provenance::Ilp);
                    safe.insert(p);
                }
                break;
            }
            open.retain(|p| !avoided.contains(p));
        }
        Ok(paths.iter().copied().filter(|p| safe.contains(p)).collect())
    }

    pub fn is_safe(&mut self, p: SubpathRef) -> Result<bool, EngineError> {
        Ok(!self.get_safe(&[p])?.is_empty())
    }
}

/// Splits `paths` into those with positive excess flow and the rest.
pub fn excess_flow_prefilter(g: &FlowGraph, paths: &[Vec<NodeId>]) -> (Vec<Vec<NodeId>>, Vec<Vec<NodeId>>) {
    paths
        .iter()
        .cloned()
        .partition(|p| excess_flow(g, p).is_ok_and(|x| x > 0))
}
