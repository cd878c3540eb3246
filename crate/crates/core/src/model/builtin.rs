//! Exact depth-first branch and bound over (path, weight) choices.
//!
//! At each node the first positive residual edge in topological order is
//! picked. Its tail carries no residual inflow, so it is the source, and
//! every completion routes some path through it. Paths through it are
//! tried with weights from the bottleneck down to one. Consecutive picks
//! of the same edge must be non-increasing in `(edges, weight)`, which
//! visits each multiset of weighted paths once.

use std::collections::HashSet;

use super::{cut_bound, Backend, BackendError, Deadline, MfdModelSpec, Objective, SolverOutcome};
use crate::graph::{EdgeId, FlowGraph, Route};

#[derive(Debug, Default)]
pub struct BuiltinBackend {
    nodes: u64,
}

impl BuiltinBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Search nodes visited over the lifetime of this backend.
    pub fn nodes_visited(&self) -> u64 {
        self.nodes
    }
}

impl Backend for BuiltinBackend {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn solve(&mut self, spec: &MfdModelSpec, deadline: Deadline) -> Result<SolverOutcome, BackendError> {
        let g = spec.graph();
        let tests = spec.tests().len();
        let mut search = Search {
            g,
            spec,
            maximize: spec.objective() == Objective::MaximizeAvoidance,
            deadline,
            residual: g.edges().iter().map(|e| e.flow).collect(),
            chosen: Vec::with_capacity(spec.k()),
            hit_count: vec![0; tests],
            hit_tests: 0,
            best: None,
            failed: HashSet::new(),
            timed_out: false,
            nodes: 0,
        };
        search.run(None);
        self.nodes += search.nodes;
        if search.timed_out {
            return Ok(SolverOutcome::timeout());
        }
        Ok(match search.best {
            Some((_, routes)) => SolverOutcome::optimal(spec, spec.assignment_for(&routes)),
            None => SolverOutcome::infeasible(),
        })
    }
}

type MemoKey = (Vec<u64>, usize, Option<(Vec<EdgeId>, u64)>);

struct Search<'a> {
    g: &'a FlowGraph,
    spec: &'a MfdModelSpec,
    maximize: bool,
    deadline: Deadline,
    residual: Vec<u64>,
    chosen: Vec<Route>,
    hit_count: Vec<u32>,
    hit_tests: usize,
    best: Option<(usize, Vec<Route>)>,
    failed: HashSet<MemoKey>,
    timed_out: bool,
    nodes: u64,
}

impl Search<'_> {
    fn done(&self) -> bool {
        self.timed_out
            || match &self.best {
                Some((avoided, _)) => !self.maximize || *avoided == self.spec.tests().len(),
                None => false,
            }
    }

    fn first_positive(&self) -> Option<EdgeId> {
        (0..self.residual.len())
            .filter(|&e| self.residual[e] > 0)
            .min_by_key(|&e| {
                let edge = self.g.edge(e);
                (self.g.rank(edge.tail), self.g.rank(edge.head), e)
            })
    }

    /// Returns whether a solution was found below this node.
    fn run(&mut self, prev: Option<(EdgeId, usize)>) -> bool {
        self.nodes += 1;
        if self.deadline.expired() {
            self.timed_out = true;
            return false;
        }
        let remaining = self.spec.k() - self.chosen.len();
        let Some(pick) = self.first_positive() else {
            if remaining > 0 {
                return false;
            }
            let avoided = self.spec.tests().len() - self.hit_tests;
            if self.best.as_ref().is_none_or(|(b, _)| avoided > *b) {
                self.best = Some((avoided, self.chosen.clone()));
            }
            return true;
        };
        if remaining == 0 {
            return false;
        }
        if let Some((b, _)) = &self.best {
            if self.spec.tests().len() - self.hit_tests <= *b {
                return false;
            }
        }
        let source_left: u64 = self
            .g
            .out_edges(self.g.source())
            .iter()
            .map(|&e| self.residual[e])
            .sum();
        if source_left < remaining as u64 || cut_bound(self.g, |e| self.residual[e] > 0) > remaining {
            return false;
        }
        debug_assert_eq!(self.g.edge(pick).tail, self.g.source());

        let bound = prev
            .filter(|&(e, _)| e == pick)
            .map(|(_, idx)| (self.chosen[idx].edges.clone(), self.chosen[idx].weight));
        let key = (!self.maximize).then(|| (self.residual.clone(), remaining, bound.clone()));
        if let Some(k) = &key {
            if self.failed.contains(k) {
                return false;
            }
        }

        let mut found = false;
        for edges in self.paths_from(pick) {
            let width = edges.iter().map(|&e| self.residual[e]).min().unwrap();
            for weight in (1..=width).rev() {
                if let Some((be, bw)) = &bound {
                    if (&edges, weight) > (be, *bw) {
                        continue;
                    }
                }
                self.push(Route {
                    edges: edges.clone(),
                    weight,
                });
                found |= self.run(Some((pick, self.chosen.len() - 1)));
                self.pop();
                if self.done() {
                    return found;
                }
            }
        }
        if !found && !self.timed_out {
            if let Some(k) = key {
                self.failed.insert(k);
            }
        }
        found
    }

    /// Source-to-sink routes over positive residual edges starting with `first`.
    fn paths_from(&self, first: EdgeId) -> Vec<Vec<EdgeId>> {
        let mut out = Vec::new();
        let mut stack = vec![first];
        self.extend(&mut stack, &mut out);
        out
    }

    fn extend(&self, stack: &mut Vec<EdgeId>, out: &mut Vec<Vec<EdgeId>>) {
        let at = self.g.edge(*stack.last().unwrap()).head;
        if at == self.g.sink() {
            out.push(stack.clone());
            return;
        }
        for &e in self.g.out_edges(at) {
            if self.residual[e] > 0 {
                stack.push(e);
                self.extend(stack, out);
                stack.pop();
            }
        }
    }

    fn push(&mut self, route: Route) {
        for &e in &route.edges {
            self.residual[e] -= route.weight;
        }
        for j in 0..self.hit_count.len() {
            if self.spec.route_hits(&route.edges, j) {
                if self.hit_count[j] == 0 {
                    self.hit_tests += 1;
                }
                self.hit_count[j] += 1;
            }
        }
        self.chosen.push(route);
    }

    fn pop(&mut self) {
        let route = self.chosen.pop().unwrap();
        for &e in &route.edges {
            self.residual[e] += route.weight;
        }
        for j in 0..self.hit_count.len() {
            if self.spec.route_hits(&route.edges, j) {
                self.hit_count[j] -= 1;
                if self.hit_count[j] == 0 {
                    self.hit_tests -= 1;
                }
            }
        }
    }
}
