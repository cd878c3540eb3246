//! Integer program for a decomposition into `k` weighted paths, the
//! solver-backend contract, and the minimum-`k` search.
//!
//! Variable layout for `m` edges and `k` paths:
//! `x[e,i]` at `e*k + i`, `w[i]` at `m*k + i`, `pi[e,i]` at
//! `m*k + k + e*k + i`, and the avoidance indicator of group test `j` at
//! `2*m*k + k + j`.

pub mod builtin;
pub mod lp;

use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::graph::{contains_subpath, verify_routes, EdgeId, FlowGraph, Route};

pub use builtin::BuiltinBackend;
pub use lp::ExternalBackend;

/// Cooperative wall-clock limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deadline(Option<Instant>);

impl Deadline {
    pub fn none() -> Self {
        Deadline(None)
    }

    pub fn after(budget: Duration) -> Self {
        Deadline(Instant::now().checked_add(budget))
    }

    pub fn at(instant: Instant) -> Self {
        Deadline(Some(instant))
    }

    pub fn expired(&self) -> bool {
        self.0.is_some_and(|d| Instant::now() >= d)
    }

    pub fn remaining(&self) -> Option<Duration> {
        self.0.map(|d| d.saturating_duration_since(Instant::now()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: i64,
    pub upper: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Constraint {
    pub fn holds(&self, values: &[i64]) -> bool {
        let lhs: i64 = self.terms.iter().map(|&(v, c)| c * values[v]).sum();
        match self.sense {
            Sense::Le => lhs <= self.rhs,
            Sense::Ge => lhs >= self.rhs,
            Sense::Eq => lhs == self.rhs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Feasibility,
    /// Maximize the number of avoided group-test paths.
    MaximizeAvoidance,
}

/// A tested path, given as the edge sequences any solution path must
/// contain (one of) to cover it.
pub type GroupTest = Vec<Vec<EdgeId>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("graph has no edges")]
    NoEdges,
    #[error("group test {0} has a candidate with no edges")]
    ZeroEdgeTest(usize),
    #[error("group test {test} refers to edge {edge} outside the graph")]
    UnknownEdge { test: usize, edge: EdgeId },
}

#[derive(Debug, Clone)]
pub struct MfdModelSpec {
    graph: Arc<FlowGraph>,
    k: usize,
    w_max: u64,
    symmetry: bool,
    tests: Vec<GroupTest>,
}

impl MfdModelSpec {
    pub fn build(graph: Arc<FlowGraph>, k: usize, symmetry: bool) -> Result<Self, ModelError> {
        if k == 0 {
            return Err(ModelError::ZeroK);
        }
        if graph.num_edges() == 0 {
            return Err(ModelError::NoEdges);
        }
        let w_max = graph.out_flow(graph.source());
        Ok(MfdModelSpec {
            graph,
            k,
            w_max,
            symmetry,
            tests: Vec::new(),
        })
    }

    /// Replaces the group tests and switches to the avoidance objective.
    pub fn with_group_tests(mut self, tests: Vec<GroupTest>) -> Result<Self, ModelError> {
        for (j, t) in tests.iter().enumerate() {
            for c in t {
                if c.is_empty() {
                    return Err(ModelError::ZeroEdgeTest(j));
                }
                if let Some(&edge) = c.iter().find(|&&e| e >= self.graph.num_edges()) {
                    return Err(ModelError::UnknownEdge { test: j, edge });
                }
            }
        }
        self.tests = tests;
        Ok(self)
    }

    pub fn graph(&self) -> &FlowGraph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<FlowGraph> {
        Arc::clone(&self.graph)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn w_max(&self) -> u64 {
        self.w_max
    }

    pub fn symmetry(&self) -> bool {
        self.symmetry
    }

    pub fn tests(&self) -> &[GroupTest] {
        &self.tests
    }

    pub fn objective(&self) -> Objective {
        if self.tests.is_empty() {
            Objective::Feasibility
        } else {
            Objective::MaximizeAvoidance
        }
    }

    fn m(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn x(&self, e: EdgeId, i: usize) -> usize {
        e * self.k + i
    }

    pub fn w(&self, i: usize) -> usize {
        self.m() * self.k + i
    }

    pub fn pi(&self, e: EdgeId, i: usize) -> usize {
        self.m() * self.k + self.k + e * self.k + i
    }

    pub fn gamma(&self, j: usize) -> usize {
        2 * self.m() * self.k + self.k + j
    }

    pub fn num_vars(&self) -> usize {
        2 * self.m() * self.k + self.k + self.tests.len()
    }

    pub fn variables(&self) -> Vec<Variable> {
        let (m, k) = (self.m(), self.k);
        let w_max = self.w_max as i64;
        let mut vars = Vec::with_capacity(self.num_vars());
        for e in 0..m {
            for i in 0..k {
                vars.push(Variable {
                    name: format!("x_{e}_{i}"),
                    kind: VarKind::Binary,
                    lower: 0,
                    upper: 1,
                });
            }
        }
        for i in 0..k {
            vars.push(Variable {
                name: format!("w_{i}"),
                kind: VarKind::Integer,
                lower: 1,
                upper: w_max,
            });
        }
        for e in 0..m {
            for i in 0..k {
                vars.push(Variable {
                    name: format!("pi_{e}_{i}"),
                    kind: VarKind::Integer,
                    lower: 0,
                    upper: w_max,
                });
            }
        }
        for j in 0..self.tests.len() {
            vars.push(Variable {
                name: format!("g_{j}"),
                kind: VarKind::Binary,
                lower: 0,
                upper: 1,
            });
        }
        vars
    }

    pub fn constraints(&self) -> Vec<Constraint> {
        let g = &*self.graph;
        let (m, k) = (self.m(), self.k);
        let big = self.w_max as i64;
        let mut out = Vec::new();
        for i in 0..k {
            for v in 0..g.num_nodes() {
                let mut terms: Vec<(usize, i64)> = g.in_edges(v).iter().map(|&e| (self.x(e, i), 1)).collect();
                terms.extend(g.out_edges(v).iter().map(|&e| (self.x(e, i), -1)));
                let rhs = if v == g.source() {
                    -1
                } else if v == g.sink() {
                    1
                } else {
                    0
                };
                out.push(Constraint {
                    name: format!("path_{i}_{v}"),
                    terms,
                    sense: Sense::Eq,
                    rhs,
                });
            }
        }
        for e in 0..m {
            out.push(Constraint {
                name: format!("flow_{e}"),
                terms: (0..k).map(|i| (self.pi(e, i), 1)).collect(),
                sense: Sense::Eq,
                rhs: g.edge(e).flow as i64,
            });
            for i in 0..k {
                let (p, x, w) = (self.pi(e, i), self.x(e, i), self.w(i));
                out.push(Constraint {
                    name: format!("px_{e}_{i}"),
                    terms: vec![(p, 1), (x, -big)],
                    sense: Sense::Le,
                    rhs: 0,
                });
                out.push(Constraint {
                    name: format!("pw_{e}_{i}"),
                    terms: vec![(p, 1), (w, -1)],
                    sense: Sense::Le,
                    rhs: 0,
                });
                out.push(Constraint {
                    name: format!("pl_{e}_{i}"),
                    terms: vec![(p, 1), (w, -1), (x, -big)],
                    sense: Sense::Ge,
                    rhs: -big,
                });
            }
        }
        if self.symmetry {
            for i in 0..k.saturating_sub(1) {
                out.push(Constraint {
                    name: format!("sym_{i}"),
                    terms: vec![(self.w(i), 1), (self.w(i + 1), -1)],
                    sense: Sense::Ge,
                    rhs: 0,
                });
            }
        }
        for (j, test) in self.tests.iter().enumerate() {
            for (c, cand) in test.iter().enumerate() {
                for i in 0..k {
                    let mut terms: Vec<(usize, i64)> = cand.iter().map(|&e| (self.x(e, i), 1)).collect();
                    terms.push((self.gamma(j), 1));
                    out.push(Constraint {
                        name: format!("avoid_{j}_{c}_{i}"),
                        terms,
                        sense: Sense::Le,
                        rhs: cand.len() as i64,
                    });
                }
            }
        }
        out
    }

    pub fn objective_value(&self, values: &[i64]) -> i64 {
        (0..self.tests.len()).map(|j| values[self.gamma(j)]).sum()
    }

    /// Checks bounds and every constraint, including the exact product
    /// `pi = x * w`.
    pub fn check_assignment(&self, values: &[i64]) -> Result<(), String> {
        if values.len() != self.num_vars() {
            return Err(format!("expected {} values, got {}", self.num_vars(), values.len()));
        }
        for (v, var) in self.variables().iter().enumerate() {
            if values[v] < var.lower || values[v] > var.upper {
                return Err(format!(
                    "{} = {} outside [{}, {}]",
                    var.name, values[v], var.lower, var.upper
                ));
            }
        }
        for c in self.constraints() {
            if !c.holds(values) {
                return Err(format!("constraint {} violated", c.name));
            }
        }
        for e in 0..self.m() {
            for i in 0..self.k {
                if values[self.pi(e, i)] != values[self.x(e, i)] * values[self.w(i)] {
                    return Err(format!("pi_{e}_{i} is not x_{e}_{i} * w_{i}"));
                }
            }
        }
        Ok(())
    }

    /// Reads the `k` weighted routes out of a feasible assignment.
    pub fn decode(&self, values: &[i64]) -> Result<Vec<Route>, String> {
        let g = &*self.graph;
        let mut routes = Vec::with_capacity(self.k);
        for i in 0..self.k {
            let mut edges = Vec::new();
            let mut at = g.source();
            while at != g.sink() {
                let next: Vec<EdgeId> = g
                    .out_edges(at)
                    .iter()
                    .copied()
                    .filter(|&e| values[self.x(e, i)] == 1)
                    .collect();
                if next.len() != 1 {
                    return Err(format!("path {i} branches or stops at node {at}"));
                }
                edges.push(next[0]);
                at = g.edge(next[0]).head;
            }
            let selected = (0..self.m()).filter(|&e| values[self.x(e, i)] == 1).count();
            if selected != edges.len() {
                return Err(format!("path {i} selects edges off its s-t path"));
            }
            routes.push(Route {
                edges,
                weight: values[self.w(i)] as u64,
            });
        }
        Ok(routes)
    }

    /// Whether `route` covers group test `j`.
    pub fn route_hits(&self, route: &[EdgeId], j: usize) -> bool {
        self.tests[j].iter().any(|c| contains_subpath(route, c))
    }

    /// Full assignment for the given routes: paths are placed in order of
    /// decreasing weight and each test's indicator is set iff it is avoided.
    pub fn assignment_for(&self, routes: &[Route]) -> Vec<i64> {
        let mut sorted: Vec<&Route> = routes.iter().collect();
        sorted.sort_by(|a, b| b.weight.cmp(&a.weight).then_with(|| a.edges.cmp(&b.edges)));
        let mut values = vec![0i64; self.num_vars()];
        for (i, r) in sorted.iter().enumerate() {
            values[self.w(i)] = r.weight as i64;
            for &e in &r.edges {
                values[self.x(e, i)] = 1;
                values[self.pi(e, i)] = r.weight as i64;
            }
        }
        for j in 0..self.tests.len() {
            let hit = routes.iter().any(|r| self.route_hits(&r.edges, j));
            values[self.gamma(j)] = i64::from(!hit);
        }
        values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverOutcome {
    pub status: SolveStatus,
    pub assignment: Option<Vec<i64>>,
    pub objective: Option<i64>,
}

impl SolverOutcome {
    pub fn infeasible() -> Self {
        SolverOutcome {
            status: SolveStatus::Infeasible,
            assignment: None,
            objective: None,
        }
    }

    pub fn timeout() -> Self {
        SolverOutcome {
            status: SolveStatus::Timeout,
            assignment: None,
            objective: None,
        }
    }

    pub fn optimal(spec: &MfdModelSpec, assignment: Vec<i64>) -> Self {
        SolverOutcome {
            status: SolveStatus::Optimal,
            objective: Some(spec.objective_value(&assignment)),
            assignment: Some(assignment),
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver command failed: {0}")]
    Command(String),
    #[error("cannot read solver output: {0}")]
    Parse(String),
    #[error("solver returned an invalid solution: {0}")]
    InvalidSolution(String),
}

pub trait Backend: Send {
    fn name(&self) -> &'static str;

    fn solve(&mut self, spec: &MfdModelSpec, deadline: Deadline) -> Result<SolverOutcome, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum BackendChoice {
    #[default]
    Builtin,
    External {
        command: String,
        seed: u64,
    },
}

impl BackendChoice {
    pub fn instantiate(&self) -> Box<dyn Backend> {
        match self {
            BackendChoice::Builtin => Box::new(BuiltinBackend::new()),
            BackendChoice::External { command, seed } => Box::new(ExternalBackend::new(command.clone(), *seed)),
        }
    }
}

/// Largest number of flow-carrying edges crossing a prefix cut of the
/// topological order; every decomposition needs at least that many paths.
pub fn lower_bound_k(g: &FlowGraph) -> usize {
    cut_bound(g, |e| g.edge(e).flow > 0)
}

pub(crate) fn cut_bound(g: &FlowGraph, positive: impl Fn(EdgeId) -> bool) -> usize {
    let n = g.num_nodes();
    let mut delta = vec![0i64; n + 1];
    for e in 0..g.num_edges() {
        if positive(e) {
            let edge = g.edge(e);
            delta[g.rank(edge.tail)] += 1;
            delta[g.rank(edge.head)] -= 1;
        }
    }
    let mut best = 0i64;
    let mut run = 0i64;
    for d in delta {
        run += d;
        best = best.max(run);
    }
    (best as usize).max(1)
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("time budget exhausted")]
    Timeout,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinK {
    pub k: usize,
    pub witness: Vec<Route>,
    pub calls: usize,
}

/// Smallest feasible `k`, counting upward from [`lower_bound_k`].
pub fn solve_min_k(
    g: Arc<FlowGraph>,
    backend: &mut dyn Backend,
    symmetry: bool,
    deadline: Deadline,
) -> Result<MinK, SolveError> {
    for (i, k) in (lower_bound_k(&g)..=g.num_edges()).enumerate() {
        let spec = MfdModelSpec::build(Arc::clone(&g), k, symmetry)?;
        let outcome = backend.solve(&spec, deadline)?;
        match outcome.status {
            SolveStatus::Timeout => return Err(SolveError::Timeout),
            SolveStatus::Infeasible => continue,
            SolveStatus::Optimal => {
                let values = outcome
                    .assignment
                    .ok_or_else(|| BackendError::InvalidSolution("optimal without assignment".into()))?;
                spec.check_assignment(&values).map_err(BackendError::InvalidSolution)?;
                let witness = spec.decode(&values).map_err(BackendError::InvalidSolution)?;
                verify_routes(&g, &witness).map_err(|e| BackendError::InvalidSolution(e.to_string()))?;
                return Ok(MinK {
                    k,
                    witness,
                    calls: i + 1,
                });
            }
        }
    }
    Err(BackendError::InvalidSolution("no feasible k up to the edge count".into()).into())
}
