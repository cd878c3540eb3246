//! Per-graph orchestration and corpus runs.
//!
//! A graph is contracted first; removed source-to-sink paths are always
//! reported. Funnels stop there. Otherwise the time budget starts, the
//! minimum decomposition of the residual is found and the chosen outer
//! strategy runs. If the budget runs out anywhere, every solver result is
//! dropped and the maximal paths safe for all decompositions are reported
//! instead.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::variants::run_variant;
use crate::engine::{EngineError, EngineOptions, EngineStats, Provenance, SafetyContext, Variant};
use crate::fd_safety::safe_flow_maximal_paths;
use crate::graph::{FlowGraph, InvalidGraph, NodeId};
use crate::model::{solve_min_k, Backend, BackendChoice, BackendError, Deadline, SolveError};
use crate::postprocess;
use crate::preprocess::y_to_v_contract;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub variant: Variant,
    pub budget: Duration,
    pub backend: BackendChoice,
    pub prefilter: bool,
    /// Order path weights in plain minimum-k solves.
    pub symmetry: bool,
    pub bin_threshold: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            variant: Variant::TopDown,
            budget: Duration::from_secs(120),
            backend: BackendChoice::Builtin,
            prefilter: true,
            symmetry: true,
            bin_threshold: 4,
            workers: 1,
            seed: 0,
        }
    }
}

impl RunConfig {
    fn engine_options(&self) -> EngineOptions {
        EngineOptions {
            prefilter: self.prefilter,
            symmetry: false,
            bin_threshold: self.bin_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    Fallback,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Complete => "complete",
            RunStatus::Fallback => "fallback",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyReport {
    pub graph_id: String,
    pub variant: Variant,
    pub status: RunStatus,
    /// Maximal safe paths over dense node ids.
    pub paths: Vec<Vec<NodeId>>,
    /// The same paths over the node ids of the input.
    pub labelled: Vec<Vec<u64>>,
    pub provenance: Vec<Provenance>,
    /// Every solver call, including the minimum-k search.
    pub ilp_calls: usize,
    pub min_k: Option<usize>,
    pub stats: EngineStats,
    pub wall: Duration,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Engine(String),
}

struct Partial {
    paths: Vec<Vec<NodeId>>,
    provenance: Vec<Provenance>,
    min_k: Option<usize>,
}

pub fn run_graph(g: &FlowGraph, cfg: &RunConfig, backend: &mut dyn Backend) -> Result<SafetyReport, PipelineError> {
    let start = Instant::now();
    let contracted = y_to_v_contract(g);
    let trivial = contracted.trivial_safe();
    let mut ilp_calls = 0;
    let mut stats = EngineStats::default();

    let attempt: Result<Partial, PipelineError> = match contracted.residual() {
        None => Ok(Partial {
            paths: postprocess(trivial.to_vec()),
            provenance: vec![Provenance::Trivial; trivial.len()],
            min_k: Some(trivial.len()),
        }),
        Some(residual) => {
            let deadline = Deadline::after(cfg.budget);
            let graph = std::sync::Arc::new(residual.graph.clone());
            match solve_min_k(graph, backend, cfg.symmetry, deadline) {
                Err(SolveError::Timeout) => Err(PipelineError::Engine("timeout".into())),
                Err(SolveError::Backend(e)) => return Err(e.into()),
                Err(SolveError::Model(e)) => return Err(PipelineError::Engine(e.to_string())),
                Ok(min) => {
                    ilp_calls += min.calls;
                    let mut ctx = SafetyContext::new(
                        g,
                        trivial,
                        residual,
                        &min.witness,
                        backend,
                        deadline,
                        cfg.engine_options(),
                    );
                    let found = run_variant(&mut ctx, cfg.variant);
                    stats = ctx.stats();
                    ilp_calls += stats.ilp_calls;
                    match found {
                        Ok(paths) => {
                            let mut all = trivial.to_vec();
                            all.extend(paths);
                            let paths = postprocess(all);
                            let provenance = paths
                                .iter()
                                .map(|p| {
                                    if trivial.contains(p) {
                                        Provenance::Trivial
                                    } else {
                                        ctx.provenance(p).unwrap_or(Provenance::Ilp)
                                    }
                                })
                                .collect();
                            Ok(Partial {
                                paths,
                                provenance,
                                min_k: Some(min.k + trivial.len()),
                            })
                        }
                        Err(EngineError::Timeout) => Err(PipelineError::Engine("timeout".into())),
                        Err(EngineError::Backend(e)) => return Err(e.into()),
                        Err(e) => return Err(PipelineError::Engine(e.to_string())),
                    }
                }
            }
        }
    };

    let (status, partial) = match attempt {
        Ok(p) => (RunStatus::Complete, p),
        Err(_) => {
            log::info!(
                "{}: budget exhausted, reporting paths safe for all decompositions",
                g.id()
            );
            let mut all = trivial.to_vec();
            all.extend(safe_flow_maximal_paths(g));
            let paths = postprocess(all);
            let provenance = paths
                .iter()
                .map(|p| {
                    if trivial.contains(p) {
                        Provenance::Trivial
                    } else {
                        Provenance::Fallback
                    }
                })
                .collect();
            (
                RunStatus::Fallback,
                Partial {
                    paths,
                    provenance,
                    min_k: None,
                },
            )
        }
    };
    Ok(SafetyReport {
        graph_id: g.id().to_string(),
        variant: cfg.variant,
        status,
        labelled: partial.paths.iter().map(|p| g.label_path(p)).collect(),
        paths: partial.paths,
        provenance: partial.provenance,
        ilp_calls,
        min_k: partial.min_k,
        stats,
        wall: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphOutcome {
    Done(SafetyReport),
    Skipped { graph_id: String, reason: String },
    Failed { graph_id: String, error: String },
}

impl GraphOutcome {
    pub fn graph_id(&self) -> &str {
        match self {
            GraphOutcome::Done(r) => &r.graph_id,
            GraphOutcome::Skipped { graph_id, .. } | GraphOutcome::Failed { graph_id, .. } => graph_id,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            GraphOutcome::Done(r) => match r.status {
                RunStatus::Complete => "complete",
                RunStatus::Fallback => "fallback",
            },
            GraphOutcome::Skipped { .. } => "skipped",
            GraphOutcome::Failed { .. } => "failed",
        }
    }

    pub fn report(&self) -> Option<&SafetyReport> {
        match self {
            GraphOutcome::Done(r) => Some(r),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorpusSummary {
    pub graphs: usize,
    pub complete: usize,
    pub fallback: usize,
    pub skipped: usize,
    pub failed: usize,
    pub ilp_calls: usize,
    pub wall: Duration,
}

impl CorpusSummary {
    pub fn of(outcomes: &[GraphOutcome]) -> Self {
        let mut s = CorpusSummary {
            graphs: outcomes.len(),
            ..Default::default()
        };
        for o in outcomes {
            match o {
                GraphOutcome::Done(r) => {
                    s.ilp_calls += r.ilp_calls;
                    s.wall += r.wall;
                    match r.status {
                        RunStatus::Complete => s.complete += 1,
                        RunStatus::Fallback => s.fallback += 1,
                    }
                }
                GraphOutcome::Skipped { .. } => s.skipped += 1,
                GraphOutcome::Failed { .. } => s.failed += 1,
            }
        }
        s
    }

    /// Whether anything was skipped, failed or fell back.
    pub fn partial(&self) -> bool {
        self.fallback + self.skipped + self.failed > 0
    }
}

pub type CorpusItem = Result<FlowGraph, InvalidGraph>;

fn run_item(item: &CorpusItem, cfg: &RunConfig) -> GraphOutcome {
    match item {
        Err(invalid) => {
            log::warn!("{invalid}");
            GraphOutcome::Skipped {
                graph_id: invalid.graph_id.clone(),
                reason: invalid.to_string(),
            }
        }
        Ok(g) => {
            let mut backend = cfg.backend.instantiate();
            match run_graph(g, cfg, backend.as_mut()) {
                Ok(r) => GraphOutcome::Done(r),
                Err(e) => {
                    log::error!("{}: {e}", g.id());
                    GraphOutcome::Failed {
                        graph_id: g.id().to_string(),
                        error: e.to_string(),
                    }
                }
            }
        }
    }
}

/// Runs every graph independently, on `cfg.workers` threads; results keep
/// input order.
pub fn run_corpus(items: &[CorpusItem], cfg: &RunConfig) -> Vec<GraphOutcome> {
    if cfg.workers <= 1 {
        return items.iter().map(|i| run_item(i, cfg)).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(|i| run_item(i, cfg)).collect())
}

/// One record of a safe-paths file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafeRecord {
    pub graph_id: String,
    pub status: String,
    pub paths: Vec<Vec<u64>>,
}

impl From<&GraphOutcome> for SafeRecord {
    fn from(o: &GraphOutcome) -> Self {
        SafeRecord {
            graph_id: o.graph_id().to_string(),
            status: o.status().to_string(),
            paths: o.report().map(|r| r.labelled.clone()).unwrap_or_default(),
        }
    }
}

pub fn write_safe_paths(records: &[SafeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("# {} {}\n", r.graph_id, r.status));
        for p in &r.paths {
            let line: Vec<String> = p.iter().map(u64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct SafeParseError {
    pub line: usize,
    pub message: String,
}

pub fn read_safe_paths(text: &str) -> Result<Vec<SafeRecord>, SafeParseError> {
    let mut out: Vec<SafeRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            let (id, status) = rest.rsplit_once(char::is_whitespace).ok_or(SafeParseError {
                line: i + 1,
                message: "header needs a graph id and a status".into(),
            })?;
            out.push(SafeRecord {
                graph_id: id.trim().to_string(),
                status: status.to_string(),
                paths: Vec::new(),
            });
            continue;
        }
        let record = out.last_mut().ok_or(SafeParseError {
            line: i + 1,
            message: "path before any header".into(),
        })?;
        let path = line
            .split_whitespace()
            .map(|t| t.parse::<u64>())
            .collect::<Result<Vec<u64>, _>>()
            .map_err(|e| SafeParseError {
                line: i + 1,
                message: e.to_string(),
            })?;
        record.paths.push(path);
    }
    Ok(out)
}

/// Stats CSV; with `timings` off every wall time is written as 0.
pub fn write_stats_csv(outcomes: &[GraphOutcome], variant: Variant, timings: bool) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "graph_id",
        "variant",
        "status",
        "ilp_calls",
        "wall_ms",
        "num_safe_paths",
    ])
    .unwrap();
    for o in outcomes {
        let (calls, ms, n) = match o.report() {
            Some(r) => (r.ilp_calls, if timings { r.wall.as_millis() } else { 0 }, r.paths.len()),
            None => (0, 0, 0),
        };
        w.write_record([
            o.graph_id().to_string(),
            variant.to_string(),
            o.status().to_string(),
            calls.to_string(),
            ms.to_string(),
            n.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::BuiltinBackend;

    fn run(g: &FlowGraph, cfg: &RunConfig) -> SafetyReport {
        run_graph(g, cfg, &mut BuiltinBackend::new()).unwrap()
    }

    #[test]
    fn funnels_need_no_solver() {
        for g in [fixtures::single_path(), fixtures::diamond()] {
            let r = run(&g, &RunConfig::default());
            assert_eq!(r.status, RunStatus::Complete);
            assert_eq!(r.ilp_calls, 0);
            assert!(r.provenance.iter().all(|&p| p == Provenance::Trivial));
        }
        let r = run(&fixtures::diamond(), &RunConfig::default());
        assert_eq!(r.paths, vec![vec![0, 1, 3], vec![0, 2, 3]]);
        assert_eq!(r.min_k, Some(2));
    }

    #[test]
    fn tiny_budget_falls_back() {
        let cfg = RunConfig {
            budget: Duration::from_nanos(1),
            ..RunConfig::default()
        };
        for g in [fixtures::two_mfds(), fixtures::balanced_two_by_two()] {
            let r = run(&g, &cfg);
            assert_eq!(r.status, RunStatus::Fallback);
            assert_eq!(r.paths, safe_flow_maximal_paths(&g));
        }
    }

    #[test]
    fn two_mfds_complete_run() {
        let r = run(&fixtures::two_mfds(), &RunConfig::default());
        assert_eq!(r.status, RunStatus::Complete);
        assert_eq!(r.min_k, Some(4));
        assert!(r.paths.contains(&vec![0, 1, 2, 3, 4]));
        let i = r.paths.iter().position(|p| p == &vec![0, 1, 2, 3, 4]).unwrap();
        assert_eq!(r.provenance[i], Provenance::Ilp);
    }

    #[test]
    fn corpus_with_invalid_graph() {
        let text = "# a\n3\n0 1 5\n1 2 5\n# bad\n3\n0 1 3\n1 2 5\n# c\n2\n0 1 4\n";
        let items: Vec<CorpusItem> = crate::corpus::parse_raw_graphs(text)
            .unwrap()
            .into_iter()
            .map(|r| r.into_flow_graph())
            .collect();
        let out = run_corpus(&items, &RunConfig::default());
        let statuses: Vec<&str> = out.iter().map(|o| o.status()).collect();
        assert_eq!(statuses, vec!["complete", "skipped", "complete"]);
        let s = CorpusSummary::of(&out);
        assert_eq!((s.complete, s.skipped, s.ilp_calls), (2, 1, 0));
        assert!(s.partial());
    }

    #[test]
    fn safe_paths_round_trip() {
        let records = vec![
            SafeRecord {
                graph_id: "g 1".into(),
                status: "complete".into(),
                paths: vec![vec![0, 10, 20], vec![20, 30]],
            },
            SafeRecord {
                graph_id: "h".into(),
                status: "skipped".into(),
                paths: vec![],
            },
        ];
        let text = write_safe_paths(&records);
        assert_eq!(text, "# g 1 complete\n0 10 20\n20 30\n# h skipped\n");
        assert_eq!(read_safe_paths(&text).unwrap(), records);
        assert!(read_safe_paths("0 1\n").is_err());
    }

    #[test]
    fn parallel_matches_serial() {
        let items: Vec<CorpusItem> = fixtures::all().into_iter().map(Ok).collect();
        let serial = run_corpus(&items, &RunConfig::default());
        let parallel = run_corpus(
            &items,
            &RunConfig {
                workers: 3,
                ..RunConfig::default()
            },
        );
        let records = |o: &[GraphOutcome]| o.iter().map(SafeRecord::from).collect::<Vec<_>>();
        assert_eq!(records(&serial), records(&parallel));
        assert_eq!(
            write_stats_csv(&serial, Variant::TopDown, false),
            write_stats_csv(&parallel, Variant::TopDown, false)
        );
    }
}
