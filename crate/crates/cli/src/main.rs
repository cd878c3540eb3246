use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mfd_safety::corpus::{parse_raw_graphs, parse_truth_corpus};
use mfd_safety::engine::Variant;
use mfd_safety::metrics::{corpus_metrics, graph_metrics, write_metrics_csv, Averaging};
use mfd_safety::model::BackendChoice;
use mfd_safety::oracle::{oracle_maximal_safe, OracleLimits};
use mfd_safety::pipeline::{
    read_safe_paths, run_corpus, write_safe_paths, write_stats_csv, CorpusItem, CorpusSummary, GraphOutcome, RunConfig,
    SafeRecord,
};

const FORMATS: &str = "\
Formats:
  graph file    records of '# <graph_id>', a line with the node count, then
                one 'u v flow' line per edge; node ids are non-negative
                integers, flows exact integers such as 5 or 5.0.
  truth file    records of '# <graph_id>', then one 'weight: v1 v2 ...' line
                per ground-truth path (the colon is optional).
  safe file     records of '# <graph_id> <status>' (complete, fallback,
                skipped, failed or refused), then one path per line as
                space-separated node ids of the input.
  stats CSV     graph_id,variant,status,ilp_calls,wall_ms,num_safe_paths
  metrics CSV   graph_id,t,wprec,maxcov,fscore,note; a blank line; then
                bucket,graphs,wprec,maxcov,fscore for t<=10, t<=15, all
  bench CSV     variant,graphs,total_ms,ilp_calls

External solver commands run through 'sh -c' with {lp}, {sol}, {time} and
{seed} substituted; without {lp}, ' <lp> <sol>' is appended. The solution
file lists 'name value' lines; CBC and Gurobi solution files are accepted.
MFD_SAFE_SOLVER overrides solver.external_cmd from --config.

Exit codes: 0 clean, 1 fatal error, 2 partial (skipped, refused, failed
or fallback graphs present).";

#[derive(Parser)]
#[command(name = "mfd-safe", version, about = "Maximal safe paths for minimum flow decompositions", after_help = FORMATS)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximal safe paths of every graph in a corpus.
    Safe {
        graphs: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "topdown")]
        variant: Variant,
        /// Safe-paths output; stdout if absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Per-graph stats CSV.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Score a safe-paths file against ground truth.
    Eval {
        safe: PathBuf,
        truth: PathBuf,
        /// Plain per-path mean for precision instead of length weighting.
        #[arg(long)]
        unweighted: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Brute-force maximal safe paths for small graphs.
    Oracle {
        graphs: PathBuf,
        #[arg(long, default_value_t = 12)]
        max_edges: usize,
        #[arg(long, default_value_t = 20)]
        max_outflow: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_states: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run all four variants and total their time and solver calls over the
    /// graphs none of them timed out on.
    Bench {
        graphs: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Per-graph budget in seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    #[arg(long, value_parser = ["builtin", "external"], default_value = "builtin")]
    backend: String,
    /// Skip the excess-flow check before solver tests.
    #[arg(long)]
    no_prefilter: bool,
    /// Do not order path weights in minimum-k solves.
    #[arg(long)]
    no_symmetry: bool,
    /// Spans above this are bisected by twopointerbin.
    #[arg(long, default_value_t = 4)]
    bin_threshold: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Passed to external solvers as {seed}.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// TOML file with a [solver] table (external_cmd).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write 0 for every wall time.
    #[arg(long)]
    no_timings: bool,
}

#[derive(Deserialize, Default)]
struct ConfigFile {
    #[serde(default)]
    solver: SolverConfig,
}

#[derive(Deserialize, Default)]
struct SolverConfig {
    external_cmd: Option<String>,
}

impl RunArgs {
    fn config(&self, variant: Variant) -> Result<RunConfig> {
        if self.timeout.is_nan() || self.timeout <= 0.0 || !self.timeout.is_finite() {
            bail!("--timeout must be a positive number of seconds");
        }
        if self.workers == 0 {
            bail!("--workers must be at least 1");
        }
        let backend = match self.backend.as_str() {
            "builtin" => BackendChoice::Builtin,
            _ => {
                let mut command = None;
                if let Some(path) = &self.config {
                    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    let cfg: ConfigFile =
                        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                    command = cfg.solver.external_cmd;
                }
                if let Ok(env) = std::env::var("MFD_SAFE_SOLVER") {
                    command = Some(env);
                }
                let Some(command) = command else {
                    bail!("external backend needs solver.external_cmd in --config or MFD_SAFE_SOLVER");
                };
                BackendChoice::External {
                    command,
                    seed: self.seed,
                }
            }
        };
        Ok(RunConfig {
            variant,
            budget: Duration::from_secs_f64(self.timeout),
            backend,
            prefilter: !self.no_prefilter,
            symmetry: !self.no_symmetry,
            bin_threshold: self.bin_threshold,
            workers: self.workers,
            seed: self.seed,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_corpus(path: &Path) -> Result<Vec<CorpusItem>> {
    let raw = parse_raw_graphs(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(raw.into_iter().map(|r| r.into_flow_graph()).collect())
}

fn cmd_safe(
    graphs: &Path,
    run: &RunArgs,
    variant: Variant,
    output: Option<&Path>,
    stats: Option<&Path>,
) -> Result<bool> {
    let cfg = run.config(variant)?;
    let items = load_corpus(graphs)?;
    let outcomes = run_corpus(&items, &cfg);
    let records: Vec<SafeRecord> = outcomes.iter().map(SafeRecord::from).collect();
    emit(output, &write_safe_paths(&records))?;
    if let Some(path) = stats {
        fs::write(path, write_stats_csv(&outcomes, variant, !run.no_timings))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let s = CorpusSummary::of(&outcomes);
    log::info!(
        "{} graphs: {} complete, {} fallback, {} skipped, {} failed, {} solver calls",
        s.graphs,
        s.complete,
        s.fallback,
        s.skipped,
        s.failed,
        s.ilp_calls
    );
    Ok(s.partial())
}

fn cmd_eval(safe: &Path, truth: &Path, unweighted: bool, output: Option<&Path>) -> Result<bool> {
    let records = read_safe_paths(&read(safe)?).with_context(|| format!("parsing {}", safe.display()))?;
    let truths = parse_truth_corpus(&read(truth)?).with_context(|| format!("parsing {}", truth.display()))?;
    let by_id: HashMap<&str, _> = truths.iter().map(|t| (t.graph_id.as_str(), t)).collect();
    let averaging = if unweighted {
        Averaging::PerPath
    } else {
        Averaging::LengthWeighted
    };
    let mut partial = false;
    let mut per_graph = Vec::new();
    for r in &records {
        if r.status != "complete" && r.status != "fallback" {
            log::warn!("{}: status {}, not scored", r.graph_id, r.status);
            partial = true;
            continue;
        }
        match by_id.get(r.graph_id.as_str()) {
            Some(t) => {
                let m = graph_metrics(&r.paths, t, averaging);
                if m.empty {
                    log::warn!("{}: no paths reported", r.graph_id);
                }
                per_graph.push(m);
            }
            None => {
                log::warn!("{}: no ground truth", r.graph_id);
                partial = true;
            }
        }
    }
    let reported: std::collections::HashSet<&str> = records.iter().map(|r| r.graph_id.as_str()).collect();
    for t in &truths {
        if !reported.contains(t.graph_id.as_str()) {
            log::warn!("{}: ground truth without a safe-paths record", t.graph_id);
            partial = true;
        }
    }
    emit(output, &write_metrics_csv(&per_graph, &corpus_metrics(&per_graph)))?;
    Ok(partial)
}

fn cmd_oracle(graphs: &Path, limits: OracleLimits, output: Option<&Path>) -> Result<bool> {
    let items = load_corpus(graphs)?;
    let mut partial = false;
    let mut records = Vec::new();
    for item in &items {
        let record = match item {
            Err(invalid) => {
                log::warn!("{invalid}");
                SafeRecord {
                    graph_id: invalid.graph_id.clone(),
                    status: "skipped".into(),
                    paths: vec![],
                }
            }
            Ok(g) => match oracle_maximal_safe(g, limits) {
                Ok(paths) => SafeRecord {
                    graph_id: g.id().to_string(),
                    status: "complete".into(),
                    paths: paths.iter().map(|p| g.label_path(p)).collect(),
                },
                Err(e) => {
                    log::warn!("{}: {e}", g.id());
                    SafeRecord {
                        graph_id: g.id().to_string(),
                        status: "refused".into(),
                        paths: vec![],
                    }
                }
            },
        };
        partial |= record.status != "complete";
        records.push(record);
    }
    emit(output, &write_safe_paths(&records))?;
    Ok(partial)
}

fn cmd_bench(graphs: &Path, run: &RunArgs, output: Option<&Path>) -> Result<bool> {
    let items = load_corpus(graphs)?;
    let mut runs: Vec<(Variant, Vec<GraphOutcome>)> = Vec::new();
    for variant in Variant::ALL {
        let cfg = run.config(variant)?;
        runs.push((variant, run_corpus(&items, &cfg)));
    }
    let keep: Vec<bool> = (0..items.len())
        .map(|i| {
            runs.iter().all(|(_, o)| {
                o[i].report()
                    .is_some_and(|r| r.status == mfd_safety::pipeline::RunStatus::Complete)
            })
        })
        .collect();
    let dropped = keep.iter().filter(|k| !**k).count();
    if dropped > 0 {
        log::warn!("{dropped} graphs left out: not complete in every variant");
    }
    let mut out = String::from("variant,graphs,total_ms,ilp_calls\n");
    for (variant, outcomes) in &runs {
        let mut ms = 0u128;
        let mut calls = 0usize;
        for (o, _) in outcomes.iter().zip(&keep).filter(|(_, k)| **k) {
            let r = o.report().unwrap();
            ms += r.wall.as_millis();
            calls += r.ilp_calls;
        }
        if run.no_timings {
            ms = 0;
        }
        let n = keep.iter().filter(|k| **k).count();
        out.push_str(&format!("{variant},{n},{ms},{calls}\n"));
    }
    emit(output, &out)?;
    Ok(dropped > 0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    let result = match &cli.command {
        Command::Safe {
            graphs,
            run,
            variant,
            output,
            stats,
        } => cmd_safe(graphs, run, *variant, output.as_deref(), stats.as_deref()),
        Command::Eval {
            safe,
            truth,
            unweighted,
            output,
        } => cmd_eval(safe, truth, *unweighted, output.as_deref()),
        Command::Oracle {
            graphs,
            max_edges,
            max_outflow,
            max_states,
            output,
        } => cmd_oracle(
            graphs,
            OracleLimits {
                max_edges: *max_edges,
                max_outflow: *max_outflow,
                max_states: *max_states,
            },
            output.as_deref(),
        ),
        Command::Bench { graphs, run, output } => cmd_bench(graphs, run, output.as_deref()),
    };
    match result {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
