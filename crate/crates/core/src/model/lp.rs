//! LP-format export and an external solver bridge.
//!
//! The solver command is a shell template. `{lp}` and `{sol}` are replaced
//! by the model and solution file paths, `{time}` by the remaining seconds
//! and `{seed}` by the configured seed. Without `{lp}` the two paths are
//! appended. Recognized solution files: a native `status`/`objective`/
//! `name value` listing, Gurobi `.sol`, and CBC solution output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::process::{Command, Stdio};
use std::thread;
use std::time::Duration;

use super::{Backend, BackendError, Deadline, MfdModelSpec, Objective, Sense, SolveStatus, SolverOutcome, VarKind};

fn write_terms(out: &mut String, terms: &[(usize, i64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0");
    }
    for (n, &(v, c)) in terms.iter().enumerate() {
        if c < 0 {
            out.push_str(" -");
        } else if n > 0 {
            out.push_str(" +");
        }
        let mag = c.unsigned_abs();
        if mag == 1 {
            let _ = write!(out, " {}", names[v]);
        } else {
            let _ = write!(out, " {mag} {}", names[v]);
        }
    }
}

/// The model in CPLEX LP text format.
pub fn write_lp(spec: &MfdModelSpec) -> String {
    let vars = spec.variables();
    let names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ graph {} k {}", spec.graph().id(), spec.k());
    match spec.objective() {
        Objective::Feasibility => {
            out.push_str("Minimize\n obj: 0 ");
            out.push_str(&names[spec.w(0)]);
            out.push('\n');
        }
        Objective::MaximizeAvoidance => {
            out.push_str("Maximize\n obj:");
            let terms: Vec<(usize, i64)> = (0..spec.tests().len()).map(|j| (spec.gamma(j), 1)).collect();
            write_terms(&mut out, &terms, &names);
            out.push('\n');
        }
    }
    out.push_str("Subject To\n");
    for c in spec.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.terms, &names);
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for v in vars.iter().filter(|v| v.kind == VarKind::Integer) {
        let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
    }
    out.push_str("Binaries\n");
    for v in vars.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("Generals\n");
    for v in vars.iter().filter(|v| v.kind == VarKind::Integer) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    out
}

fn to_integer(token: &str) -> Result<i64, BackendError> {
    let x: f64 = token
        .parse()
        .map_err(|_| BackendError::Parse(format!("bad number {token:?}")))?;
    let r = x.round();
    if (x - r).abs() > 1e-4 {
        return Err(BackendError::Parse(format!("non-integral value {token}")));
    }
    Ok(r as i64)
}

/// Reads a solution file for `spec`. Variables it omits are zero.
pub fn parse_solution(text: &str, spec: &MfdModelSpec) -> Result<SolverOutcome, BackendError> {
    let index: HashMap<String, usize> = spec
        .variables()
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v.name, i))
        .collect();
    let mut values = vec![0i64; spec.num_vars()];
    let mut status = None;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty()).peekable();

    if let Some(first) = lines.peek().copied() {
        let lower = first.to_ascii_lowercase();
        if lower.starts_with("optimal") {
            status = Some(SolveStatus::Optimal);
            lines.next();
        } else if lower.starts_with("infeasible") || lower.contains("integer infeasible") {
            status = Some(SolveStatus::Infeasible);
            lines.next();
        } else if lower.starts_with("stopped on time") {
            status = Some(SolveStatus::Timeout);
            lines.next();
        }
    }
    for line in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if line.starts_with('#') {
            if line.to_ascii_lowercase().contains("objective value") {
                status.get_or_insert(SolveStatus::Optimal);
            }
            continue;
        }
        match fields.as_slice() {
            ["status", s] => {
                status = Some(match *s {
                    "optimal" => SolveStatus::Optimal,
                    "infeasible" => SolveStatus::Infeasible,
                    "timeout" => SolveStatus::Timeout,
                    other => return Err(BackendError::Parse(format!("unknown status {other:?}"))),
                })
            }
            ["objective", _] => {}
            [name, value] => {
                if let Some(&v) = index.get(*name) {
                    values[v] = to_integer(value)?;
                }
            }
            // CBC: index name value reduced-cost
            [_, name, value, _] | [_, name, value] if index.contains_key(*name) => {
                values[index[*name]] = to_integer(value)?;
            }
            _ => {}
        }
    }
    match status {
        Some(SolveStatus::Optimal) => Ok(SolverOutcome::optimal(spec, values)),
        Some(SolveStatus::Infeasible) => Ok(SolverOutcome::infeasible()),
        Some(SolveStatus::Timeout) => Ok(SolverOutcome::timeout()),
        None => Err(BackendError::Parse("no status in solution file".into())),
    }
}

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    command: String,
    seed: u64,
}

impl ExternalBackend {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        ExternalBackend {
            command: command.into(),
            seed,
        }
    }

    fn render(&self, lp: &str, sol: &str, seconds: f64) -> String {
        let mut cmd = self.command.clone();
        if !cmd.contains("{lp}") {
            cmd.push_str(" {lp} {sol}");
        }
        cmd.replace("{lp}", lp)
            .replace("{sol}", sol)
            .replace("{time}", &format!("{seconds:.3}"))
            .replace("{seed}", &self.seed.to_string())
    }
}

impl Backend for ExternalBackend {
    fn name(&self) -> &'static str {
        "external"
    }

    fn solve(&mut self, spec: &MfdModelSpec, deadline: Deadline) -> Result<SolverOutcome, BackendError> {
        if deadline.expired() {
            return Ok(SolverOutcome::timeout());
        }
        let dir = tempfile::tempdir()?;
        let lp = dir.path().join("model.lp");
        let sol = dir.path().join("model.sol");
        let log_path = dir.path().join("solver.log");
        fs::write(&lp, write_lp(spec))?;
        let seconds = deadline.remaining().map_or(1e9, |d| d.as_secs_f64());
        let line = self.render(&lp.to_string_lossy(), &sol.to_string_lossy(), seconds);
        log::debug!("external solver: {line}");
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&line)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(fs::File::create(&log_path)?)
            .spawn()?;
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if deadline.expired() {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SolverOutcome::timeout());
            }
            thread::sleep(Duration::from_millis(2));
        };
        if !status.success() {
            let err = fs::read_to_string(&log_path).unwrap_or_default();
            return Err(BackendError::Command(format!("{status}: {}", err.trim())));
        }
        let text = fs::read_to_string(&sol).map_err(|e| BackendError::Parse(format!("missing solution file: {e}")))?;
        let outcome = parse_solution(&text, spec)?;
        if let Some(values) = &outcome.assignment {
            spec.check_assignment(values).map_err(BackendError::InvalidSolution)?;
        }
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fixtures;
    use crate::graph::Route;

    fn diamond_spec() -> MfdModelSpec {
        MfdModelSpec::build(Arc::new(fixtures::diamond()), 2, true).unwrap()
    }

    #[test]
    fn lp_sections_in_order() {
        let text = write_lp(&diamond_spec());
        let pos: Vec<usize> = ["Minimize", "Subject To", "Bounds", "Binaries", "Generals", "End"]
            .iter()
            .map(|s| text.find(s).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.contains(" flow_0: pi_0_0 + pi_0_1 = 3"));
        assert!(text.contains(" px_0_0: pi_0_0 - 7 x_0_0 <= 0"));
        assert!(text.contains(" sym_0: w_0 - w_1 >= 0"));
    }

    #[test]
    fn avoidance_objective_written() {
        let spec = diamond_spec()
            .with_group_tests(vec![vec![vec![0, 2]], vec![vec![1]]])
            .unwrap();
        let text = write_lp(&spec);
        assert!(text.contains("Maximize\n obj: g_0 + g_1\n"));
        assert!(text.contains(" avoid_0_0_1: x_0_1 + x_2_1 + g_0 <= 2"));
    }

    fn native_solution(spec: &MfdModelSpec) -> String {
        let routes = vec![
            Route {
                edges: vec![1, 3],
                weight: 4,
            },
            Route {
                edges: vec![0, 2],
                weight: 3,
            },
        ];
        let values = spec.assignment_for(&routes);
        let mut text = String::from("status optimal\nobjective 0\n");
        for (v, var) in spec.variables().iter().enumerate() {
            text.push_str(&format!("{} {}\n", var.name, values[v]));
        }
        text
    }

    #[test]
    fn native_round_trip() {
        let spec = diamond_spec();
        let out = parse_solution(&native_solution(&spec), &spec).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        spec.check_assignment(out.assignment.as_ref().unwrap()).unwrap();
    }

    #[test]
    fn gurobi_and_cbc_formats() {
        let spec = diamond_spec();
        let body: String = native_solution(&spec)
            .lines()
            .skip(2)
            .map(|l| format!("{l}\n"))
            .collect();
        let gurobi = format!(
            "# Solution for model\n# Objective value = 0\n{}",
            body.replace(" 1\n", " 1.0000000000e+00\n")
        );
        let out = parse_solution(&gurobi, &spec).unwrap();
        spec.check_assignment(out.assignment.as_ref().unwrap()).unwrap();

        let cbc: String = std::iter::once("Optimal - objective value 0.00000000\n".to_string())
            .chain(body.lines().enumerate().map(|(i, l)| format!("{i:>6} {l} 0\n")))
            .collect();
        let out = parse_solution(&cbc, &spec).unwrap();
        spec.check_assignment(out.assignment.as_ref().unwrap()).unwrap();

        let out = parse_solution("Infeasible - objective value 0\n", &spec).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(parse_solution("x_0_0 1\n", &spec).is_err());
    }

    #[test]
    fn template_rendering() {
        let b = ExternalBackend::new("solver --time {time} --seed {seed} {lp} {sol}", 7);
        assert_eq!(
            b.render("a.lp", "a.sol", 1.5),
            "solver --time 1.500 --seed 7 a.lp a.sol"
        );
        let b = ExternalBackend::new("solver", 0);
        assert_eq!(b.render("a.lp", "a.sol", 1.0), "solver a.lp a.sol");
    }

    #[test]
    fn fake_solver_process() {
        let spec = diamond_spec();
        let dir = tempfile::tempdir().unwrap();
        let canned = dir.path().join("canned.sol");
        fs::write(&canned, native_solution(&spec)).unwrap();
        let mut b = ExternalBackend::new(format!("cp {} {{sol}} #{{lp}}", canned.display()), 0);
        let out = b.solve(&spec, Deadline::none()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);

        let mut failing = ExternalBackend::new("exit 3 #{lp}", 0);
        assert!(matches!(
            failing.solve(&spec, Deadline::none()),
            Err(BackendError::Command(_))
        ));

        let mut slow = ExternalBackend::new("sleep 5 #{lp}", 0);
        let out = slow.solve(&spec, Deadline::after(Duration::from_millis(50))).unwrap();
        assert_eq!(out.status, SolveStatus::Timeout);
    }
}
