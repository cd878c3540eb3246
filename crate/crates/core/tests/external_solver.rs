//! Agreement between the builtin search and HiGHS through the LP bridge.
//! Skipped when the highspy module is missing.

use std::process::Command;

use mfd_safety::engine::Variant;
use mfd_safety::fixtures;
use mfd_safety::generate::{random_corpus, GenParams};
use mfd_safety::model::{BuiltinBackend, ExternalBackend};
use mfd_safety::pipeline::{run_graph, RunConfig, RunStatus};
use mfd_safety::preprocess::y_to_v_contract;
use mfd_safety::FlowGraph;

fn highs_command() -> Option<String> {
    let ok = Command::new("python3")
        .args(["-c", "import highspy"])
        .output()
        .is_ok_and(|o| o.status.success());
    if !ok {
        eprintln!("highspy not available, skipping");
        return None;
    }
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/highs_solve.py");
    Some(format!("python3 {script} {{lp}} {{sol}} {{time}} {{seed}}"))
}

fn graphs() -> Vec<FlowGraph> {
    let mut out = vec![fixtures::two_mfds(), fixtures::balanced_two_by_two()];
    out.extend(
        random_corpus(9, 400, &GenParams::default(), "h")
            .into_iter()
            .map(|x| x.0)
            .filter(|g| !y_to_v_contract(g).is_funnel())
            .take(6),
    );
    out
}

#[test]
fn highs_matches_builtin() {
    let Some(command) = highs_command() else { return };
    for g in graphs() {
        for variant in [Variant::TopDown, Variant::TwoPointer] {
            let cfg = RunConfig {
                variant,
                ..RunConfig::default()
            };
            let ours = run_graph(&g, &cfg, &mut BuiltinBackend::new()).unwrap();
            let theirs = run_graph(&g, &cfg, &mut ExternalBackend::new(command.clone(), 0)).unwrap();
            assert_eq!(theirs.status, RunStatus::Complete, "{}", g.id());
            assert_eq!(theirs.min_k, ours.min_k, "{}", g.id());
            assert_eq!(theirs.paths, ours.paths, "{} {variant}", g.id());
        }
    }
}
