use mfd_safety::engine::Variant;
use mfd_safety::generate::{random_corpus, GenParams};
use mfd_safety::model::BuiltinBackend;
use mfd_safety::oracle::{oracle_maximal_safe, OracleLimits};
use mfd_safety::pipeline::{run_graph, RunConfig, RunStatus};
use mfd_safety::preprocess::y_to_v_contract;

fn params() -> GenParams {
    GenParams {
        max_nodes: 10,
        max_paths: 6,
        max_edges: 14,
        max_outflow: 30,
        density: 45,
        ..GenParams::default()
    }
}

fn limits() -> OracleLimits {
    OracleLimits {
        max_edges: 14,
        max_outflow: 30,
        max_states: 2_000_000,
    }
}

#[test]
fn every_variant_matches_brute_force() {
    let mut checked = 0;
    for (g, _) in random_corpus(11, 3000, &params(), "r") {
        if y_to_v_contract(&g).is_funnel() {
            continue;
        }
        let Ok(expected) = oracle_maximal_safe(&g, limits()) else {
            continue;
        };
        checked += 1;
        for variant in Variant::ALL {
            for prefilter in [true, false] {
                let cfg = RunConfig {
                    variant,
                    prefilter,
                    ..RunConfig::default()
                };
                let r = run_graph(&g, &cfg, &mut BuiltinBackend::new()).unwrap();
                assert_eq!(r.status, RunStatus::Complete);
                assert_eq!(r.paths, expected, "{} {variant} prefilter={prefilter}", g.id());
            }
        }
    }
    println!("{checked} non-funnel graphs checked");
    assert!(checked >= 200, "only {checked} graphs checked");
}
