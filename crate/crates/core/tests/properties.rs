use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mfd_safety::corpus::{parse_graph_corpus, write_graph_corpus};
use mfd_safety::fd_safety::{excess_flow, is_fd_safe, safe_flow_maximal_paths};
use mfd_safety::generate::{random_instance, GenParams};
use mfd_safety::graph::contains_subpath;
use mfd_safety::metrics::{graph_metrics, max_coverage, weighted_precision, Averaging};
use mfd_safety::model::lp::{parse_solution, write_lp};
use mfd_safety::model::{solve_min_k, BuiltinBackend, Deadline, MfdModelSpec, SolveStatus};
use mfd_safety::pipeline::{run_graph, RunConfig, RunStatus};
use mfd_safety::preprocess::y_to_v_contract;
use mfd_safety::{postprocess, FlowGraph};

fn instance(seed: u64) -> (FlowGraph, mfd_safety::corpus::GroundTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_instance(&mut rng, &GenParams::default(), &format!("p{seed}"))
}

fn paths() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..6, 1..6), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn postprocess_is_idempotent_and_containment_free(input in paths()) {
        let out = postprocess(input.clone());
        prop_assert_eq!(postprocess(out.clone()), out.clone());
        for (i, a) in out.iter().enumerate() {
            for (j, b) in out.iter().enumerate() {
                prop_assert!(i == j || !contains_subpath(a, b));
            }
        }
        for p in &input {
            prop_assert!(out.iter().any(|q| contains_subpath(q, p)));
        }
    }

    #[test]
    fn report_is_containment_free_and_made_of_paths(seed in any::<u64>()) {
        let (g, _) = instance(seed);
        let r = run_graph(&g, &RunConfig::default(), &mut BuiltinBackend::new()).unwrap();
        prop_assert_eq!(r.status, RunStatus::Complete);
        prop_assert_eq!(postprocess(r.paths.clone()), r.paths.clone());
        for p in &r.paths {
            prop_assert!(g.is_path(p));
        }
        for (p, l) in r.paths.iter().zip(&r.labelled) {
            prop_assert_eq!(&g.label_path(p), l);
        }
        // fallback output sits inside the complete output
        for p in safe_flow_maximal_paths(&g) {
            prop_assert!(r.paths.iter().any(|q| contains_subpath(q, &p)));
        }
        for t in y_to_v_contract(&g).trivial_safe() {
            prop_assert!(r.paths.iter().any(|q| contains_subpath(q, t)));
        }
    }

    #[test]
    fn fd_safety_is_closed_under_subpaths(seed in any::<u64>()) {
        let (g, truth) = instance(seed);
        let d = truth.resolve(&g).unwrap();
        for p in &d.paths {
            let n = p.nodes.len();
            for l in 0..n {
                for r in l + 1..n {
                    let sub = &p.nodes[l..=r];
                    if is_fd_safe(&g, sub).unwrap() {
                        for ll in l..r {
                            prop_assert!(is_fd_safe(&g, &p.nodes[ll..=ll + 1]).unwrap());
                        }
                        if r > l + 1 {
                            prop_assert!(excess_flow(&g, &p.nodes[l..r]).unwrap() >= excess_flow(&g, sub).unwrap());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn min_k_is_at_most_the_generating_paths(seed in any::<u64>()) {
        let (g, truth) = instance(seed);
        let min = solve_min_k(Arc::new(g.clone()), &mut BuiltinBackend::new(), true, Deadline::none()).unwrap();
        prop_assert!(min.k <= truth.paths.len());
        prop_assert!(min.k >= 1);
    }

    #[test]
    fn lp_round_trip_of_a_witness(seed in any::<u64>()) {
        let (g, _) = instance(seed);
        let g = Arc::new(g);
        let min = solve_min_k(g.clone(), &mut BuiltinBackend::new(), true, Deadline::none()).unwrap();
        let spec = MfdModelSpec::build(g, min.k, true).unwrap();
        let values = spec.assignment_for(&min.witness);
        spec.check_assignment(&values).unwrap();
        let lp = write_lp(&spec);
        let mut sol = String::from("status optimal\nobjective 0\n");
        for (v, x) in spec.variables().iter().zip(&values) {
            prop_assert!(lp.contains(&v.name));
            sol.push_str(&format!("{} {}\n", v.name, x));
        }
        let out = parse_solution(&sol, &spec).unwrap();
        prop_assert_eq!(out.status, SolveStatus::Optimal);
        prop_assert_eq!(out.assignment, Some(values));
    }

    #[test]
    fn corpus_round_trip(seeds in prop::collection::vec(any::<u64>(), 1..5)) {
        let graphs: Vec<FlowGraph> = seeds.iter().map(|&s| instance(s).0).collect();
        let text = write_graph_corpus(&graphs);
        prop_assert_eq!(parse_graph_corpus(&text).unwrap(), graphs);
    }

    #[test]
    fn metrics_stay_in_range(reported in prop::collection::vec(prop::collection::vec(0u64..8, 1..6), 0..6), seed in any::<u64>()) {
        let (_, truth) = instance(seed);
        let m = graph_metrics(&reported, &truth, Averaging::LengthWeighted);
        for x in [m.weighted_precision, m.max_coverage, m.f_score] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        let u = graph_metrics(&reported, &truth, Averaging::PerPath);
        prop_assert!((0.0..=1.0).contains(&u.weighted_precision));
    }

    #[test]
    fn coverage_monotone_and_correct_paths_keep_precision(
        reported in prop::collection::vec(prop::collection::vec(0u64..8, 1..6), 0..6),
        seed in any::<u64>(),
    ) {
        let (_, truth) = instance(seed);
        let truth_paths = truth.label_paths();
        let mut more = reported.clone();
        more.push(truth_paths[0].clone());
        for t in &truth_paths {
            prop_assert!(max_coverage(t, &more) >= max_coverage(t, &reported));
        }
        prop_assert!(weighted_precision(&more, &truth_paths) >= weighted_precision(&reported, &truth_paths) || reported.is_empty());
        let perfect = graph_metrics(&truth_paths, &truth, Averaging::LengthWeighted);
        prop_assert_eq!((perfect.weighted_precision, perfect.max_coverage, perfect.f_score), (1.0, 1.0, 1.0));
    }
}
