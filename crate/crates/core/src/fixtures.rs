//! Small hand-built flow networks with known structure.

use crate::graph::FlowGraph;

/// `0 -> 1` with flow 5.
pub fn single_edge() -> FlowGraph {
    FlowGraph::new("single_edge", 2, &[(0, 1, 5)]).unwrap()
}

/// `0 -> 1 -> 2` with flow 5.
pub fn single_path() -> FlowGraph {
    FlowGraph::new("single_path", 3, &[(0, 1, 5), (1, 2, 5)]).unwrap()
}

/// Two branches of flow 3 and 4 between source 0 and sink 3.
pub fn diamond() -> FlowGraph {
    FlowGraph::new("diamond", 4, &[(0, 1, 3), (0, 2, 4), (1, 3, 3), (2, 3, 4)]).unwrap()
}

/// Node 3 has in- and out-degree two; every incident unitig carries 2.
/// All four pairings through node 3 are possible, so no path crossing it
/// is safe.
pub fn balanced_two_by_two() -> FlowGraph {
    FlowGraph::new(
        "two_by_two",
        7,
        &[
            (0, 1, 2),
            (0, 2, 2),
            (1, 3, 2),
            (2, 3, 2),
            (3, 4, 2),
            (3, 5, 2),
            (4, 6, 2),
            (5, 6, 2),
        ],
    )
    .unwrap()
}

/// Nodes `s a b c d e f t` are `0..8`. The excess flow of `(s,a,b)` is 3 and of
/// `(s,a,b,c)` is -6. It has several minimum decompositions of size 4,
/// among them weights `{5,3,7,2}` and `{3,4,1,9}`, and `(s,a,b,c,d)` is a
/// maximal safe path for all of them.
pub fn two_mfds() -> FlowGraph {
    FlowGraph::new(
        "two_mfds",
        8,
        &[
            (0, 1, 3),
            (0, 2, 9),
            (0, 4, 5),
            (1, 2, 3),
            (2, 3, 3),
            (2, 4, 9),
            (3, 4, 3),
            (4, 5, 7),
            (4, 6, 10),
            (5, 6, 7),
            (6, 7, 17),
        ],
    )
    .unwrap()
}

/// Peeling widest paths takes 4 paths here; 3 suffice.
pub fn greedy_gap() -> FlowGraph {
    FlowGraph::new(
        "greedy_gap",
        6,
        &[
            (0, 1, 9),
            (0, 3, 3),
            (1, 2, 4),
            (1, 3, 5),
            (2, 3, 4),
            (3, 4, 5),
            (3, 5, 7),
            (4, 5, 5),
        ],
    )
    .unwrap()
}

pub fn all() -> Vec<FlowGraph> {
    vec![
        single_edge(),
        single_path(),
        diamond(),
        balanced_two_by_two(),
        two_mfds(),
        greedy_gap(),
    ]
}
