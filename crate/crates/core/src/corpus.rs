//! Reading and writing graph and ground-truth corpora.
//!
//! Graph records:
//!
//! ```text
//! # <graph_id>
//! <num_nodes>
//! <u> <v> <flow>
//! ...
//! ```
//!
//! Truth records are headed the same way and list one path per line as
//! `<weight>: <v1> <v2> ...` (the colon is optional).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Decomposition, FlowGraph, InvalidGraph, NodeId, PathError, WeightedPath};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Invalid(#[from] InvalidGraph),
}

/// A graph record as read from a file, before validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawGraph {
    pub id: String,
    pub declared_nodes: usize,
    /// Line of the `#` header.
    pub line: usize,
    pub edges: Vec<(u64, u64, u64)>,
}

impl RawGraph {
    /// Remaps node ids to dense `0..n` in ascending label order and
    /// validates. Declared nodes that never appear on an edge are dropped.
    pub fn into_flow_graph(self) -> Result<FlowGraph, InvalidGraph> {
        let labels: Vec<u64> = self
            .edges
            .iter()
            .flat_map(|&(u, v, _)| [u, v])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if labels.len() < self.declared_nodes {
            log::debug!(
                "graph {}: {} declared nodes, {} on edges",
                self.id,
                self.declared_nodes,
                labels.len()
            );
        }
        let index: BTreeMap<u64, NodeId> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let edges: Vec<(NodeId, NodeId, u64)> = self.edges.iter().map(|&(u, v, f)| (index[&u], index[&v], f)).collect();
        FlowGraph::with_labels(self.id, labels, &edges)
    }
}

/// Parses an exact non-negative integer, also accepting a decimal literal
/// whose fractional part is zero (`10.0`).
pub fn parse_exact_integer(token: &str) -> Option<u64> {
    let (int, frac) = match token.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (token, None),
    };
    if let Some(f) = frac {
        if !f.chars().all(|c| c == '0') {
            return None;
        }
    }
    let int = if int.is_empty() && frac.is_some() { "0" } else { int };
    int.parse::<u64>().ok()
}

struct Record<'a> {
    id: String,
    header_line: usize,
    body: Vec<(usize, &'a str)>,
}

fn split_records(text: &str) -> Result<Vec<Record<'_>>, ParseError> {
    let mut records: Vec<Record> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            records.push(Record {
                id: rest.trim().to_string(),
                header_line: lineno,
                body: Vec::new(),
            });
        } else {
            match records.last_mut() {
                Some(r) => r.body.push((lineno, line)),
                None => return Err(parse_err(lineno, "content before first '#' header")),
            }
        }
    }
    Ok(records)
}

/// Splits a graph corpus into raw records. Only syntax is checked here.
pub fn parse_raw_graphs(text: &str) -> Result<Vec<RawGraph>, ParseError> {
    split_records(text)?
        .into_iter()
        .map(|rec| {
            let mut body = rec.body.iter();
            let declared_nodes = match body.next() {
                Some(&(ln, l)) => l
                    .parse::<usize>()
                    .map_err(|_| parse_err(ln, format!("expected node count, got {l:?}")))?,
                None => return Err(parse_err(rec.header_line, "record has no node count")),
            };
            let mut edges = Vec::new();
            for &(ln, l) in body {
                let tok: Vec<&str> = l.split_whitespace().collect();
                if tok.len() != 3 {
                    return Err(parse_err(ln, format!("expected '<u> <v> <flow>', got {l:?}")));
                }
                let u = tok[0]
                    .parse::<u64>()
                    .map_err(|_| parse_err(ln, format!("bad node id {:?}", tok[0])))?;
                let v = tok[1]
                    .parse::<u64>()
                    .map_err(|_| parse_err(ln, format!("bad node id {:?}", tok[1])))?;
                let f = parse_exact_integer(tok[2])
                    .ok_or_else(|| parse_err(ln, format!("flow {:?} is not an integer", tok[2])))?;
                edges.push((u, v, f));
            }
            let distinct = edges
                .iter()
                .flat_map(|&(u, v, _)| [u, v])
                .collect::<BTreeSet<_>>()
                .len();
            if distinct > declared_nodes {
                return Err(parse_err(
                    rec.header_line,
                    format!("{distinct} distinct nodes but {declared_nodes} declared"),
                ));
            }
            Ok(RawGraph {
                id: rec.id,
                declared_nodes,
                line: rec.header_line,
                edges,
            })
        })
        .collect()
}

/// Parses and validates every record; the first invalid graph is an error.
pub fn parse_graph_corpus(text: &str) -> Result<Vec<FlowGraph>, CorpusError> {
    parse_raw_graphs(text)?
        .into_iter()
        .map(|r| r.into_flow_graph().map_err(CorpusError::from))
        .collect()
}

/// Canonical text form: edges in stored order, node ids as labels.
pub fn write_graph_corpus<'a>(graphs: impl IntoIterator<Item = &'a FlowGraph>) -> String {
    let mut out = String::new();
    for g in graphs {
        let _ = writeln!(out, "# {}", g.id());
        let _ = writeln!(out, "{}", g.num_nodes());
        for e in g.edges() {
            let _ = writeln!(out, "{} {} {}", g.label(e.tail), g.label(e.head), e.flow);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthPath {
    pub weight: u64,
    /// External node ids.
    pub nodes: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub graph_id: String,
    pub paths: Vec<TruthPath>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TruthError {
    #[error("truth path {index}: node {label} not in graph")]
    UnknownNode { index: usize, label: u64 },
    #[error("truth path {index}: {source}")]
    NotInGraph { index: usize, source: PathError },
    #[error("truth for {graph_id} is not a flow decomposition: {reason}")]
    NotDecomposition { graph_id: String, reason: String },
}

impl GroundTruth {
    /// Maps the truth paths onto `g` and checks they decompose its flow.
    pub fn resolve(&self, g: &FlowGraph) -> Result<Decomposition, TruthError> {
        let mut paths = Vec::with_capacity(self.paths.len());
        for (index, p) in self.paths.iter().enumerate() {
            let nodes = p
                .nodes
                .iter()
                .map(|&label| g.node_of_label(label).ok_or(TruthError::UnknownNode { index, label }))
                .collect::<Result<Vec<_>, _>>()?;
            g.path_edges(&nodes)
                .map_err(|source| TruthError::NotInGraph { index, source })?;
            paths.push(WeightedPath {
                nodes,
                weight: p.weight,
            });
        }
        let d = Decomposition::new(paths);
        d.verify(g).map_err(|e| TruthError::NotDecomposition {
            graph_id: self.graph_id.clone(),
            reason: e.to_string(),
        })?;
        Ok(d)
    }

    pub fn label_paths(&self) -> Vec<Vec<u64>> {
        self.paths.iter().map(|p| p.nodes.clone()).collect()
    }
}

pub fn parse_truth_corpus(text: &str) -> Result<Vec<GroundTruth>, ParseError> {
    split_records(text)?
        .into_iter()
        .map(|rec| {
            let mut paths = Vec::new();
            for &(ln, l) in &rec.body {
                let (weight_tok, rest) = match l.split_once(':') {
                    Some((w, rest)) => (w.trim(), rest),
                    None => {
                        let mut it = l.splitn(2, char::is_whitespace);
                        (it.next().unwrap_or(""), it.next().unwrap_or(""))
                    }
                };
                let weight = parse_exact_integer(weight_tok)
                    .filter(|&w| w > 0)
                    .ok_or_else(|| parse_err(ln, format!("bad path weight {weight_tok:?}")))?;
                let nodes = rest
                    .split_whitespace()
                    .map(|t| {
                        t.parse::<u64>()
                            .map_err(|_| parse_err(ln, format!("bad node id {t:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if nodes.len() < 2 {
                    return Err(parse_err(ln, "a path needs at least two nodes"));
                }
                paths.push(TruthPath { weight, nodes });
            }
            Ok(GroundTruth {
                graph_id: rec.id,
                paths,
            })
        })
        .collect()
}

pub fn write_truth_corpus<'a>(truths: impl IntoIterator<Item = &'a GroundTruth>) -> String {
    let mut out = String::new();
    for t in truths {
        let _ = writeln!(out, "# {}", t.graph_id);
        for p in &t.paths {
            let nodes: Vec<String> = p.nodes.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}: {}", p.weight, nodes.join(" "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Violation;

    #[test]
    fn single_edge_record() {
        let gs = parse_graph_corpus("# g0\n2\n0 1 5\n").unwrap();
        assert_eq!(gs.len(), 1);
        let g = &gs[0];
        assert_eq!(g.id(), "g0");
        assert_eq!(g.edges().len(), 1);
        assert_eq!((g.edge(0).tail, g.edge(0).head, g.edge(0).flow), (0, 1, 5));
        assert_eq!((g.source(), g.sink()), (0, 1));
    }

    #[test]
    fn diamond_record() {
        let gs = parse_graph_corpus("# d\n4\n0 1 3\n0 2 4\n1 3 3\n2 3 4\n").unwrap();
        assert_eq!((gs[0].source(), gs[0].sink()), (0, 3));
    }

    #[test]
    fn conservation_violation_names_node() {
        let err = parse_graph_corpus("# bad\n3\n0 1 3\n1 2 5\n").unwrap_err();
        match err {
            CorpusError::Invalid(e) => assert_eq!(
                e.violations,
                vec![Violation::Conservation {
                    node: 1,
                    inflow: 3,
                    outflow: 5
                }]
            ),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_has_number() {
        let err = parse_raw_graphs("# g\n3\n0 1 2\n1 x 2\n").unwrap_err();
        assert_eq!(err.line, 4);
        let err = parse_raw_graphs("# g\n3\n0 1 2.5\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn decimal_flows_and_sparse_ids() {
        let gs = parse_graph_corpus("# sparse\n3\n10 20 4.0\n20 35 4.00\n").unwrap();
        let g = &gs[0];
        assert_eq!(g.labels(), &[10, 20, 35]);
        assert_eq!(g.edge(1).flow, 4);
        assert_eq!(g.node_of_label(35), Some(2));
    }

    #[test]
    fn multiple_records_in_order() {
        let text = "# a\n2\n0 1 1\n\n# b\n3\n0 1 2\n1 2 2\n";
        let gs = parse_graph_corpus(text).unwrap();
        assert_eq!(gs.iter().map(|g| g.id()).collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(write_graph_corpus(&gs), "# a\n2\n0 1 1\n# b\n3\n0 1 2\n1 2 2\n");
    }

    #[test]
    fn parallel_edges_rejected() {
        assert!(parse_graph_corpus("# p\n2\n0 1 1\n0 1 2\n").is_err());
    }

    #[test]
    fn truth_records() {
        let t = parse_truth_corpus("# g\n5: 0 1\n").unwrap();
        assert_eq!(
            t[0].paths,
            vec![TruthPath {
                weight: 5,
                nodes: vec![0, 1]
            }]
        );
        let t = parse_truth_corpus("# d\n3: 0 1 3\n4 0 2 3\n").unwrap();
        let g = parse_graph_corpus("# d\n4\n0 1 3\n0 2 4\n1 3 3\n2 3 4\n").unwrap();
        assert!(t[0].resolve(&g[0]).is_ok());
    }

    #[test]
    fn truth_path_not_in_graph() {
        let g = parse_graph_corpus("# d\n4\n0 1 3\n1 3 3\n").unwrap();
        let t = parse_truth_corpus("# d\n2: 0 2\n").unwrap();
        assert!(matches!(
            t[0].resolve(&g[0]),
            Err(TruthError::UnknownNode { .. }) | Err(TruthError::NotInGraph { .. })
        ));
        let g = parse_graph_corpus("# d\n4\n0 1 3\n0 2 4\n1 3 3\n2 3 4\n").unwrap();
        let t = parse_truth_corpus("# d\n2: 0 3\n").unwrap();
        assert!(matches!(t[0].resolve(&g[0]), Err(TruthError::NotInGraph { .. })));
    }

    #[test]
    fn exact_integer_tokens() {
        assert_eq!(parse_exact_integer("7"), Some(7));
        assert_eq!(parse_exact_integer("7.000"), Some(7));
        assert_eq!(parse_exact_integer("7.5"), None);
        assert_eq!(parse_exact_integer("-1"), None);
    }
}
