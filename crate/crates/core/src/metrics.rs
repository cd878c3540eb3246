//! Quality of reported paths against ground truth, counted in nodes.

use crate::corpus::GroundTruth;
use crate::graph::contains_subpath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Correct length over total length.
    #[default]
    LengthWeighted,
    /// Plain mean of per-path correctness.
    PerPath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphMetrics {
    pub graph_id: String,
    pub weighted_precision: f64,
    pub max_coverage: f64,
    pub f_score: f64,
    pub t: usize,
    /// Nothing was reported; precision is 1 by convention.
    pub empty: bool,
}

fn is_correct(path: &[u64], truth: &[Vec<u64>]) -> bool {
    truth.iter().any(|t| contains_subpath(t, path))
}

pub fn weighted_precision(reported: &[Vec<u64>], truth: &[Vec<u64>]) -> f64 {
    precision(reported, truth, Averaging::LengthWeighted)
}

pub fn precision(reported: &[Vec<u64>], truth: &[Vec<u64>], averaging: Averaging) -> f64 {
    if reported.is_empty() {
        return 1.0;
    }
    match averaging {
        Averaging::LengthWeighted => {
            let total: usize = reported.iter().map(Vec::len).sum();
            let good: usize = reported.iter().filter(|p| is_correct(p, truth)).map(|p| p.len()).sum();
            if total == 0 {
                1.0
            } else {
                good as f64 / total as f64
            }
        }
        Averaging::PerPath => {
            let good = reported.iter().filter(|p| is_correct(p, truth)).count();
            good as f64 / reported.len() as f64
        }
    }
}

fn longest_common_run(a: &[u64], b: &[u64]) -> usize {
    let mut best = 0;
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            if x == y {
                cur[j + 1] = prev[j] + 1;
                best = best.max(cur[j + 1]);
            }
        }
        prev = cur;
    }
    best
}

/// Longest run of `truth_path` that also appears contiguously in a reported
/// path, over the length of `truth_path`.
pub fn max_coverage(truth_path: &[u64], reported: &[Vec<u64>]) -> f64 {
    if truth_path.is_empty() {
        return 0.0;
    }
    let best = reported
        .iter()
        .map(|r| longest_common_run(truth_path, r))
        .max()
        .unwrap_or(0);
    best as f64 / truth_path.len() as f64
}

pub fn harmonic(p: f64, c: f64) -> f64 {
    if p + c == 0.0 {
        0.0
    } else {
        2.0 * p * c / (p + c)
    }
}

pub fn graph_metrics(reported: &[Vec<u64>], truth: &GroundTruth, averaging: Averaging) -> GraphMetrics {
    let truth_paths: Vec<Vec<u64>> = truth.paths.iter().map(|p| p.nodes.clone()).collect();
    let p = precision(reported, &truth_paths, averaging);
    let c = if truth_paths.is_empty() {
        0.0
    } else {
        truth_paths.iter().map(|t| max_coverage(t, reported)).sum::<f64>() / truth_paths.len() as f64
    };
    GraphMetrics {
        graph_id: truth.graph_id.clone(),
        weighted_precision: p,
        max_coverage: c,
        f_score: harmonic(p, c),
        t: truth_paths.len(),
        empty: reported.is_empty(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketMetrics {
    pub label: String,
    pub graphs: usize,
    pub weighted_precision: f64,
    pub max_coverage: f64,
    pub f_score: f64,
}

/// Means over graphs with `t <= 10`, `t <= 15`, and over all graphs.
pub fn corpus_metrics(per_graph: &[GraphMetrics]) -> Vec<BucketMetrics> {
    let bucket = |label: &str, limit: Option<usize>| {
        let members: Vec<&GraphMetrics> = per_graph.iter().filter(|m| limit.is_none_or(|l| m.t <= l)).collect();
        let n = members.len();
        let mean = |f: fn(&GraphMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                members.iter().map(|m| f(m)).sum::<f64>() / n as f64
            }
        };
        BucketMetrics {
            label: label.to_string(),
            graphs: n,
            weighted_precision: mean(|m| m.weighted_precision),
            max_coverage: mean(|m| m.max_coverage),
            f_score: mean(|m| m.f_score),
        }
    };
    vec![
        bucket("t<=10", Some(10)),
        bucket("t<=15", Some(15)),
        bucket("all", None),
    ]
}

/// Per-graph rows, a blank line, then one row per bucket.
pub fn write_metrics_csv(per_graph: &[GraphMetrics], buckets: &[BucketMetrics]) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(["graph_id", "t", "wprec", "maxcov", "fscore", "note"])
        .unwrap();
    for m in per_graph {
        w.write_record([
            m.graph_id.clone(),
            m.t.to_string(),
            format!("{:.6}", m.weighted_precision),
            format!("{:.6}", m.max_coverage),
            format!("{:.6}", m.f_score),
            if m.empty { "empty".into() } else { String::new() },
        ])
        .unwrap();
    }
    let mut out = String::from_utf8(w.into_inner().unwrap()).unwrap();
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bucket", "graphs", "wprec", "maxcov", "fscore"])
        .unwrap();
    for b in buckets {
        w.write_record([
            b.label.clone(),
            b.graphs.to_string(),
            format!("{:.6}", b.weighted_precision),
            format!("{:.6}", b.max_coverage),
            format!("{:.6}", b.f_score),
        ])
        .unwrap();
    }
    out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TruthPath;

    fn truth(paths: &[&[u64]]) -> GroundTruth {
        GroundTruth {
            graph_id: "g".into(),
            paths: paths
                .iter()
                .map(|p| TruthPath {
                    weight: 1,
                    nodes: p.to_vec(),
                })
                .collect(),
        }
    }

    #[test]
    fn precision_examples() {
        let t = vec![vec![0, 1, 2, 3, 4], vec![0, 5, 3, 4]];
        assert_eq!(weighted_precision(&t, &t), 1.0);
        assert_eq!(weighted_precision(&[vec![0, 1, 2, 3], vec![9, 8, 7, 6]], &t), 0.5);
        // skipping node 2 is not a subpath
        assert_eq!(weighted_precision(&[vec![1, 3]], &t), 0.0);
        assert_eq!(weighted_precision(&[], &t), 1.0);
        assert_eq!(precision(&[vec![0, 1, 2, 3], vec![9, 8]], &t, Averaging::PerPath), 0.5);
    }

    #[test]
    fn coverage_examples() {
        let p = [0, 1, 2, 3, 4];
        assert_eq!(max_coverage(&p, &[p.to_vec()]), 1.0);
        assert_eq!(max_coverage(&p, &[vec![7, 1, 2, 3, 8], vec![3, 4]]), 0.6);
        assert_eq!(max_coverage(&p, &[vec![8, 9]]), 0.0);
    }

    #[test]
    fn graph_level() {
        let t = truth(&[&[0, 1, 2, 3], &[0, 5, 6, 3]]);
        let m = graph_metrics(&[vec![0, 1, 2, 3], vec![0, 5, 6, 3]], &t, Averaging::LengthWeighted);
        assert_eq!(
            (m.weighted_precision, m.max_coverage, m.f_score, m.t),
            (1.0, 1.0, 1.0, 2)
        );
        let m = graph_metrics(&[vec![0, 1], vec![0, 5]], &t, Averaging::LengthWeighted);
        assert_eq!((m.weighted_precision, m.max_coverage), (1.0, 0.5));
        assert!((m.f_score - 2.0 / 3.0).abs() < 1e-12);
        let m = graph_metrics(&[], &t, Averaging::LengthWeighted);
        assert_eq!((m.weighted_precision, m.max_coverage, m.f_score), (1.0, 0.0, 0.0));
        assert!(m.empty);
    }

    #[test]
    fn corpus_level() {
        let mk = |id: &str, f: f64, t: usize| GraphMetrics {
            graph_id: id.into(),
            weighted_precision: 1.0,
            max_coverage: 1.0,
            f_score: f,
            t,
            empty: false,
        };
        let b = corpus_metrics(&[mk("a", 0.8, 3), mk("b", 1.0, 12)]);
        assert_eq!(b[0].graphs, 1);
        assert_eq!(b[0].f_score, 0.8);
        assert_eq!(b[1].graphs, 2);
        assert!((b[2].f_score - 0.9).abs() < 1e-12);
        let single = corpus_metrics(&[mk("a", 0.7, 1)]);
        assert!(single.iter().all(|x| x.f_score == 0.7));
        let csv = write_metrics_csv(&[mk("a", 0.8, 3)], &b);
        assert!(csv.starts_with("graph_id,t,wprec,maxcov,fscore,note\na,3,1.000000,1.000000,0.800000,\n\nbucket,"));
    }
}
