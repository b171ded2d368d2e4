//! From arc and attribute scores to node scores and a ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;

/// Floor applied to attribute scores inside the geometric mean.
pub const SCORE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agg {
    #[default]
    Max,
    Mean,
}

impl Agg {
    /// `None` for an empty input.
    pub fn apply(self, values: impl IntoIterator<Item = f64>) -> Option<f64> {
        let mut count = 0usize;
        let mut acc = match self {
            Agg::Max => f64::NEG_INFINITY,
            Agg::Mean => 0.0,
        };
        for v in values {
            count += 1;
            match self {
                Agg::Max => acc = acc.max(v),
                Agg::Mean => acc += v,
            }
        }
        match (count, self) {
            (0, _) => None,
            (_, Agg::Max) => Some(acc),
            (c, Agg::Mean) => Some(acc / c as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairAgg {
    #[default]
    Mean,
    Max,
    Min,
}

impl PairAgg {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            PairAgg::Mean => (a + b) / 2.0,
            PairAgg::Max => a.max(b),
            PairAgg::Min => a.min(b),
        }
    }
}

/// Replaces both arc scores of every undirected edge with their aggregate.
pub fn pair_aggregate_edge_scores(scores: &mut [f64], g: &AttributedGraph, agg: PairAgg) -> Result<()> {
    if !g.is_undirected() {
        return Err(Error::NotUndirected);
    }
    if scores.len() != g.arc_count() {
        return Err(Error::ShapeMismatch(format!("{} scores for {} arcs", scores.len(), g.arc_count())));
    }
    for pair in scores.chunks_exact_mut(2) {
        let v = agg.apply(pair[0], pair[1]);
        pair[0] = v;
        pair[1] = v;
    }
    Ok(())
}

/// Geometric mean of one node's attribute scores, each floored at 1e−12.
pub fn node_attr_importance(attr_scores: &[f64]) -> f64 {
    if attr_scores.is_empty() {
        return 1.0;
    }
    let log_sum: f64 = attr_scores.iter().map(|s| s.max(SCORE_FLOOR).ln()).sum();
    (log_sum / attr_scores.len() as f64).exp().clamp(0.0, 1.0)
}

/// Importance of the message along an arc: its score times the source
/// node's attribute importance.
pub fn message_importance(arc_score: f64, source_attr_importance: f64) -> f64 {
    arc_score * source_attr_importance
}

/// Per-node scores: `agg1` over outgoing messages and over incoming
/// messages, then `agg2` over whichever sides exist. A node without arcs
/// keeps its attribute importance.
pub fn node_importance(
    g: &AttributedGraph,
    arc_scores: &[f64],
    node_attr: &[f64],
    agg1: Agg,
    agg2: Agg,
) -> Vec<f64> {
    let n = g.node_count();
    let mut outgoing: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut incoming: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (arc, &p) in g.arcs().iter().zip(arc_scores) {
        let w = message_importance(p, node_attr[arc.src]);
        outgoing[arc.src].push(w);
        incoming[arc.dst].push(w);
    }
    (0..n)
        .map(|i| {
            let sides = [agg1.apply(outgoing[i].iter().copied()), agg1.apply(incoming[i].iter().copied())];
            agg2.apply(sides.into_iter().flatten()).unwrap_or(node_attr[i])
        })
        .collect()
}

/// Node indices by descending score; the smaller index wins ties.
pub fn rank_nodes(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Directedness;
    use crate::linalg::Matrix;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn pair_aggregation() {
        let g = AttributedGraph::new("e", 2, &[(0, 1)], Matrix::zeros(2, 1), Directedness::Undirected, None).unwrap();
        let mut s = vec![0.2, 0.8];
        pair_aggregate_edge_scores(&mut s, &g, PairAgg::Mean).unwrap();
        assert!(close(s[0], 0.5) && close(s[1], 0.5));
        let mut s = vec![0.2, 0.8];
        pair_aggregate_edge_scores(&mut s, &g, PairAgg::Max).unwrap();
        assert_eq!(s, vec![0.8, 0.8]);
        for agg in [PairAgg::Mean, PairAgg::Max, PairAgg::Min] {
            let mut s = vec![0.3, 0.3];
            pair_aggregate_edge_scores(&mut s, &g, agg).unwrap();
            assert_eq!(s, vec![0.3, 0.3]);
        }
        let d = AttributedGraph::new("d", 2, &[(0, 1)], Matrix::zeros(2, 1), Directedness::Directed, None).unwrap();
        assert!(matches!(pair_aggregate_edge_scores(&mut [0.1], &d, PairAgg::Mean), Err(Error::NotUndirected)));
    }

    #[test]
    fn geometric_mean_examples() {
        assert!(close(node_attr_importance(&[0.5, 0.5, 0.5]), 0.5));
        assert!(close(node_attr_importance(&[0.25, 1.0]), 0.5));
        assert!(close(node_attr_importance(&[0.1, 0.4, 0.9]), node_attr_importance(&[0.9, 0.1, 0.4])));
        let tiny = node_attr_importance(&[0.0, 1.0]);
        assert!(tiny > 0.0 && close(tiny, 1e-6));
    }

    #[test]
    fn message_examples() {
        assert!(close(message_importance(1.0, 0.7), 0.7));
        assert_eq!(message_importance(0.0, 0.9), 0.0);
        assert!(close(message_importance(0.5, 0.5), 0.25));
    }

    #[test]
    fn node_score_examples() {
        // 0 → 1 → 2: node 1 sends 0.6 and receives 0.4.
        let g = AttributedGraph::new("p", 3, &[(0, 1), (1, 2)], Matrix::zeros(3, 1), Directedness::Directed, None)
            .unwrap();
        let w = node_importance(&g, &[0.4, 0.6], &[1.0; 3], Agg::Max, Agg::Max);
        assert!(close(w[1], 0.6));

        // Node 0 only sends, {0.2, 0.8}.
        let g = AttributedGraph::new("s", 3, &[(0, 1), (0, 2)], Matrix::zeros(3, 1), Directedness::Directed, None)
            .unwrap();
        let w = node_importance(&g, &[0.2, 0.8], &[1.0; 3], Agg::Max, Agg::Mean);
        assert!(close(w[0], 0.8));

        for (a1, a2) in [(Agg::Max, Agg::Max), (Agg::Mean, Agg::Max), (Agg::Max, Agg::Mean), (Agg::Mean, Agg::Mean)] {
            let w = node_importance(&g, &[0.35, 0.35], &[1.0; 3], a1, a2);
            assert!(w.iter().all(|&v| close(v, 0.35)));
        }
    }

    #[test]
    fn isolated_node_keeps_attribute_importance() {
        let g = AttributedGraph::new("i", 3, &[(0, 1)], Matrix::zeros(3, 1), Directedness::Directed, None).unwrap();
        let w = node_importance(&g, &[0.9], &[0.5, 0.6, 0.3], Agg::Max, Agg::Max);
        assert_eq!(w[2], 0.3);
        assert!(close(w[0], 0.45));
    }

    #[test]
    fn ranking_breaks_ties_by_index() {
        assert_eq!(rank_nodes(&[0.2, 0.9, 0.2, 0.5]), vec![1, 3, 0, 2]);
        assert_eq!(rank_nodes(&[]), Vec::<usize>::new());
    }
}
