//! Exhaustive and occlusion baselines for small graphs.

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{node_induced_subgraph, AttributedGraph, NodeSet};
use crate::linalg::Matrix;
use crate::metrics::retains;
use crate::model::{Gates, GnnModel};

/// Largest graph the subset enumerations accept.
pub const MAX_ORACLE_NODES: usize = 14;

fn guard(g: &AttributedGraph) -> Result<()> {
    if g.node_count() > MAX_ORACLE_NODES {
        return Err(Error::TooLarge(g.node_count()));
    }
    Ok(())
}

fn check_k(g: &AttributedGraph, k: usize) -> Result<()> {
    if k > g.node_count() {
        return Err(Error::InvalidBudget(format!("k = {k} exceeds {} nodes", g.node_count())));
    }
    Ok(())
}

/// Probability of `class` on the subgraph induced by `keep`.
pub fn subset_probability(model: &GnnModel, g: &AttributedGraph, keep: &NodeSet, class: usize) -> Result<f64> {
    Ok(model.forward(&node_induced_subgraph(g, keep)?.graph)?.probability_of(class))
}

/// Every `k`-subset in lexicographic order with the probability of the
/// original prediction on its induced subgraph.
pub fn all_subset_probabilities(model: &GnnModel, g: &AttributedGraph, k: usize) -> Result<Vec<(NodeSet, f64)>> {
    guard(g)?;
    check_k(g, k)?;
    let class = model.forward(g)?.predicted_class;
    let subsets: Vec<Vec<usize>> = (0..g.node_count()).combinations(k).collect();
    subsets
        .into_par_iter()
        .map(|s| {
            let keep = NodeSet::new(s);
            let p = subset_probability(model, g, &keep, class)?;
            Ok((keep, p))
        })
        .collect()
}

/// The `k`-subset maximizing the probability of the original prediction;
/// the lexicographically first one on ties.
pub fn brute_force_best_subset(model: &GnnModel, g: &AttributedGraph, k: usize) -> Result<(NodeSet, f64)> {
    let all = all_subset_probabilities(model, g, k)?;
    let mut best = 0;
    for (i, (_, p)) in all.iter().enumerate() {
        if *p > all[best].1 {
            best = i;
        }
    }
    Ok(all.into_iter().nth(best).expect("at least one subset"))
}

/// Smallest `k ≥ 1` such that some `k`-subset keeps the original
/// prediction. The full graph always does, so the result is at most the
/// node count; the empty graph gives 0.
pub fn exhaustive_sparsity(model: &GnnModel, g: &AttributedGraph) -> Result<usize> {
    guard(g)?;
    let class = model.forward(g)?.predicted_class;
    for k in 1..=g.node_count() {
        let subsets: Vec<Vec<usize>> = (0..g.node_count()).combinations(k).collect();
        let found = subsets
            .into_par_iter()
            .map(|s| retains(model, g, &NodeSet::new(s), class))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .any(|b| b);
        if found {
            return Ok(k);
        }
    }
    Ok(g.node_count())
}

/// Drop in the original class probability when one arc is gated off
/// (both directions for undirected graphs).
pub fn occlusion_scores(model: &GnnModel, g: &AttributedGraph) -> Result<Vec<f64>> {
    let base = model.forward(g)?;
    let class = base.predicted_class;
    let attrs = Matrix::filled(g.node_count(), g.attr_dim(), 1.0);
    (0..g.arc_count())
        .into_par_iter()
        .map(|a| {
            let mut edge = vec![1.0; g.arc_count()];
            edge[a] = 0.0;
            if let Some(mate) = g.pair_mate(a) {
                edge[mate] = 0.0;
            }
            let p = model.forward_masked(g, Some(&Gates::new(edge, attrs.clone())))?;
            Ok(base.probability_of(class) - p.probability_of(class))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub graph_id: String,
    pub k: usize,
    pub best_subset: NodeSet,
    pub best_probability: f64,
    pub exhaustive_min_k: usize,
    pub occlusion_drop: Vec<f64>,
}

impl OracleResult {
    pub fn compute(model: &GnnModel, g: &AttributedGraph, k: usize) -> Result<Self> {
        let (best_subset, best_probability) = brute_force_best_subset(model, g, k)?;
        Ok(Self {
            graph_id: g.graph_id().to_string(),
            k,
            best_subset,
            best_probability,
            exhaustive_min_k: exhaustive_sparsity(model, g)?,
            occlusion_drop: occlusion_scores(model, g)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("oracle result serializes")
    }
}
