//! Prediction-preservation metrics for ranked node explanations.
//!
//! Every verdict compares against the model's prediction on the full graph,
//! not the dataset label.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::Explanation;
use crate::graph::{complement_set, node_induced_subgraph, AttributedGraph, NodeSet};
use crate::linalg::Matrix;
use crate::model::GnnModel;

/// How many top-ranked nodes to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    TopK(usize),
    /// Fraction of the graph's nodes, rounded half up, at least one.
    Rate(f64),
}

impl Budget {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Budget::Rate(r) if !(r > 0.0 && r <= 1.0) => Err(Error::InvalidBudget(format!("rate {r} outside (0, 1]"))),
            _ => Ok(()),
        }
    }

    /// Node count for a graph of `n` nodes; `None` when the budget exceeds it.
    pub fn size_for(&self, n: usize) -> Option<usize> {
        let k = match *self {
            Budget::TopK(k) => k,
            Budget::Rate(r) => ((r * n as f64 + 0.5).floor() as usize).max(1),
        };
        (k <= n).then_some(k)
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::TopK(k) => write!(f, "k={k}"),
            Budget::Rate(r) => write!(f, "r={r}"),
        }
    }
}

/// The first nodes of the ranking, or `None` when the graph is too small
/// for the budget.
pub fn extract_topk_nodes(explanation: &Explanation, budget: Budget) -> Result<Option<NodeSet>> {
    budget.validate()?;
    Ok(budget
        .size_for(explanation.node_ranking.len())
        .map(|k| NodeSet::new(explanation.node_ranking[..k].iter().copied())))
}

/// Class predicted for the zero-node graph.
pub fn default_prediction(model: &GnnModel) -> usize {
    model.empty_graph_prediction().predicted_class
}

/// Whether the subgraph induced by `keep` is still assigned `class`.
pub fn retains(model: &GnnModel, g: &AttributedGraph, keep: &NodeSet, class: usize) -> Result<bool> {
    let sub = node_induced_subgraph(g, keep)?;
    Ok(model.forward(&sub.graph)?.predicted_class == class)
}

/// Explanations looked up by graph id.
pub struct ExplanationIndex<'a>(HashMap<&'a str, &'a Explanation>);

impl<'a> ExplanationIndex<'a> {
    /// Fails with every graph id that has no explanation.
    pub fn new(graphs: &[&AttributedGraph], explanations: &'a [Explanation]) -> Result<Self> {
        let map: HashMap<&str, &Explanation> = explanations.iter().map(|e| (e.graph_id.as_str(), e)).collect();
        let missing: Vec<String> = graphs
            .iter()
            .filter(|g| !map.contains_key(g.graph_id()))
            .map(|g| g.graph_id().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingExplanation(missing));
        }
        for g in graphs {
            let e = map[g.graph_id()];
            if e.node_ranking.len() != g.node_count() {
                return Err(Error::ShapeMismatch(format!(
                    "explanation for `{}` ranks {} nodes, graph has {}",
                    g.graph_id(),
                    e.node_ranking.len(),
                    g.node_count()
                )));
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, g: &AttributedGraph) -> &'a Explanation {
        self.0[g.graph_id()]
    }
}

/// Verdicts for one graph under one budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphVerdict {
    pub graph_id: String,
    pub budget: Budget,
    /// Nodes kept; absent when the graph was skipped.
    pub kept: Option<usize>,
    pub skipped: bool,
    pub retained_explained: Option<bool>,
    pub retained_remaining: Option<bool>,
    pub retained_attribute: Option<bool>,
    /// Shortest retaining ranking prefix; only for graphs eligible for sparsity.
    pub min_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub budget: Budget,
    pub ep_explained: Option<f64>,
    pub ep_remaining: Option<f64>,
    pub ep_attribute: Option<f64>,
    pub attr_top: Option<usize>,
    pub sparsity: Option<f64>,
    pub eligible_count: usize,
    pub evaluated_count: usize,
    pub per_graph: Vec<GraphVerdict>,
}

fn fraction(flags: impl Iterator<Item = Option<bool>>) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for f in flags.flatten() {
        total += 1;
        hits += usize::from(f);
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

fn budget_verdicts(model: &GnnModel, g: &AttributedGraph, e: &Explanation, budget: Budget) -> Result<(Option<usize>, Option<bool>, Option<bool>)> {
    let original = model.forward(g)?.predicted_class;
    match extract_topk_nodes(e, budget)? {
        None => Ok((None, None, None)),
        Some(keep) => {
            let rest = complement_set(g, &keep)?;
            Ok((Some(keep.len()), Some(retains(model, g, &keep, original)?), Some(retains(model, g, &rest, original)?)))
        }
    }
}

fn per_graph<T: Send>(graphs: &[&AttributedGraph], f: impl Fn(&AttributedGraph) -> Result<T> + Sync) -> Result<Vec<T>> {
    graphs.par_iter().map(|g| f(g)).collect()
}

/// Fraction of non-skipped graphs whose top-budget subgraph keeps the
/// original prediction; `None` if every graph was skipped.
pub fn ep_explained(model: &GnnModel, graphs: &[&AttributedGraph], explanations: &[Explanation], budget: Budget) -> Result<Option<f64>> {
    budget.validate()?;
    let index = ExplanationIndex::new(graphs, explanations)?;
    let v = per_graph(graphs, |g| budget_verdicts(model, g, index.get(g), budget))?;
    Ok(fraction(v.into_iter().map(|(_, e, _)| e)))
}

/// As [`ep_explained`] on the nodes outside the top-budget set.
pub fn ep_remaining(model: &GnnModel, graphs: &[&AttributedGraph], explanations: &[Explanation], budget: Budget) -> Result<Option<f64>> {
    budget.validate()?;
    let index = ExplanationIndex::new(graphs, explanations)?;
    let v = per_graph(graphs, |g| budget_verdicts(model, g, index.get(g), budget))?;
    Ok(fraction(v.into_iter().map(|(_, _, r)| r)))
}

/// Zeroes every attribute of each node except its `top_t` best-scored ones.
pub fn keep_top_attributes(g: &AttributedGraph, e: &Explanation, top_t: usize) -> Result<AttributedGraph> {
    let (n, d) = (g.node_count(), g.attr_dim());
    if e.attr_scores.rows() != n || e.attr_scores.cols() != d {
        return Err(Error::MissingAttributeScores(g.graph_id().to_string()));
    }
    let mut x = Matrix::zeros(n, d);
    for i in 0..n {
        for c in e.top_attributes(i, top_t) {
            x.set(i, c, g.attributes().get(i, c));
        }
    }
    g.with_attributes(x)
}

fn attribute_verdict(model: &GnnModel, g: &AttributedGraph, e: &Explanation, top_t: usize) -> Result<bool> {
    let original = model.forward(g)?.predicted_class;
    Ok(model.forward(&keep_top_attributes(g, e, top_t)?)?.predicted_class == original)
}

/// Fraction of graphs that keep their prediction with only each node's
/// `top_t` attributes left intact.
pub fn ep_attribute(model: &GnnModel, graphs: &[&AttributedGraph], explanations: &[Explanation], top_t: usize) -> Result<Option<f64>> {
    let index = ExplanationIndex::new(graphs, explanations)?;
    let v = per_graph(graphs, |g| attribute_verdict(model, g, index.get(g), top_t))?;
    Ok(fraction(v.into_iter().map(Some)))
}

/// Smallest `k` whose ranking prefix keeps `class`; the node count if none does.
pub fn prefix_min_k(model: &GnnModel, g: &AttributedGraph, ranking: &[usize], class: usize) -> Result<usize> {
    for k in 1..=ranking.len() {
        if retains(model, g, &NodeSet::new(ranking[..k].iter().copied()), class)? {
            return Ok(k);
        }
    }
    Ok(g.node_count())
}

/// `min_k` for graphs whose prediction differs from the empty-graph
/// default, `None` for the rest.
fn sparsity_entry(model: &GnnModel, g: &AttributedGraph, e: &Explanation, default: usize) -> Result<Option<usize>> {
    let original = model.forward(g)?.predicted_class;
    if original == default {
        return Ok(None);
    }
    prefix_min_k(model, g, &e.node_ranking, original).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    /// Mean `min_k` over eligible graphs; absent when none are eligible.
    pub average: Option<f64>,
    pub eligible_count: usize,
    pub min_k: Vec<Option<usize>>,
}

pub fn sparsity(model: &GnnModel, graphs: &[&AttributedGraph], explanations: &[Explanation]) -> Result<Sparsity> {
    let index = ExplanationIndex::new(graphs, explanations)?;
    let default = default_prediction(model);
    let min_k = per_graph(graphs, |g| sparsity_entry(model, g, index.get(g), default))?;
    let eligible: Vec<usize> = min_k.iter().flatten().copied().collect();
    let average = (!eligible.is_empty()).then(|| eligible.iter().sum::<usize>() as f64 / eligible.len() as f64);
    Ok(Sparsity { average, eligible_count: eligible.len(), min_k })
}

/// Every metric for one budget in a single pass over the graphs.
pub fn evaluate(
    model: &GnnModel,
    graphs: &[&AttributedGraph],
    explanations: &[Explanation],
    budget: Budget,
    attr_top: Option<usize>,
) -> Result<EvalReport> {
    budget.validate()?;
    let index = ExplanationIndex::new(graphs, explanations)?;
    let default = default_prediction(model);
    let per = per_graph(graphs, |g| {
        let e = index.get(g);
        let (kept, explained, remaining) = budget_verdicts(model, g, e, budget)?;
        let attribute = attr_top.map(|t| attribute_verdict(model, g, e, t)).transpose()?;
        let min_k = sparsity_entry(model, g, e, default)?;
        Ok(GraphVerdict {
            graph_id: g.graph_id().to_string(),
            budget,
            kept,
            skipped: kept.is_none(),
            retained_explained: explained,
            retained_remaining: remaining,
            retained_attribute: attribute,
            min_k,
        })
    })?;
    let eligible: Vec<usize> = per.iter().filter_map(|v| v.min_k).collect();
    Ok(EvalReport {
        budget,
        ep_explained: fraction(per.iter().map(|v| v.retained_explained)),
        ep_remaining: fraction(per.iter().map(|v| v.retained_remaining)),
        ep_attribute: fraction(per.iter().map(|v| v.retained_attribute)),
        attr_top,
        sparsity: (!eligible.is_empty()).then(|| eligible.iter().sum::<usize>() as f64 / eligible.len() as f64),
        eligible_count: eligible.len(),
        evaluated_count: per.iter().filter(|v| !v.skipped).count(),
        per_graph: per,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// One CSV row per graph verdict: `graph_id, budget, retained_explained,
/// retained_remaining, min_k`. Skipped graphs leave the verdicts blank.
pub fn write_csv<'a, W: Write>(out: W, verdicts: impl IntoIterator<Item = &'a GraphVerdict>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(["graph_id", "budget", "retained_explained", "retained_remaining", "min_k"]).map_err(io)?;
    let flag = |b: Option<bool>| b.map_or(String::new(), |b| u8::from(b).to_string());
    for v in verdicts {
        let budget = match v.budget {
            Budget::TopK(k) => k.to_string(),
            Budget::Rate(r) => r.to_string(),
        };
        w.write_record([
            v.graph_id.clone(),
            budget,
            flag(v.retained_explained),
            flag(v.retained_remaining),
            v.min_k.map_or(String::new(), |k| k.to_string()),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
