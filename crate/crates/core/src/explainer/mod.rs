//! Edge and attribute mask learning, and node scores derived from the masks.

mod hard_concrete;
mod learn;
mod masks;
pub mod scoring;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::Matrix;
use crate::model::GnnModel;

pub use hard_concrete::{gate, importance_from_mask, noise, sample_hard_concrete, sigmoid, Gate, HardConcreteConfig, NoiseKind};
pub use learn::{learn_masks, EpochRecord, LearnedMasks};
pub use masks::{AttrSharing, EdgeSharing, MaskSet, MASK_INIT_STD};
pub use scoring::{Agg, PairAgg};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainMode {
    #[default]
    Full,
    /// Attribute gates fixed at 1; node scores come from arcs alone.
    EdgeOnly,
    /// Edge gates fixed at 1; one attribute logit per node is the node score.
    AttributeOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda_edge_size: f64,
    pub lambda_attr_size: f64,
    pub lambda_edge_entropy: f64,
    pub lambda_attr_entropy: f64,
    pub agg1: Agg,
    pub agg2: Agg,
    pub pair_agg: PairAgg,
    pub mode: ExplainMode,
    pub edge_sharing: EdgeSharing,
    pub attr_sharing: AttrSharing,
    pub hard_concrete: HardConcreteConfig,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.01,
            lambda_edge_size: 0.005,
            lambda_attr_size: 0.05,
            lambda_edge_entropy: 0.01,
            lambda_attr_entropy: 0.1,
            agg1: Agg::Max,
            agg2: Agg::Max,
            pair_agg: PairAgg::Mean,
            mode: ExplainMode::Full,
            edge_sharing: EdgeSharing::Independent,
            attr_sharing: AttrSharing::Independent,
            hard_concrete: HardConcreteConfig::default(),
        }
    }
}

impl ExplainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Validation("explainer needs at least one epoch".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!("learning rate {} must be positive", self.learning_rate)));
        }
        let lambdas = [self.lambda_edge_size, self.lambda_attr_size, self.lambda_edge_entropy, self.lambda_attr_entropy];
        if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::Validation("regularization weights must be non-negative".into()));
        }
        self.hard_concrete.validate()
    }

    /// Attribute-only explanations always learn one logit per node.
    pub fn effective_attr_sharing(&self) -> AttrSharing {
        match self.mode {
            ExplainMode::AttributeOnly => AttrSharing::PerNode,
            _ => self.attr_sharing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub src: usize,
    pub dst: usize,
    pub score: f64,
}

/// Importance scores for one graph. `edge_scores` follows the graph's arc order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub graph_id: String,
    pub predicted_class: usize,
    pub probability: f64,
    pub node_scores: Vec<f64>,
    pub node_attr_scores: Vec<f64>,
    pub node_ranking: Vec<usize>,
    pub edge_scores: Vec<EdgeScore>,
    pub attr_scores: Matrix,
    pub config: ExplainConfig,
    pub seed: u64,
}

impl Explanation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("explanation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn node_count(&self) -> usize {
        self.node_scores.len()
    }

    /// Attribute column indices of `node`, best first, smaller index on ties.
    pub fn top_attributes(&self, node: usize, t: usize) -> Vec<usize> {
        let row = self.attr_scores.row(node);
        let mut cols: Vec<usize> = (0..row.len()).collect();
        cols.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        cols.truncate(t);
        cols
    }
}

/// Learns masks on `g` and returns the resulting scores and ranking.
pub fn explain(model: &GnnModel, g: &AttributedGraph, config: &ExplainConfig) -> Result<Explanation> {
    Ok(learn_masks(model, g, config)?.explanation)
}
