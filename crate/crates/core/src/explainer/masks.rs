//! Mask parameters and how they are tied to arcs and attribute cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::graph::AttributedGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeSharing {
    #[default]
    Independent,
    /// Both arcs of an undirected edge read one logit.
    PairShared,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrSharing {
    #[default]
    Independent,
    /// One logit per node, shared by its attributes.
    PerNode,
    /// One logit per attribute column, shared by every node.
    Global,
}

pub const MASK_INIT_STD: f64 = 0.1;

/// Pre-sigmoid logits plus the map from each arc / attribute cell to the
/// logit it reads.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    pub edge_logits: Vec<f64>,
    pub attr_logits: Vec<f64>,
    edge_param: Vec<usize>,
    attr_param: Vec<usize>,
    edge_sharing: EdgeSharing,
    attr_sharing: AttrSharing,
}

impl MaskSet {
    /// Logits drawn from `N(0, 0.1²)`; edge logits first, then attribute logits.
    pub fn init(g: &AttributedGraph, edge_sharing: EdgeSharing, attr_sharing: AttrSharing, seed: u64) -> Self {
        let edge_param: Vec<usize> = match edge_sharing {
            EdgeSharing::PairShared if g.is_undirected() => (0..g.arc_count()).map(|a| a / 2).collect(),
            _ => (0..g.arc_count()).collect(),
        };
        let n_edge = edge_param.iter().max().map_or(0, |&p| p + 1);
        let (n, d) = (g.node_count(), g.attr_dim());
        let (attr_param, n_attr): (Vec<usize>, usize) = match attr_sharing {
            AttrSharing::Independent => ((0..n * d).collect(), n * d),
            AttrSharing::PerNode => ((0..n * d).map(|c| c / d.max(1)).collect(), n),
            AttrSharing::Global => ((0..n * d).map(|c| c % d.max(1)).collect(), d),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, MASK_INIT_STD).expect("valid std");
        let edge_logits = (0..n_edge).map(|_| normal.sample(&mut rng)).collect();
        let attr_logits = (0..n_attr).map(|_| normal.sample(&mut rng)).collect();
        Self { edge_logits, attr_logits, edge_param, attr_param, edge_sharing, attr_sharing }
    }

    pub fn edge_sharing(&self) -> EdgeSharing {
        self.edge_sharing
    }

    pub fn attr_sharing(&self) -> AttrSharing {
        self.attr_sharing
    }

    /// Logit index read by arc `a`.
    pub fn edge_param(&self, arc: usize) -> usize {
        self.edge_param[arc]
    }

    /// Logit index read by attribute cell `node · attr_dim + col`.
    pub fn attr_param(&self, cell: usize) -> usize {
        self.attr_param[cell]
    }

    pub fn edge_params(&self) -> &[usize] {
        &self.edge_param
    }

    pub fn attr_params(&self) -> &[usize] {
        &self.attr_param
    }

    pub fn is_finite(&self) -> bool {
        self.edge_logits.iter().chain(&self.attr_logits).all(|v| v.is_finite())
    }
}
