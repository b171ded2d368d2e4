//! Mask optimization against the masked cross-entropy plus size and
//! entropy penalties.

use crate::adam::Adam;
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::Matrix;
use crate::model::{Gates, GnnModel};

use super::hard_concrete::{gate, importance_from_mask, noise, sigmoid, NoiseKind};
use super::masks::{AttrSharing, MaskSet};
use super::{scoring, EdgeScore, ExplainConfig, ExplainMode, Explanation};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full objective at the sampled gates.
    pub objective: f64,
    /// Mean of `σ(m/β)` over arcs before this epoch's update.
    pub mean_edge_score: f64,
}

#[derive(Debug, Clone)]
pub struct LearnedMasks {
    pub masks: MaskSet,
    pub explanation: Explanation,
    pub history: Vec<EpochRecord>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Size and binary-entropy penalties on `σ(m)`, averaged over the arcs or
/// cells that read each logit. Adds their gradient into `grad`.
fn penalties(logits: &[f64], params: &[usize], lambda_size: f64, lambda_entropy: f64, grad: &mut [f64]) -> f64 {
    if params.is_empty() {
        return 0.0;
    }
    let scale = 1.0 / params.len() as f64;
    let mut total = 0.0;
    for &k in params {
        let m = logits[k];
        let p = sigmoid(m);
        let entropy = p * softplus(-m) + (1.0 - p) * softplus(m);
        total += scale * (lambda_size * p + lambda_entropy * entropy);
        // dσ/dm = p(1−p);  dH/dm = −m p(1−p).
        grad[k] += scale * p * (1.0 - p) * (lambda_size - lambda_entropy * m);
    }
    total
}

fn sampled_gates(logits: &[f64], cfg: &super::HardConcreteConfig, epoch: usize, kind: NoiseKind) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = noise(cfg, epoch, kind, logits.len());
    let mut values = Vec::with_capacity(logits.len());
    let mut slopes = Vec::with_capacity(logits.len());
    for (&m, &u) in logits.iter().zip(&u) {
        let g = gate(m, cfg, u)?;
        values.push(g.value);
        slopes.push(g.d_logit);
    }
    Ok((values, slopes))
}

/// Learns masks explaining the model's own prediction on `g`.
pub fn learn_masks(model: &GnnModel, g: &AttributedGraph, config: &ExplainConfig) -> Result<LearnedMasks> {
    config.validate()?;
    let original = model.forward(g)?;
    let target = original.predicted_class;
    let hc = &config.hard_concrete;
    let learn_edges = config.mode != ExplainMode::AttributeOnly;
    let learn_attrs = config.mode != ExplainMode::EdgeOnly;
    let mut masks = MaskSet::init(g, config.edge_sharing, config.effective_attr_sharing(), hc.seed);

    let n_edge = if learn_edges { masks.edge_logits.len() } else { 0 };
    let n_attr = if learn_attrs { masks.attr_logits.len() } else { 0 };
    let mut adam = Adam::new(n_edge + n_attr, config.learning_rate);
    let mut params: Vec<f64> = masks.edge_logits[..n_edge].iter().chain(&masks.attr_logits[..n_attr]).copied().collect();
    let mut history = Vec::with_capacity(config.epochs);
    let (n, d) = (g.node_count(), g.attr_dim());

    for epoch in 0..config.epochs {
        let (edge_logits, attr_logits) = params.split_at(n_edge);
        let mut grad = vec![0.0; params.len()];

        let (edge_gate, edge_slope) = if learn_edges {
            let (v, s) = sampled_gates(edge_logits, hc, epoch, NoiseKind::Edge)?;
            (masks.edge_params().iter().map(|&k| v[k]).collect(), s)
        } else {
            (vec![1.0; g.arc_count()], Vec::new())
        };
        let (attr_gate, attr_slope) = if learn_attrs {
            let (v, s) = sampled_gates(attr_logits, hc, epoch, NoiseKind::Attribute)?;
            (Matrix::from_vec(n, d, masks.attr_params().iter().map(|&k| v[k]).collect()), s)
        } else {
            (Matrix::filled(n, d, 1.0), Vec::new())
        };

        let mg = model.mask_gradients(g, &Gates::new(edge_gate, attr_gate), target)?;
        let mut objective = mg.loss;
        let (edge_grad, attr_grad) = grad.split_at_mut(n_edge);
        if learn_edges {
            for (a, &k) in masks.edge_params().iter().enumerate() {
                edge_grad[k] += mg.edge[a] * edge_slope[k];
            }
            objective += penalties(
                edge_logits,
                masks.edge_params(),
                config.lambda_edge_size,
                config.lambda_edge_entropy,
                edge_grad,
            );
        }
        if learn_attrs {
            for (c, &k) in masks.attr_params().iter().enumerate() {
                attr_grad[k] += mg.attributes.as_slice()[c] * attr_slope[k];
            }
            objective += penalties(
                attr_logits,
                masks.attr_params(),
                config.lambda_attr_size,
                config.lambda_attr_entropy,
                attr_grad,
            );
        }
        if !objective.is_finite() || grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, detail: format!("mask objective {objective} on `{}`", g.graph_id()) });
        }
        let mean_edge_score = if g.arc_count() == 0 {
            0.0
        } else {
            let sum: f64 = masks
                .edge_params()
                .iter()
                .map(|&k| if learn_edges { importance_from_mask(edge_logits[k], hc.beta) } else { 1.0 })
                .sum();
            sum / g.arc_count() as f64
        };
        history.push(EpochRecord { epoch, objective, mean_edge_score });
        adam.update(&mut params, &grad);
    }

    masks.edge_logits[..n_edge].copy_from_slice(&params[..n_edge]);
    masks.attr_logits[..n_attr].copy_from_slice(&params[n_edge..]);
    let explanation = score(g, &masks, config, target, original.probability_of(target))?;
    Ok(LearnedMasks { masks, explanation, history })
}

/// Turns learned logits into the reported scores and ranking.
pub(crate) fn score(
    g: &AttributedGraph,
    masks: &MaskSet,
    config: &ExplainConfig,
    predicted_class: usize,
    probability: f64,
) -> Result<Explanation> {
    let beta = config.hard_concrete.beta;
    let (n, d) = (g.node_count(), g.attr_dim());
    let mut arc_scores: Vec<f64> = match config.mode {
        ExplainMode::AttributeOnly => vec![1.0; g.arc_count()],
        _ => masks.edge_params().iter().map(|&k| importance_from_mask(masks.edge_logits[k], beta)).collect(),
    };
    if g.is_undirected() && config.mode != ExplainMode::AttributeOnly {
        scoring::pair_aggregate_edge_scores(&mut arc_scores, g, config.pair_agg)?;
    }
    let attr_scores = match config.mode {
        ExplainMode::EdgeOnly => Matrix::filled(n, d, 1.0),
        _ => Matrix::from_vec(
            n,
            d,
            masks.attr_params().iter().map(|&k| importance_from_mask(masks.attr_logits[k], beta)).collect(),
        ),
    };
    let node_attr_scores: Vec<f64> = match (config.mode, masks.attr_sharing()) {
        (ExplainMode::EdgeOnly, _) => vec![1.0; n],
        (_, AttrSharing::PerNode) => (0..n).map(|i| importance_from_mask(masks.attr_logits[i], beta)).collect(),
        _ => (0..n).map(|i| scoring::node_attr_importance(attr_scores.row(i))).collect(),
    };
    let node_scores = match config.mode {
        ExplainMode::AttributeOnly => node_attr_scores.clone(),
        _ => scoring::node_importance(g, &arc_scores, &node_attr_scores, config.agg1, config.agg2),
    };
    let node_ranking = scoring::rank_nodes(&node_scores);
    let edge_scores = g
        .arcs()
        .iter()
        .zip(&arc_scores)
        .map(|(a, &score)| EdgeScore { src: a.src, dst: a.dst, score })
        .collect();
    Ok(Explanation {
        graph_id: g.graph_id().to_string(),
        predicted_class,
        probability,
        node_scores,
        node_attr_scores,
        node_ranking,
        edge_scores,
        attr_scores,
        config: config.clone(),
        seed: config.hard_concrete.seed,
    })
}
