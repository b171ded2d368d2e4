//! Graph-convolution classifier: `GCN layers → [max ‖ mean] readout → dense head`.
//!
//! A GCN layer computes, for node `i`,
//!
//! ```text
//! h_i' = act( Σ_{(j→i)} g_ji · z_j / √(d_i d_j)  +  z_i / d_i  +  b ),   z = h W
//! ```
//!
//! where `g_ji` is the edge gate (1 when unmasked) and `d_i = 1 + Σ_{(j→i)} g_ji`
//! is the gated in-degree including the self-loop. Attribute gates multiply
//! the input matrix once, before the first layer.

mod io;
mod propagate;
mod train;

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::Matrix;

pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use propagate::{MaskGradients, ModelGradients};
pub use train::{train, EpochStats, TrainOutcome, TrainParams};

/// Probabilities are floored at this value before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::UnsupportedActivation(other.to_string())),
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// `act(x W + b)` with `W` stored `in_dim × out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::ShapeMismatch(format!(
                "bias has {} entries for {} outputs",
                bias.len(),
                weight.cols()
            )));
        }
        Ok(Self { weight, bias, activation })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self {
            weight: Matrix::from_vec(in_dim, out_dim, data),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    fn is_finite(&self) -> bool {
        self.weight.all_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

/// Layer widths for a freshly initialized model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub attr_dim: usize,
    pub gcn_widths: Vec<usize>,
    /// Hidden widths of the dense head; the final `num_classes` layer is implied.
    pub head_widths: Vec<usize>,
    pub num_classes: usize,
}

impl Architecture {
    /// The benchmark model: three GCN layers of equal width and a single
    /// linear layer on the pooled representation.
    pub fn three_layer_gcn(attr_dim: usize, hidden: usize, num_classes: usize) -> Self {
        Self {
            attr_dim,
            gcn_widths: vec![hidden; 3],
            head_widths: Vec::new(),
            num_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    gcn_layers: Vec<DenseLayer>,
    head_layers: Vec<DenseLayer>,
    attr_dim: usize,
    num_classes: usize,
}

impl GnnModel {
    /// Validates the dimension chain: the first GCN layer reads `attr_dim`
    /// columns, the head reads `2 ×` the last GCN width, and the last head
    /// layer emits `num_classes ≥ 2` logits.
    pub fn new(gcn_layers: Vec<DenseLayer>, head_layers: Vec<DenseLayer>) -> Result<Self> {
        let first = gcn_layers
            .first()
            .ok_or_else(|| Error::ShapeMismatch("model needs at least one GCN layer".into()))?;
        let attr_dim = first.in_dim();
        for pair in gcn_layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch(format!(
                    "GCN layer output {} feeds input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        let mut width = 2 * gcn_layers.last().map_or(0, DenseLayer::out_dim);
        let last_head = head_layers
            .last()
            .ok_or_else(|| Error::ShapeMismatch("model needs at least one head layer".into()))?;
        for layer in &head_layers {
            if layer.in_dim() != width {
                return Err(Error::ShapeMismatch(format!(
                    "head layer expects {} inputs, previous stage gives {}",
                    layer.in_dim(),
                    width
                )));
            }
            width = layer.out_dim();
        }
        let num_classes = last_head.out_dim();
        if num_classes < 2 {
            return Err(Error::ShapeMismatch(format!("num_classes = {num_classes} < 2")));
        }
        if !gcn_layers.iter().chain(&head_layers).all(DenseLayer::is_finite) {
            return Err(Error::Validation("model weights must be finite".into()));
        }
        Ok(Self { gcn_layers, head_layers, attr_dim, num_classes })
    }

    /// Random initialization: ReLU on every layer except the logits.
    pub fn init<R: Rng>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        let mut gcn = Vec::with_capacity(arch.gcn_widths.len());
        let mut width = arch.attr_dim;
        for &w in &arch.gcn_widths {
            gcn.push(DenseLayer::glorot(width, w, Activation::Relu, rng));
            width = w;
        }
        let mut head = Vec::new();
        width *= 2;
        for &w in &arch.head_widths {
            head.push(DenseLayer::glorot(width, w, Activation::Relu, rng));
            width = w;
        }
        head.push(DenseLayer::glorot(width, arch.num_classes, Activation::Identity, rng));
        Self::new(gcn, head)
    }

    pub fn gcn_layers(&self) -> &[DenseLayer] {
        &self.gcn_layers
    }

    pub fn head_layers(&self) -> &[DenseLayer] {
        &self.head_layers
    }

    pub fn attr_dim(&self) -> usize {
        self.attr_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(|l| l.weight.as_slice().len() + l.bias.len()).sum()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.gcn_layers.iter().chain(&self.head_layers)
    }

    /// All weights and biases, layer by layer (weight then bias).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in self.layers() {
            out.extend_from_slice(layer.weight.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.param_count(), "parameter vector length");
        let mut offset = 0;
        for layer in self.gcn_layers.iter_mut().chain(self.head_layers.iter_mut()) {
            let w = layer.weight.as_mut_slice();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            let n = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + n]);
            offset += n;
        }
    }

    /// Unmasked forward pass.
    pub fn forward(&self, g: &AttributedGraph) -> Result<Prediction> {
        self.forward_masked(g, None)
    }

    /// Forward pass with optional edge/attribute gates. `None` is the same
    /// computation with every gate equal to 1.
    pub fn forward_masked(&self, g: &AttributedGraph, gates: Option<&Gates>) -> Result<Prediction> {
        Ok(propagate::Trace::run(self, g, gates)?.prediction())
    }

    /// Prediction on the zero-node graph, whose pooled representation is zero.
    pub fn empty_graph_prediction(&self) -> Prediction {
        self.forward(&AttributedGraph::empty(self.attr_dim))
            .expect("empty graph matches model attr_dim")
    }

    /// Cross-entropy `−ln max(p[target], 1e−12)`.
    pub fn loss(&self, g: &AttributedGraph, gates: Option<&Gates>, target: usize) -> Result<f64> {
        self.check_target(target)?;
        let p = self.forward_masked(g, gates)?;
        Ok(cross_entropy(&p.probabilities, target))
    }

    /// Exact derivatives of [`GnnModel::loss`] with respect to the gate values.
    pub fn mask_gradients(&self, g: &AttributedGraph, gates: &Gates, target: usize) -> Result<MaskGradients> {
        self.check_target(target)?;
        propagate::mask_gradients(self, g, gates, target)
    }

    /// Loss and weight gradients of the unmasked cross-entropy on one graph.
    pub fn weight_gradients(&self, g: &AttributedGraph, target: usize) -> Result<(Prediction, ModelGradients)> {
        self.check_target(target)?;
        propagate::weight_gradients(self, g, target)
    }

    fn check_target(&self, target: usize) -> Result<()> {
        if target >= self.num_classes {
            return Err(Error::IndexOutOfRange { index: target, len: self.num_classes });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
}

impl Prediction {
    pub(crate) fn from_logits(logits: Vec<f64>) -> Self {
        let probabilities = softmax(&logits);
        let predicted_class = argmax(&logits);
        Self { logits, probabilities, predicted_class }
    }

    pub fn probability_of(&self, class: usize) -> f64 {
        self.probabilities[class]
    }
}

/// Edge gates (one per arc) and attribute gates (node_count × attr_dim),
/// each clamped into `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    edge: Vec<f64>,
    attributes: Matrix,
}

impl Gates {
    pub fn new(edge: Vec<f64>, attributes: Matrix) -> Self {
        let edge = edge.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let mut attributes = attributes;
        attributes.as_mut_slice().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Self { edge, attributes }
    }

    pub fn ones(g: &AttributedGraph) -> Self {
        Self {
            edge: vec![1.0; g.arc_count()],
            attributes: Matrix::filled(g.node_count(), g.attr_dim(), 1.0),
        }
    }

    pub fn edge(&self) -> &[f64] {
        &self.edge
    }

    pub fn attributes(&self) -> &Matrix {
        &self.attributes
    }

    pub(crate) fn check(&self, g: &AttributedGraph) -> Result<()> {
        if self.edge.len() != g.arc_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} edge gates for {} arcs",
                self.edge.len(),
                g.arc_count()
            )));
        }
        if self.attributes.rows() != g.node_count() || self.attributes.cols() != g.attr_dim() {
            return Err(Error::ShapeMismatch(format!(
                "attribute gates {}×{} for attributes {}×{}",
                self.attributes.rows(),
                self.attributes.cols(),
                g.node_count(),
                g.attr_dim()
            )));
        }
        Ok(())
    }
}

/// Symmetric-normalized propagation coefficients, self-loop included.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    /// `d_i = 1 + Σ` gates of arcs entering `i`.
    pub degree: Vec<f64>,
    /// `1 / d_i`.
    pub self_coef: Vec<f64>,
    /// `g_a / √(d_dst d_src)` per arc.
    pub arc_coef: Vec<f64>,
}

/// Coefficients of the unmasked graph.
pub fn normalize_adjacency(g: &AttributedGraph) -> NormalizedAdjacency {
    normalize_gated(g, None)
}

pub(crate) fn normalize_gated(g: &AttributedGraph, edge_gates: Option<&[f64]>) -> NormalizedAdjacency {
    let gate = |a: usize| edge_gates.map_or(1.0, |gs| gs[a]);
    let mut degree = vec![1.0; g.node_count()];
    for (a, arc) in g.arcs().iter().enumerate() {
        degree[arc.dst] += gate(a);
    }
    let self_coef = degree.iter().map(|d| 1.0 / d).collect();
    let arc_coef = g
        .arcs()
        .iter()
        .enumerate()
        .map(|(a, arc)| gate(a) / (degree[arc.dst] * degree[arc.src]).sqrt())
        .collect();
    NormalizedAdjacency { degree, self_coef, arc_coef }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; the smallest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn cross_entropy(probabilities: &[f64], target: usize) -> f64 {
    -probabilities[target].max(PROBABILITY_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Directedness;

    fn graph(n: usize, edges: &[(usize, usize)], x: Vec<f64>, d: usize) -> AttributedGraph {
        AttributedGraph::new("g", n, edges, Matrix::from_vec(n, d, x), Directedness::Undirected, None)
            .unwrap()
    }

    #[test]
    fn isolated_node_coefficient() {
        let adj = normalize_adjacency(&graph(1, &[], vec![0.0], 1));
        assert_eq!(adj.self_coef, vec![1.0]);
    }

    #[test]
    fn single_edge_coefficients() {
        let adj = normalize_adjacency(&graph(2, &[(0, 1)], vec![0.0; 2], 1));
        assert_eq!(adj.self_coef, vec![0.5, 0.5]);
        assert_eq!(adj.arc_coef, vec![0.5, 0.5]);
    }

    #[test]
    fn triangle_coefficients() {
        let adj = normalize_adjacency(&graph(3, &[(0, 1), (1, 2), (0, 2)], vec![0.0; 3], 1));
        for c in adj.self_coef.iter().chain(&adj.arc_coef) {
            assert!((c - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_examples() {
        assert!(cross_entropy(&[1.0, 0.0], 0).abs() < 1e-15);
        assert!((cross_entropy(&[0.5, 0.5], 1) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((cross_entropy(&[0.25, 0.75], 1) - 0.2876820724517809).abs() < 1e-12);
        // floored
        assert!((cross_entropy(&[1.0, 0.0], 1) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn argmax_prefers_smallest_index() {
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }

    #[test]
    fn zero_inputs_give_uniform_probabilities() {
        let mut rng = rand::rng();
        let arch = Architecture {
            attr_dim: 3,
            gcn_widths: vec![4, 4],
            head_widths: vec![5],
            num_classes: 3,
        };
        let model = GnnModel::init(&arch, &mut rng).unwrap();
        let g = graph(3, &[(0, 1), (1, 2)], vec![0.0; 9], 3);
        let p = model.forward(&g).unwrap();
        assert!(p.logits.iter().all(|&l| l == 0.0));
        for q in &p.probabilities {
            assert!((q - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(p.predicted_class, 0);
    }

    #[test]
    fn dimension_chain_checked() {
        let l = |i, o| DenseLayer::new(Matrix::zeros(i, o), vec![0.0; o], Activation::Relu).unwrap();
        assert!(GnnModel::new(vec![l(3, 4)], vec![l(8, 2)]).is_ok());
        assert!(matches!(GnnModel::new(vec![l(3, 4)], vec![l(4, 2)]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(GnnModel::new(vec![l(3, 4), l(5, 2)], vec![l(4, 2)]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(GnnModel::new(vec![l(3, 4)], vec![l(8, 1)]), Err(Error::ShapeMismatch(_))));
        assert!(DenseLayer::new(Matrix::zeros(2, 2), vec![0.0], Activation::Relu).is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = rand::rng();
        let arch = Architecture::three_layer_gcn(4, 6, 2);
        let mut model = GnnModel::init(&arch, &mut rng).unwrap();
        let mut p = model.flat_params();
        assert_eq!(p.len(), model.param_count());
        p[0] = 42.0;
        model.set_flat_params(&p);
        assert_eq!(model.gcn_layers()[0].weight.get(0, 0), 42.0);
        assert_eq!(model.flat_params(), p);
    }

    #[test]
    fn empty_graph_uses_head_bias() {
        let l = |i, o, b: Vec<f64>, a| DenseLayer::new(Matrix::zeros(i, o), b, a).unwrap();
        let model = GnnModel::new(
            vec![l(2, 3, vec![1.0; 3], Activation::Relu)],
            vec![l(6, 2, vec![0.3, -0.3], Activation::Identity)],
        )
        .unwrap();
        let p = model.empty_graph_prediction();
        assert_eq!(p.logits, vec![0.3, -0.3]);
        assert_eq!(p.predicted_class, 0);
    }
}
