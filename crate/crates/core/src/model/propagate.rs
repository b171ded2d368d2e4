//! Forward pass with a cached trace and the matching reverse pass.

use super::{
    cross_entropy, normalize_gated, Activation, DenseLayer, Gates, GnnModel, NormalizedAdjacency,
    Prediction, PROBABILITY_FLOOR,
};
use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::{dot, Matrix};

/// Derivatives of the cross-entropy with respect to edge and attribute gates.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskGradients {
    pub loss: f64,
    pub prediction: Prediction,
    /// One entry per arc.
    pub edge: Vec<f64>,
    /// node_count × attr_dim.
    pub attributes: Matrix,
}

/// Weight gradients flattened in the order of [`GnnModel::flat_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub loss: f64,
    pub flat: Vec<f64>,
}

struct GcnStep {
    input: Matrix,
    z: Matrix,
    /// Aggregated messages plus bias, the activation input.
    pre: Matrix,
}

struct HeadStep {
    input: Vec<f64>,
    pre: Vec<f64>,
}

pub(crate) struct Trace<'a> {
    model: &'a GnnModel,
    graph: &'a AttributedGraph,
    edge_gates: Option<&'a [f64]>,
    attr_gates: Option<&'a Matrix>,
    adj: NormalizedAdjacency,
    gcn: Vec<GcnStep>,
    last_hidden: Matrix,
    max_arg: Vec<Option<usize>>,
    head: Vec<HeadStep>,
    logits: Vec<f64>,
}

fn check_compatible(model: &GnnModel, g: &AttributedGraph) -> Result<()> {
    if g.attr_dim() != model.attr_dim() {
        return Err(Error::ShapeMismatch(format!(
            "graph `{}` has attr_dim {}, model expects {}",
            g.graph_id(),
            g.attr_dim(),
            model.attr_dim()
        )));
    }
    Ok(())
}

impl<'a> Trace<'a> {
    pub(crate) fn run(model: &'a GnnModel, g: &'a AttributedGraph, gates: Option<&'a Gates>) -> Result<Self> {
        check_compatible(model, g)?;
        if let Some(gates) = gates {
            gates.check(g)?;
        }
        let edge_gates = gates.map(Gates::edge);
        let attr_gates = gates.map(Gates::attributes);
        let adj = normalize_gated(g, edge_gates);

        let mut h = match attr_gates {
            Some(gx) => g.attributes().hadamard(gx),
            None => g.attributes().clone(),
        };
        let mut gcn = Vec::with_capacity(model.gcn_layers().len());
        for layer in model.gcn_layers() {
            let z = h.matmul(&layer.weight);
            let pre = aggregate(g, &adj, &z, &layer.bias);
            let out = activate(&pre, layer.activation);
            gcn.push(GcnStep { input: std::mem::replace(&mut h, out), z, pre });
        }
        let last_hidden = h;

        let (pooled, max_arg) = readout(&last_hidden);
        let mut x = pooled;
        let mut head = Vec::with_capacity(model.head_layers().len());
        for layer in model.head_layers() {
            let pre = dense(layer, &x);
            let out = pre.iter().map(|&v| layer.activation.apply(v)).collect();
            head.push(HeadStep { input: std::mem::replace(&mut x, out), pre });
        }
        Ok(Self { model, graph: g, edge_gates, attr_gates, adj, gcn, last_hidden, max_arg, head, logits: x })
    }

    pub(crate) fn prediction(&self) -> Prediction {
        Prediction::from_logits(self.logits.clone())
    }

    /// Reverse pass from `dL/dlogits`. Returns weight gradients when asked
    /// and gate gradients when the trace was run with gates.
    fn backward(&self, dlogits: Vec<f64>, want_weights: bool) -> (Option<Vec<f64>>, Option<(Vec<f64>, Matrix)>) {
        let n = self.graph.node_count();
        let mut head_grads: Vec<(Matrix, Vec<f64>)> = Vec::new();
        let mut d = dlogits;
        for (layer, step) in self.model.head_layers().iter().zip(&self.head).rev() {
            let dpre: Vec<f64> = d
                .iter()
                .zip(&step.pre)
                .map(|(g, &p)| g * layer.activation.derivative(p))
                .collect();
            if want_weights {
                let dw = Matrix::from_vec(step.input.len(), 1, step.input.clone())
                    .matmul(&Matrix::from_vec(1, dpre.len(), dpre.clone()));
                head_grads.push((dw, dpre.clone()));
            }
            d = (0..layer.in_dim()).map(|k| dot(layer.weight.row(k), &dpre)).collect();
        }
        head_grads.reverse();

        // Readout: d = [d_max ‖ d_mean].
        let width = self.last_hidden.cols();
        let mut dh = Matrix::zeros(n, width);
        if n > 0 {
            for c in 0..width {
                if let Some(i) = self.max_arg[c] {
                    dh.row_mut(i)[c] += d[c];
                }
                let share = d[width + c] / n as f64;
                for i in 0..n {
                    dh.row_mut(i)[c] += share;
                }
            }
        }

        let want_gates = self.edge_gates.is_some();
        let arcs = self.graph.arcs();
        let mut d_self = vec![0.0; n];
        let mut d_arc = vec![0.0; arcs.len()];
        let mut gcn_grads: Vec<(Matrix, Vec<f64>)> = Vec::new();
        for (layer, step) in self.model.gcn_layers().iter().zip(&self.gcn).rev() {
            let mut dpre = dh;
            for (g, &p) in dpre.as_mut_slice().iter_mut().zip(step.pre.as_slice()) {
                *g *= layer.activation.derivative(p);
            }
            let mut dz = Matrix::zeros(n, layer.out_dim());
            for i in 0..n {
                let c = self.adj.self_coef[i];
                for (o, &g) in dz.row_mut(i).iter_mut().zip(dpre.row(i)) {
                    *o += c * g;
                }
                if want_gates {
                    d_self[i] += dot(step.z.row(i), dpre.row(i));
                }
            }
            for (a, arc) in arcs.iter().enumerate() {
                let c = self.adj.arc_coef[a];
                let (src, dst) = (arc.src, arc.dst);
                let g_dst = dpre.row(dst).to_vec();
                for (o, g) in dz.row_mut(src).iter_mut().zip(&g_dst) {
                    *o += c * g;
                }
                if want_gates {
                    d_arc[a] += dot(step.z.row(src), &g_dst);
                }
            }
            if want_weights {
                let dw = step.input.t_matmul(&dz);
                let db = (0..layer.out_dim()).map(|c| (0..n).map(|i| dpre.get(i, c)).sum()).collect();
                gcn_grads.push((dw, db));
            }
            dh = dz.matmul_t(&layer.weight);
        }
        gcn_grads.reverse();

        let weights = want_weights.then(|| {
            let mut flat = Vec::with_capacity(self.model.param_count());
            for (dw, db) in gcn_grads.iter().chain(&head_grads) {
                flat.extend_from_slice(dw.as_slice());
                flat.extend_from_slice(db);
            }
            flat
        });

        let gates = self.edge_gates.map(|_| {
            // Coefficients depend on gates directly (numerator) and through
            // the gated degree of both endpoints.
            let deg = &self.adj.degree;
            let mut d_deg: Vec<f64> = (0..n).map(|k| -d_self[k] / (deg[k] * deg[k])).collect();
            for (a, arc) in arcs.iter().enumerate() {
                let t = -0.5 * d_arc[a] * self.adj.arc_coef[a];
                d_deg[arc.dst] += t / deg[arc.dst];
                d_deg[arc.src] += t / deg[arc.src];
            }
            let edge: Vec<f64> = arcs
                .iter()
                .enumerate()
                .map(|(a, arc)| d_arc[a] / (deg[arc.dst] * deg[arc.src]).sqrt() + d_deg[arc.dst])
                .collect();
            let attributes = match self.attr_gates {
                Some(_) => dh.hadamard(self.graph.attributes()),
                None => Matrix::zeros(n, self.graph.attr_dim()),
            };
            (edge, attributes)
        });
        (weights, gates)
    }
}

fn aggregate(g: &AttributedGraph, adj: &NormalizedAdjacency, z: &Matrix, bias: &[f64]) -> Matrix {
    let mut pre = Matrix::zeros(z.rows(), z.cols());
    for i in 0..z.rows() {
        let c = adj.self_coef[i];
        for (p, &v) in pre.row_mut(i).iter_mut().zip(z.row(i)) {
            *p = c * v;
        }
    }
    for (a, arc) in g.arcs().iter().enumerate() {
        let c = adj.arc_coef[a];
        let src = z.row(arc.src).to_vec();
        for (p, v) in pre.row_mut(arc.dst).iter_mut().zip(&src) {
            *p += c * v;
        }
    }
    for i in 0..z.rows() {
        for (p, b) in pre.row_mut(i).iter_mut().zip(bias) {
            *p += b;
        }
    }
    pre
}

fn activate(pre: &Matrix, act: Activation) -> Matrix {
    let data = pre.as_slice().iter().map(|&v| act.apply(v)).collect();
    Matrix::from_vec(pre.rows(), pre.cols(), data)
}

fn dense(layer: &DenseLayer, x: &[f64]) -> Vec<f64> {
    let mut out = layer.bias.clone();
    for (k, &xk) in x.iter().enumerate() {
        for (o, &w) in out.iter_mut().zip(layer.weight.row(k)) {
            *o += xk * w;
        }
    }
    out
}

/// `[max ‖ mean]` over nodes, zeros for the empty graph. Ties in the max go
/// to the first node.
fn readout(h: &Matrix) -> (Vec<f64>, Vec<Option<usize>>) {
    let (n, width) = (h.rows(), h.cols());
    let mut pooled = vec![0.0; 2 * width];
    let mut arg = vec![None; width];
    if n == 0 {
        return (pooled, arg);
    }
    for c in 0..width {
        let mut best = 0;
        let mut sum = 0.0;
        for i in 0..n {
            let v = h.get(i, c);
            if v > h.get(best, c) {
                best = i;
            }
            sum += v;
        }
        pooled[c] = h.get(best, c);
        pooled[width + c] = sum / n as f64;
        arg[c] = Some(best);
    }
    (pooled, arg)
}

fn dlogits(p: &Prediction, target: usize) -> Vec<f64> {
    if p.probabilities[target] < PROBABILITY_FLOOR {
        return vec![0.0; p.probabilities.len()];
    }
    p.probabilities
        .iter()
        .enumerate()
        .map(|(c, &q)| if c == target { q - 1.0 } else { q })
        .collect()
}

pub(crate) fn mask_gradients(model: &GnnModel, g: &AttributedGraph, gates: &Gates, target: usize) -> Result<MaskGradients> {
    let trace = Trace::run(model, g, Some(gates))?;
    let prediction = trace.prediction();
    let loss = cross_entropy(&prediction.probabilities, target);
    let (_, grads) = trace.backward(dlogits(&prediction, target), false);
    let (edge, attributes) = grads.expect("gated trace yields gate gradients");
    Ok(MaskGradients { loss, prediction, edge, attributes })
}

pub(crate) fn weight_gradients(model: &GnnModel, g: &AttributedGraph, target: usize) -> Result<(Prediction, ModelGradients)> {
    let trace = Trace::run(model, g, None)?;
    let prediction = trace.prediction();
    let loss = cross_entropy(&prediction.probabilities, target);
    let (flat, _) = trace.backward(dlogits(&prediction, target), true);
    Ok((prediction, ModelGradients { loss, flat: flat.expect("weights requested") }))
}
