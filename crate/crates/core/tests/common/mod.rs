#![allow(dead_code)]

use gexplain::datasets::{Dataset, Split};
use gexplain::graph::{AttributedGraph, Directedness};
use gexplain::linalg::Matrix;
use gexplain::model::{Architecture, GnnModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random simple graph with uniform attributes in [-1, 1).
pub fn random_graph<R: Rng>(rng: &mut R, id: &str, n: usize, attr_dim: usize, edge_prob: f64, undirected: bool) -> AttributedGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && (!undirected || a < b) && rng.random_bool(edge_prob) {
                edges.push((a, b));
            }
        }
    }
    let x = Matrix::from_vec(n, attr_dim, (0..n * attr_dim).map(|_| rng.random_range(-1.0..1.0)).collect());
    let dir = if undirected { Directedness::Undirected } else { Directedness::Directed };
    AttributedGraph::new(id, n, &edges, x, dir, None).unwrap()
}

/// Random model whose biases are perturbed away from zero.
pub fn random_model<R: Rng>(rng: &mut R, attr_dim: usize, gcn: &[usize], head: &[usize], classes: usize) -> GnnModel {
    let arch = Architecture {
        attr_dim,
        gcn_widths: gcn.to_vec(),
        head_widths: head.to_vec(),
        num_classes: classes,
    };
    let mut model = GnnModel::init(&arch, rng).unwrap();
    let mut p = model.flat_params();
    p.iter_mut().for_each(|v| *v += rng.random_range(-0.2..0.2));
    model.set_flat_params(&p);
    model
}

/// Every graph in the training split.
pub fn train_only(name: &str, graphs: Vec<AttributedGraph>, attr_dim: usize, num_classes: usize) -> Dataset {
    let split = Split { train: (0..graphs.len()).collect(), ..Split::default() };
    Dataset { name: name.into(), graphs, attr_dim, num_classes, split, generation_seed: None }
}

/// Undirected graph on 6–12 nodes (random tree plus a few chords) whose
/// nodes carry one-hot types in three classes. Label 1 iff some edge joins
/// a type-0 node to a type-1 node. Labels alternate by index.
pub fn typed_graphs(seed: u64, count: usize, min_n: usize, max_n: usize) -> Vec<AttributedGraph> {
    let mut r = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let want = out.len() % 2;
        let n = r.random_range(min_n..=max_n);
        let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (r.random_range(0..v), v)).collect();
        for _ in 0..r.random_range(0..=2) {
            let (a, b) = (r.random_range(0..n), r.random_range(0..n));
            if a != b {
                edges.push((a, b));
            }
        }
        let types: Vec<usize> = (0..n).map(|_| r.random_range(0..3)).collect();
        let label = usize::from(edges.iter().any(|&(a, b)| {
            let (ta, tb) = (types[a].min(types[b]), types[a].max(types[b]));
            ta == 0 && tb == 1
        }));
        if label != want {
            continue;
        }
        let mut x = Matrix::zeros(n, 3);
        for (i, &t) in types.iter().enumerate() {
            x.set(i, t, 1.0);
        }
        let id = format!("typed-{seed}-{:03}", out.len());
        out.push(AttributedGraph::new(id, n, &edges, x, Directedness::Undirected, Some(label)).unwrap());
    }
    out
}

/// Small model fitted on [`typed_graphs`].
pub fn toy_model() -> GnnModel {
    let graphs = typed_graphs(1000, 200, 6, 12);
    let ds = train_only("typed", graphs, 3, 2);
    let arch = Architecture { attr_dim: 3, gcn_widths: vec![16, 16], head_widths: vec![], num_classes: 2 };
    let params = gexplain::model::TrainParams { lr: 0.01, epochs: 400, seed: 0 };
    gexplain::model::train(&arch, &ds, &params).unwrap().model
}

/// A directed graph where only the arc `s → t` moves the prediction.
pub struct Crafted {
    pub graph: AttributedGraph,
    pub model: GnnModel,
    pub informative_arc: usize,
    pub s: usize,
    pub t: usize,
}

/// Linear GCN unit carrying `s`'s attribute. Summed over nodes it is
/// `1 + g/√(1+g)` for gate `g` on `s → t`, and the class-1 logit is
/// `10·that − 13.5`, so class 1 needs the arc.
pub fn crafted_model(n: usize) -> GnnModel {
    use gexplain::model::{Activation, DenseLayer};
    let gcn = DenseLayer::new(Matrix::from_vec(1, 1, vec![1.0]), vec![0.0], Activation::Identity).unwrap();
    let head = DenseLayer::new(
        Matrix::from_vec(2, 2, vec![0.0, 0.0, 0.0, 10.0 * n as f64]),
        vec![0.0, -13.5],
        Activation::Identity,
    )
    .unwrap();
    GnnModel::new(vec![gcn], vec![head]).unwrap()
}

/// Instance `i` of the crafted family: 4–8 nodes, only `s` has a nonzero
/// attribute, `s → t` is the only arc leaving `s`, and distractor arcs never
/// enter `s` or `t`.
pub fn crafted_instance(i: u64) -> Crafted {
    use rand::seq::SliceRandom;
    let mut r = rng(500 + i);
    let n = 4 + (i as usize % 5);
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut r);
    let (s, t) = (nodes[0], nodes[1]);
    let mut edges = vec![(s, t)];
    for a in 0..n {
        for b in 0..n {
            if a != b && a != s && b != s && b != t && r.random_bool(0.4) {
                edges.push((a, b));
            }
        }
    }
    let mut x = Matrix::zeros(n, 1);
    x.set(s, 0, 1.0);
    let graph = AttributedGraph::new(format!("crafted-{i}"), n, &edges, x, Directedness::Directed, None).unwrap();
    let informative_arc = graph.arcs().iter().position(|a| (a.src, a.dst) == (s, t)).unwrap();
    Crafted { graph, model: crafted_model(n), informative_arc, s, t }
}

pub fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// An explanation carrying only a ranking, with uniform scores elsewhere.
pub fn ranked_explanation(g: &AttributedGraph, ranking: Vec<usize>) -> gexplain::explainer::Explanation {
    let n = g.node_count();
    gexplain::explainer::Explanation {
        graph_id: g.graph_id().to_string(),
        predicted_class: 0,
        probability: 0.0,
        node_scores: vec![0.5; n],
        node_attr_scores: vec![0.5; n],
        node_ranking: ranking,
        edge_scores: g
            .arcs()
            .iter()
            .map(|a| gexplain::explainer::EdgeScore { src: a.src, dst: a.dst, score: 0.5 })
            .collect(),
        attr_scores: Matrix::filled(n, g.attr_dim(), 0.5),
        config: Default::default(),
        seed: 0,
    }
}

pub fn shuffled_ranking<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}
