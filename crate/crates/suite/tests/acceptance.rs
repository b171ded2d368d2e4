//! End-to-end acceptance checks, run as one binary so the report lines come
//! out in order. Exits non-zero if any check fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{crafted_instance, random_graph, random_model, rng, toy_model, typed_graphs};
use gexplain::datasets::{generate_ba2motifs, Dataset};
use gexplain::explainer::{explain, sample_hard_concrete, noise, ExplainConfig, Explanation, HardConcreteConfig, NoiseKind};
use gexplain::graph::{AttributedGraph, NodeSet};
use gexplain::linalg::Matrix;
use gexplain::metrics::{ep_attribute, ep_explained, evaluate, prefix_min_k, write_csv, Budget};
use gexplain::model::{train, Architecture, Gates, GnnModel, TrainParams};
use gexplain::oracle::{all_subset_probabilities, brute_force_best_subset, exhaustive_sparsity, occlusion_scores, subset_probability};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

const BA_GRAPHS: usize = 1000;
const BA_HIDDEN: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ba_dataset() -> Dataset {
    generate_ba2motifs(BA_GRAPHS, 0).unwrap()
}

fn ba_arch(d: &Dataset) -> Architecture {
    Architecture::three_layer_gcn(d.attr_dim, BA_HIDDEN, d.num_classes)
}

fn test_graphs(d: &Dataset) -> Vec<&AttributedGraph> {
    d.split.test.iter().map(|&i| &d.graphs[i]).collect()
}

fn explain_all(model: &GnnModel, graphs: &[&AttributedGraph], cfg: &ExplainConfig) -> Vec<Explanation> {
    graphs.par_iter().map(|g| explain(model, g, cfg).unwrap()).collect()
}

/// Test accuracy of the benchmark model trained with the stated settings.
fn ba_accuracy(d: &Dataset) -> Outcome {
    let out = train(&ba_arch(d), d, &TrainParams { lr: 0.001, epochs: 300, seed: 0 }).unwrap();
    let acc = out.test_accuracy.unwrap();
    outcome(
        acc >= 0.99,
        format!("test_accuracy={acc:.3} train={:.3} (need >= 0.99, lr 0.001, 300 epochs)", out.train_accuracy),
    )
}

/// The explainer's top-5 EP against shuffled rankings, on a model that solves the task.
fn ba_ep(d: &Dataset) -> Outcome {
    let out = train(&ba_arch(d), d, &TrainParams { lr: 0.01, epochs: 3000, seed: 0 }).unwrap();
    let model = &out.model;
    let graphs = test_graphs(d);
    let ex = explain_all(model, &graphs, &ExplainConfig::default());
    let budget = Budget::TopK(5);
    let ep = ep_explained(model, &graphs, &ex, budget).unwrap().unwrap();
    let random: f64 = (0..10u64)
        .map(|s| {
            let mut r = rng(s);
            let shuffled: Vec<Explanation> = ex
                .iter()
                .map(|e| {
                    let mut e = e.clone();
                    e.node_ranking.shuffle(&mut r);
                    e
                })
                .collect();
            ep_explained(model, &graphs, &shuffled, budget).unwrap().unwrap()
        })
        .sum::<f64>()
        / 10.0;
    let in_band = (0.25..=0.75).contains(&ep);
    let margin = ep - random;
    outcome(
        in_band && margin >= 0.10 - 1e-12,
        format!(
            "ep_explained={ep:.3} random={random:.3} margin={margin:+.3} (need >= +0.10 and ep in [0.25, 0.75]); model test_accuracy={:.3}",
            out.test_accuracy.unwrap()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn oracle_dominance(model: &GnnModel) -> Outcome {
    let k = 3;
    let graphs = typed_graphs(300, 50, 6, 12);
    let cfg = ExplainConfig::default();
    let rows: Vec<(bool, bool)> = graphs
        .par_iter()
        .map(|g| {
            let e = explain(model, g, &cfg).unwrap();
            let class = e.predicted_class;
            let top = subset_probability(model, g, &NodeSet::new(e.node_ranking[..k].iter().copied()), class).unwrap();
            let (_, best) = brute_force_best_subset(model, g, k).unwrap();
            let all: Vec<f64> = all_subset_probabilities(model, g, k).unwrap().into_iter().map(|(_, p)| p).collect();
            (best >= top, top >= median(all))
        })
        .collect();
    let dominated = rows.iter().filter(|r| r.0).count();
    let above = rows.iter().filter(|r| r.1).count();
    let frac = above as f64 / rows.len() as f64;
    outcome(
        dominated == rows.len() && frac >= 0.70,
        format!("oracle >= top-3 on {dominated}/{} graphs; top-3 >= median on {frac:.2} (need all and >= 0.70)", rows.len()),
    )
}

/// Central differences on every gate; components where the two one-sided
/// slopes disagree sit on a relu kink and are left out.
fn gradient_check() -> Outcome {
    let h = 1e-4;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut kinks = 0usize;
    for seed in 0..20u64 {
        let mut r = rng(400 + seed);
        let n = r.random_range(2..=10);
        let d = r.random_range(1..=8);
        let g = random_graph(&mut r, "g", n, d, 0.35, seed % 2 == 0);
        let model = random_model(&mut r, d, &[8, 8, 8], &[6], 3);
        let edge: Vec<f64> = (0..g.arc_count()).map(|_| r.random_range(0.05..0.95)).collect();
        let attrs = Matrix::from_vec(n, d, (0..n * d).map(|_| r.random_range(0.05..0.95)).collect());
        let gates = Gates::new(edge, attrs);
        let target = model.forward(&g).unwrap().predicted_class;
        let grads = model.mask_gradients(&g, &gates, target).unwrap();
        let arcs = g.arc_count();
        let loss = |k: usize, delta: f64| {
            let mut e = gates.edge().to_vec();
            let mut x = gates.attributes().clone();
            if k < arcs {
                e[k] += delta;
            } else {
                x.as_mut_slice()[k - arcs] += delta;
            }
            // Gates::new clamps into [0, 1]; the probes stay inside.
            model.loss(&g, Some(&Gates::new(e, x)), target).unwrap()
        };
        for k in 0..arcs + n * d {
            let (lo, mid, hi) = (loss(k, -h), loss(k, 0.0), loss(k, h));
            let fwd = (hi - mid) / h;
            let bwd = (mid - lo) / h;
            if (fwd - bwd).abs() > 1e-2 * (fwd.abs() + bwd.abs()) + 1e-6 {
                kinks += 1;
                continue;
            }
            let fd = (hi - lo) / (2.0 * h);
            let an = if k < arcs { grads.edge[k] } else { grads.attributes.as_slice()[k - arcs] };
            let scale = fd.abs().max(an.abs());
            if scale > 1e-9 {
                worst = worst.max((fd - an).abs() / scale);
            }
            checked += 1;
        }
    }
    let kink_frac = kinks as f64 / (checked + kinks) as f64;
    outcome(
        worst < 1e-4 && kink_frac < 0.05,
        format!("max_rel_err={worst:.2e} over {checked} components, {kinks} kink components skipped (need < 1e-4)"),
    )
}

fn hard_concrete_exactness() -> Outcome {
    let (zeta, gamma) = (-0.1, 1.1);
    let mut r = rng(500);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = r.random_range(-6.0..6.0);
        let u: f64 = r.random_range(1e-6..1.0 - 1e-6);
        let beta = r.random_range(0.05..2.0);
        let cfg = HardConcreteConfig { beta, ..Default::default() };
        let s = 1.0 / (1.0 + (-((u.ln() - (1.0 - u).ln() + m) / beta)).exp());
        let direct = (s * (gamma - zeta) + zeta).clamp(0.0, 1.0);
        worst = worst.max((sample_hard_concrete(m, &cfg, u).unwrap() - direct).abs());
    }
    let cfg = HardConcreteConfig::default();
    let draws = noise(&cfg, 0, NoiseKind::Edge, 100_000);
    let mut zeros = 0usize;
    let mut ones = 0usize;
    for &u in &draws {
        let v = sample_hard_concrete(0.0, &cfg, u).unwrap();
        zeros += usize::from(v == 0.0);
        ones += usize::from(v == 1.0);
    }
    outcome(
        worst <= 1e-12 && zeros > 0 && ones > 0,
        format!("max_abs_err={worst:.2e} (need <= 1e-12); exact zeros={zeros} ones={ones} of 100000"),
    )
}

fn identity_invariants(ba: &Dataset, ba_model: &GnnModel, toy: &GnnModel) -> Outcome {
    let mut failures = Vec::new();
    let mut r = rng(600);
    let mut cases: Vec<(GnnModel, AttributedGraph)> = (0..20)
        .map(|i| {
            let n = r.random_range(1..=12);
            let d = r.random_range(1..=5);
            let g = random_graph(&mut r, "g", n, d, 0.3, i % 2 == 0);
            (random_model(&mut r, d, &[6, 6], &[], 2), g)
        })
        .collect();
    cases.extend(test_graphs(ba).into_iter().take(10).map(|g| (ba_model.clone(), g.clone())));
    for (model, g) in &cases {
        let plain = model.forward(g).unwrap();
        if model.forward_masked(g, Some(&Gates::ones(g))).unwrap().logits != plain.logits {
            failures.push("all-ones gates");
        }
        let closed = Gates::new(vec![0.0; g.arc_count()], Matrix::filled(g.node_count(), g.attr_dim(), 1.0));
        if model.forward_masked(g, Some(&closed)).unwrap().logits != model.forward(&g.without_arcs()).unwrap().logits {
            failures.push("zero edge gates");
        }
    }
    let cfg = ExplainConfig { epochs: 50, ..Default::default() };
    let typed = typed_graphs(601, 30, 6, 12);
    let suites: Vec<(&GnnModel, Vec<&AttributedGraph>)> = vec![(ba_model, test_graphs(ba)), (toy, typed.iter().collect())];
    for (model, graphs) in suites {
        let ex = explain_all(model, &graphs, &cfg);
        if ep_explained(model, &graphs, &ex, Budget::Rate(1.0)).unwrap() != Some(1.0) {
            failures.push("full-budget EP");
        }
        if ep_attribute(model, &graphs, &ex, model.attr_dim()).unwrap() != Some(1.0) {
            failures.push("full attribute EP");
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} gate cases and 2 EP suites exact", cases.len())
        } else {
            format!("violated: {}", failures.join(", "))
        },
    )
}

fn sparsity_dominance(model: &GnnModel) -> Outcome {
    let graphs = typed_graphs(700, 30, 5, 12);
    let cfg = ExplainConfig::default();
    let rows: Vec<(usize, usize)> = graphs
        .par_iter()
        .map(|g| {
            let e = explain(model, g, &cfg).unwrap();
            let prefix = prefix_min_k(model, g, &e.node_ranking, e.predicted_class).unwrap();
            (prefix, exhaustive_sparsity(model, g).unwrap())
        })
        .collect();
    let ok = rows.iter().filter(|(p, x)| p >= x).count();
    let gap: usize = rows.iter().map(|(p, x)| p.saturating_sub(*x)).sum();
    outcome(
        ok == rows.len(),
        format!("prefix >= exhaustive on {ok}/{} graphs; total gap {gap} nodes", rows.len()),
    )
}

fn determinism(ba: &Dataset, model: &GnnModel) -> Outcome {
    let graphs = test_graphs(ba);
    let cfg = ExplainConfig::default();
    let run = || {
        let ex = explain_all(model, &graphs, &cfg);
        let text: Vec<String> = ex.iter().map(Explanation::to_json).collect();
        let report = evaluate(model, &graphs, &ex, Budget::TopK(5), Some(3)).unwrap();
        let mut csv = Vec::new();
        write_csv(&mut csv, &report.per_graph).unwrap();
        (text, report.to_json(), csv)
    };
    let a = run();
    let b = run();
    let same_ex = a.0.iter().zip(&b.0).filter(|(x, y)| x == y).count();
    outcome(
        a == b,
        format!("{same_ex}/{} explanation files identical; report {}; csv {}", a.0.len(), a.1 == b.1, a.2 == b.2),
    )
}

fn occlusion_agreement() -> Outcome {
    let cfg = ExplainConfig::default();
    let hits = (0..20)
        .into_par_iter()
        .filter(|&i| {
            let c = crafted_instance(i);
            let e = explain(&c.model, &c.graph, &cfg).unwrap();
            let scores: Vec<f64> = e.edge_scores.iter().map(|s| s.score).collect();
            common::argmax_f64(&scores) == common::argmax_f64(&occlusion_scores(&c.model, &c.graph).unwrap())
        })
        .count();
    outcome(hits >= 16, format!("top arc matches occlusion on {hits}/20 (need >= 16)"))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let ba = ba_dataset();
    let ba_model = train(&ba_arch(&ba), &ba, &TrainParams::default()).unwrap().model;
    let toy = toy_model();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let checks: Vec<(&str, Check)> = vec![
        ("1 ba2motifs accuracy", Box::new(|| ba_accuracy(&ba))),
        ("2 ba2motifs top-5 EP vs random", Box::new(|| ba_ep(&ba))),
        ("3 oracle dominance", Box::new(|| oracle_dominance(&toy))),
        ("4 gate gradients", Box::new(gradient_check)),
        ("5 hard concrete", Box::new(hard_concrete_exactness)),
        ("6 identity invariants", Box::new(|| identity_invariants(&ba, &ba_model, &toy))),
        ("7 sparsity vs exhaustive", Box::new(|| sparsity_dominance(&toy))),
        ("8 determinism", Box::new(|| determinism(&ba, &ba_model))),
        ("9 occlusion agreement", Box::new(occlusion_agreement)),
    ];
    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (name, check) in &checks {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| outcome(false, "panicked".into()));
        failed += usize::from(!result.pass);
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        writeln!(out, "acceptance {name}: {verdict} {} [{:.1}s]", result.detail, start.elapsed().as_secs_f64()).unwrap();
        out.flush().unwrap();
    }
    writeln!(out, "acceptance: {}/{} passed", checks.len() - failed, checks.len()).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
