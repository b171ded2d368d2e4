//! Graphviz rendering of an explanation.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::explainer::Explanation;
use crate::graph::AttributedGraph;

pub const FILL_BUCKETS: usize = 10;

const LIGHT: [u8; 3] = [0xf7, 0xfb, 0xff];
const DARK: [u8; 3] = [0x08, 0x30, 0x6b];

/// Bucket 0 for the lowest scores, `FILL_BUCKETS − 1` for the highest.
pub fn fill_bucket(score: f64) -> usize {
    ((score.clamp(0.0, 1.0) * FILL_BUCKETS as f64) as usize).min(FILL_BUCKETS - 1)
}

/// Colour of a bucket, interpolated from near-white to dark blue.
pub fn bucket_color(bucket: usize) -> String {
    let t = bucket.min(FILL_BUCKETS - 1) as f64 / (FILL_BUCKETS - 1) as f64;
    let c: Vec<u8> = LIGHT
        .iter()
        .zip(DARK)
        .map(|(&l, d)| (l as f64 + (d as f64 - l as f64) * t).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn penwidth(score: f64) -> f64 {
    0.5 + 4.5 * score.clamp(0.0, 1.0)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT digraph: node fill by node score, edge width by edge score, and each
/// node's `top_t` attributes in its tooltip. Undirected edges are drawn once
/// without arrowheads.
pub fn to_dot(g: &AttributedGraph, e: &Explanation, top_t: usize, attr_names: Option<&[String]>) -> Result<String> {
    if e.node_scores.len() != g.node_count() || e.edge_scores.len() != g.arc_count() {
        return Err(Error::ShapeMismatch(format!("explanation `{}` does not match graph `{}`", e.graph_id, g.graph_id())));
    }
    let name = |c: usize| attr_names.and_then(|n| n.get(c).cloned()).unwrap_or_else(|| format!("x{c}"));
    let mut out = String::new();
    writeln!(out, "digraph {} {{", quote(g.graph_id())).unwrap();
    writeln!(out, "  node [style=filled, shape=circle, fontname=\"Helvetica\"];").unwrap();
    for i in 0..g.node_count() {
        let score = e.node_scores[i];
        let bucket = fill_bucket(score);
        let font = if bucket >= FILL_BUCKETS / 2 { "white" } else { "black" };
        let tooltip = e
            .top_attributes(i, top_t)
            .into_iter()
            .map(|c| format!("{}={:.3}", name(c), e.attr_scores.get(i, c)))
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(
            out,
            "  n{i} [label=\"{i}\\n{score:.2}\", fillcolor={}, fontcolor={font}, tooltip={}];",
            quote(&bucket_color(bucket)),
            quote(&tooltip)
        )
        .unwrap();
    }
    let step = if g.is_undirected() { 2 } else { 1 };
    for s in e.edge_scores.iter().step_by(step) {
        let dir = if g.is_undirected() { ", dir=none" } else { "" };
        writeln!(
            out,
            "  n{} -> n{} [penwidth={:.3}, tooltip={}{dir}];",
            s.src,
            s.dst,
            penwidth(s.score),
            quote(&format!("{:.3}", s.score))
        )
        .unwrap();
    }
    out.push_str("}\n");
    Ok(out)
}
