//! Attributed graphs, node sets, and node-induced subgraphs.
//!
//! Every graph is stored as a list of directed arcs. An undirected edge is
//! materialized as two arcs that sit next to each other in the arc list, so
//! the pair-mate of arc `a` is always `a ^ 1`. Self-loops are never stored;
//! the convolution adds them during normalization.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directedness {
    Directed,
    Undirected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub src: usize,
    pub dst: usize,
}

impl Arc {
    pub fn new(src: usize, dst: usize) -> Self {
        Self { src, dst }
    }
}

impl From<(usize, usize)> for Arc {
    fn from((src, dst): (usize, usize)) -> Self {
        Self { src, dst }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttributedGraph {
    graph_id: String,
    node_count: usize,
    arcs: Vec<Arc>,
    attributes: Matrix,
    directedness: Directedness,
    label: Option<usize>,
}

impl AttributedGraph {
    /// Builds a canonical graph from an edge list.
    ///
    /// Directed graphs keep their arcs sorted by `(src, dst)`. Undirected
    /// graphs are sorted by `(min, max)` endpoint and each edge is emitted as
    /// `(lo, hi), (hi, lo)`. Duplicates are dropped in both cases.
    pub fn new(
        graph_id: impl Into<String>,
        node_count: usize,
        edges: &[(usize, usize)],
        attributes: Matrix,
        directedness: Directedness,
        label: Option<usize>,
    ) -> Result<Self> {
        if attributes.rows() != node_count {
            return Err(Error::ShapeMismatch(format!(
                "attribute matrix has {} rows for {} nodes",
                attributes.rows(),
                node_count
            )));
        }
        for &(s, d) in edges {
            for index in [s, d] {
                if index >= node_count {
                    return Err(Error::IndexOutOfRange { index, len: node_count });
                }
            }
            if s == d {
                return Err(Error::SelfLoop(s));
            }
        }
        let arcs = match directedness {
            Directedness::Directed => {
                let set: BTreeSet<Arc> = edges.iter().map(|&e| Arc::from(e)).collect();
                set.into_iter().collect()
            }
            Directedness::Undirected => {
                let set: BTreeSet<(usize, usize)> =
                    edges.iter().map(|&(s, d)| (s.min(d), s.max(d))).collect();
                set.into_iter()
                    .flat_map(|(lo, hi)| [Arc::new(lo, hi), Arc::new(hi, lo)])
                    .collect()
            }
        };
        Ok(Self {
            graph_id: graph_id.into(),
            node_count,
            arcs,
            attributes,
            directedness,
            label,
        })
    }

    /// The zero-node graph with the given attribute width.
    pub fn empty(attr_dim: usize) -> Self {
        Self {
            graph_id: String::from("empty"),
            node_count: 0,
            arcs: Vec::new(),
            attributes: Matrix::zeros(0, attr_dim),
            directedness: Directedness::Directed,
            label: None,
        }
    }

    pub fn graph_id(&self) -> &str {
        &self.graph_id
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn attributes(&self) -> &Matrix {
        &self.attributes
    }

    pub fn attr_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn directedness(&self) -> Directedness {
        self.directedness
    }

    pub fn is_undirected(&self) -> bool {
        self.directedness == Directedness::Undirected
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    /// Index of the reverse arc of an undirected edge.
    pub fn pair_mate(&self, arc: usize) -> Option<usize> {
        self.is_undirected().then_some(arc ^ 1)
    }

    /// Undirected edges as `(lo, hi)` pairs, one per pair of arcs. For
    /// directed graphs this is the arc list itself.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        match self.directedness {
            Directedness::Directed => self.arcs.iter().map(|a| (a.src, a.dst)).collect(),
            Directedness::Undirected => {
                self.arcs.iter().step_by(2).map(|a| (a.src, a.dst)).collect()
            }
        }
    }

    /// Same graph with every arc removed.
    pub fn without_arcs(&self) -> Self {
        Self { arcs: Vec::new(), ..self.clone() }
    }

    /// Same structure with a replaced attribute matrix.
    pub fn with_attributes(&self, attributes: Matrix) -> Result<Self> {
        if attributes.rows() != self.node_count {
            return Err(Error::ShapeMismatch(format!(
                "attribute matrix has {} rows for {} nodes",
                attributes.rows(),
                self.node_count
            )));
        }
        Ok(Self { attributes, ..self.clone() })
    }

    pub fn all_nodes(&self) -> NodeSet {
        NodeSet((0..self.node_count).collect())
    }
}

/// Sorted, duplicate-free set of node indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSet(Vec<usize>);

impl NodeSet {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        let set: BTreeSet<usize> = members.into_iter().collect();
        Self(set.into_iter().collect())
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    fn check_range(&self, node_count: usize) -> Result<()> {
        match self.0.last() {
            Some(&index) if index >= node_count => {
                Err(Error::IndexOutOfRange { index, len: node_count })
            }
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self::new(iter)
    }
}

/// A node-induced subgraph and the original index of each of its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgraph {
    pub graph: AttributedGraph,
    /// `original_nodes[new] = old`
    pub original_nodes: Vec<usize>,
}

/// Keeps the nodes in `keep` (re-indexed densely in ascending original
/// order) and every arc whose endpoints are both kept.
pub fn node_induced_subgraph(g: &AttributedGraph, keep: &NodeSet) -> Result<Subgraph> {
    keep.check_range(g.node_count)?;
    let mut new_index = vec![usize::MAX; g.node_count];
    for (new, &old) in keep.members().iter().enumerate() {
        new_index[old] = new;
    }
    // Pair-mates share endpoints, so they survive together and stay adjacent.
    let arcs = g
        .arcs
        .iter()
        .filter(|a| new_index[a.src] != usize::MAX && new_index[a.dst] != usize::MAX)
        .map(|a| Arc::new(new_index[a.src], new_index[a.dst]))
        .collect();
    let mut attributes = Matrix::zeros(keep.len(), g.attr_dim());
    for (new, &old) in keep.members().iter().enumerate() {
        attributes.row_mut(new).copy_from_slice(g.attributes.row(old));
    }
    let graph = AttributedGraph {
        graph_id: g.graph_id.clone(),
        node_count: keep.len(),
        arcs,
        attributes,
        directedness: g.directedness,
        label: g.label,
    };
    Ok(Subgraph { graph, original_nodes: keep.members().to_vec() })
}

/// All nodes of `g` not in `keep`.
pub fn complement_set(g: &AttributedGraph, keep: &NodeSet) -> Result<NodeSet> {
    keep.check_range(g.node_count)?;
    Ok(NodeSet((0..g.node_count).filter(|&v| !keep.contains(v)).collect()))
}
