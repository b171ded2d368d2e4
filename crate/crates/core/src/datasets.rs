//! Graph datasets: the JSON file format and BA-2motifs generation.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Directedness};
use crate::linalg::Matrix;

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<AttributedGraph>,
    pub attr_dim: usize,
    pub num_classes: usize,
    pub split: Split,
    pub generation_seed: Option<u64>,
}

impl Dataset {
    /// Checks split ranges and disjointness, attribute widths and labels.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (name, part) in [
            ("train", &self.split.train),
            ("validation", &self.split.validation),
            ("test", &self.split.test),
        ] {
            for &i in part {
                if i >= self.graphs.len() {
                    return Err(Error::Validation(format!("{name} split index {i} out of range")));
                }
                if !seen.insert(i) {
                    return Err(Error::Validation(format!("graph {i} appears in more than one split slot")));
                }
            }
        }
        for g in &self.graphs {
            if g.attr_dim() != self.attr_dim {
                return Err(Error::Validation(format!(
                    "graph `{}` has attr_dim {}, dataset declares {}",
                    g.graph_id(),
                    g.attr_dim(),
                    self.attr_dim
                )));
            }
            if let Some(y) = g.label() {
                if y >= self.num_classes {
                    return Err(Error::Validation(format!(
                        "graph `{}` label {y} ≥ num_classes {}",
                        g.graph_id(),
                        self.num_classes
                    )));
                }
            }
        }
        Ok(())
    }

    /// Labels of every graph; all must be present.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.graphs
            .iter()
            .map(|g| {
                g.label()
                    .ok_or_else(|| Error::Validation(format!("graph `{}` has no label", g.graph_id())))
            })
            .collect()
    }

    pub fn split_indices(&self, part: SplitPart) -> &[usize] {
        match part {
            SplitPart::Train => &self.split.train,
            SplitPart::Validation => &self.split.validation,
            SplitPart::Test => &self.split.test,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DatasetFile::from(self)).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.into_dataset()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

#[derive(Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    n: usize,
    directed: bool,
    edges: Vec<[usize; 2]>,
    x: Vec<Vec<f64>>,
    y: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    format_version: u32,
    name: String,
    attr_dim: usize,
    num_classes: usize,
    #[serde(default)]
    generation_seed: Option<u64>,
    splits: Split,
    graphs: Vec<GraphRecord>,
}

impl From<&Dataset> for DatasetFile {
    fn from(d: &Dataset) -> Self {
        let graphs = d
            .graphs
            .iter()
            .map(|g| GraphRecord {
                id: g.graph_id().to_string(),
                n: g.node_count(),
                directed: !g.is_undirected(),
                edges: g.edge_list().into_iter().map(|(s, t)| [s, t]).collect(),
                x: g.attributes().to_rows(),
                y: g.label(),
            })
            .collect();
        Self {
            format_version: DATASET_FORMAT_VERSION,
            name: d.name.clone(),
            attr_dim: d.attr_dim,
            num_classes: d.num_classes,
            generation_seed: d.generation_seed,
            splits: d.split.clone(),
            graphs,
        }
    }
}

impl DatasetFile {
    fn into_dataset(self) -> Result<Dataset> {
        if self.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::VersionMismatch { found: self.format_version, expected: DATASET_FORMAT_VERSION });
        }
        let attr_dim = self.attr_dim;
        let graphs = self
            .graphs
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                let x = Matrix::from_rows(&r.x, attr_dim).ok_or_else(|| {
                    Error::Validation(format!("graphs[{k}] (`{}`): every row of x must have {attr_dim} values", r.id))
                })?;
                let dir = if r.directed { Directedness::Directed } else { Directedness::Undirected };
                let edges: Vec<(usize, usize)> = r.edges.iter().map(|e| (e[0], e[1])).collect();
                AttributedGraph::new(r.id.clone(), r.n, &edges, x, dir, r.y)
                    .map_err(|e| Error::Validation(format!("graphs[{k}] (`{}`): {e}", r.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let dataset = Dataset {
            name: self.name,
            graphs,
            attr_dim,
            num_classes: self.num_classes,
            split: self.splits,
            generation_seed: self.generation_seed,
        };
        dataset.validate()?;
        Ok(dataset)
    }
}

fn is_gzip_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

/// Writes the dataset; a `.gz` extension selects gzip compression.
pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = dataset.to_json();
    let file = BufWriter::new(File::create(path)?);
    if is_gzip_path(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        enc.write_all(text.as_bytes())?;
        enc.finish()?.flush()?;
    } else {
        let mut file = file;
        file.write_all(text.as_bytes())?;
        file.flush()?;
    }
    Ok(())
}

/// Reads a dataset, decompressing gzip input (by extension or magic bytes).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let text = if is_gzip_path(path) || bytes.starts_with(&[0x1f, 0x8b]) {
        let mut s = String::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_string(&mut s)
            .map_err(|e| Error::Parse(format!("gzip: {e}")))?;
        s
    } else {
        String::from_utf8(bytes).map_err(|e| Error::Parse(format!("not UTF-8: {e}")))?
    };
    Dataset::from_json(&text)
}

/// Number of nodes in the Barabási–Albert base graph.
pub const BA_BASE_NODES: usize = 20;
/// Constant attribute value and width of BA-2motifs node features.
pub const BA_ATTR_VALUE: f64 = 0.1;
pub const BA_ATTR_DIM: usize = 10;

/// House motif: a 5-cycle plus the chord (1, 4) closing the roof triangle.
pub const HOUSE_EDGES: [(usize, usize); 6] = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 4)];
pub const CYCLE_EDGES: [(usize, usize); 5] = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motif {
    House,
    Cycle,
}

impl Motif {
    pub fn label(self) -> usize {
        match self {
            Motif::House => 0,
            Motif::Cycle => 1,
        }
    }

    pub fn edges(self) -> &'static [(usize, usize)] {
        match self {
            Motif::House => &HOUSE_EDGES,
            Motif::Cycle => &CYCLE_EDGES,
        }
    }
}

/// Preferential-attachment tree: nodes 0–1 start connected and every later
/// node attaches one edge to an endpoint drawn proportionally to degree.
pub fn barabasi_albert_tree<R: Rng>(n: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n < 2 {
        return edges;
    }
    edges.push((0, 1));
    let mut endpoints = vec![0, 1];
    for v in 2..n {
        let target = endpoints[rng.random_range(0..endpoints.len())];
        edges.push((target, v));
        endpoints.push(target);
        endpoints.push(v);
    }
    edges
}

/// One BA-2motifs graph: a 20-node BA base (nodes 0..20) plus the motif on
/// nodes 20..25, joined by one edge between random nodes of each part.
pub fn ba2motifs_graph<R: Rng>(id: String, motif: Motif, rng: &mut R) -> AttributedGraph {
    let mut edges = barabasi_albert_tree(BA_BASE_NODES, rng);
    edges.extend(motif.edges().iter().map(|&(a, b)| (a + BA_BASE_NODES, b + BA_BASE_NODES)));
    let motif_node = BA_BASE_NODES + rng.random_range(0..5);
    let base_node = rng.random_range(0..BA_BASE_NODES);
    edges.push((base_node, motif_node));
    let n = BA_BASE_NODES + 5;
    AttributedGraph::new(
        id,
        n,
        &edges,
        Matrix::filled(n, BA_ATTR_DIM, BA_ATTR_VALUE),
        Directedness::Undirected,
        Some(motif.label()),
    )
    .expect("generated graph is valid")
}

/// Balanced house/cycle dataset with a stratified 80/10/10 split.
pub fn generate_ba2motifs(n_graphs: usize, seed: u64) -> Result<Dataset> {
    if n_graphs < 2 || !n_graphs.is_multiple_of(2) {
        return Err(Error::InvalidCount(format!("n_graphs must be even and ≥ 2, got {n_graphs}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n_graphs / 2;
    let mut motifs: Vec<Motif> = (0..n_graphs).map(|i| if i < half { Motif::House } else { Motif::Cycle }).collect();
    motifs.shuffle(&mut rng);
    let graphs: Vec<AttributedGraph> = motifs
        .iter()
        .enumerate()
        .map(|(i, &m)| ba2motifs_graph(format!("ba2motifs-{i:05}"), m, &mut rng))
        .collect();

    let mut split = Split::default();
    for class in [Motif::House, Motif::Cycle] {
        let mut members: Vec<usize> = (0..n_graphs).filter(|&i| motifs[i] == class).collect();
        members.shuffle(&mut rng);
        let holdout = members.len() / 10;
        let train_len = members.len() - 2 * holdout;
        split.train.extend_from_slice(&members[..train_len]);
        split.validation.extend_from_slice(&members[train_len..train_len + holdout]);
        split.test.extend_from_slice(&members[train_len + holdout..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();

    Ok(Dataset {
        name: "ba2motifs".to_string(),
        graphs,
        attr_dim: BA_ATTR_DIM,
        num_classes: 2,
        split,
        generation_seed: Some(seed),
    })
}
