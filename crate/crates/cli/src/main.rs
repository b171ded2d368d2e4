use std::collections::BTreeSet;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gexplain::datasets::{generate_ba2motifs, load_dataset, save_dataset, Dataset, SplitPart};
use gexplain::dot::to_dot;
use gexplain::explainer::{
    explain, Agg, AttrSharing, EdgeSharing, ExplainConfig, ExplainMode, Explanation, HardConcreteConfig, PairAgg,
};
use gexplain::graph::AttributedGraph;
use gexplain::metrics::{evaluate, write_csv, Budget, GraphVerdict};
use gexplain::model::{load_model, train, Architecture, GnnModel, TrainParams};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "gexplain", version, about = "Train graph classifiers and explain their predictions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    GenDataset(GenArgs),
    /// Train a GCN classifier on a dataset.
    Train(TrainArgs),
    /// Learn masks and write one explanation per graph.
    Explain(ExplainArgs),
    /// Score explanations with EP and sparsity.
    Eval(EvalArgs),
    /// Render explanations as Graphviz DOT.
    ExportDot(DotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ba2motifs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Part {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    hidden: usize,
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "ILLUMINATI_JOBS", default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct Selection {
    /// Which split to process.
    #[arg(long, value_enum, default_value = "test")]
    split: Part,
    /// Process only these graph ids (overrides --split).
    #[arg(long = "id")]
    ids: Vec<String>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    select: Selection,
    #[arg(long, value_enum, default_value = "full")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "max")]
    agg1: AggArg,
    #[arg(long, value_enum, default_value = "max")]
    agg2: AggArg,
    #[arg(long, value_enum, default_value = "mean")]
    pair_agg: PairAggArg,
    #[arg(long, value_enum, default_value = "independent")]
    edge_sharing: EdgeSharingArg,
    #[arg(long, value_enum, default_value = "independent")]
    attr_sharing: AttrSharingArg,
    #[arg(long)]
    lambda_edge_size: Option<f64>,
    #[arg(long)]
    lambda_attr_size: Option<f64>,
    #[arg(long)]
    lambda_edge_entropy: Option<f64>,
    #[arg(long)]
    lambda_attr_entropy: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Use u = 0.5 instead of sampled noise.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "ILLUMINATI_JOBS", default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    explanations: PathBuf,
    #[command(flatten)]
    select: Selection,
    #[arg(long, conflicts_with = "rate")]
    top_k: Option<usize>,
    #[arg(long)]
    rate: Option<f64>,
    /// Also report EP with only each node's top attributes kept.
    #[arg(long)]
    attr_top: Option<usize>,
    /// Write per-graph verdicts for every top-k budget from 1 to the largest graph.
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, env = "ILLUMINATI_JOBS", default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct DotArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    explanations: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    select: Selection,
    /// Attributes listed per node tooltip.
    #[arg(long, default_value_t = 3)]
    top_attrs: usize,
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    Full,
    EdgeOnly,
    AttributeOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggArg {
    Max,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairAggArg {
    Mean,
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum EdgeSharingArg {
    Independent,
    PairShared,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AttrSharingArg {
    Independent,
    PerNode,
    Global,
}

impl AggArg {
    fn core(self) -> Agg {
        match self {
            AggArg::Max => Agg::Max,
            AggArg::Mean => Agg::Mean,
        }
    }
}

/// A failure with its exit code: 2 for usage and I/O, 3 for computation.
struct Failure {
    code: u8,
    message: String,
}

type Outcome<T> = Result<T, Failure>;

fn usage(e: impl Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn compute(e: impl Display) -> Failure {
    Failure { code: 3, message: e.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenDataset(a) => gen_dataset(a),
        Command::Train(a) => train_cmd(a),
        Command::Explain(a) => explain_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::ExportDot(a) => export_dot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn check_writable(path: &Path, force: bool) -> Outcome<()> {
    if path.exists() && !force {
        return Err(usage(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> std::io::Result<()>) -> Outcome<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path.file_name().ok_or_else(|| usage(format!("{} is not a file path", path.display())))?;
    let tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .suffix(name)
        .tempfile_in(dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    write(tmp.path()).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    tmp.persist(path).map_err(|e| usage(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    write_atomic(path, |tmp| fs::write(tmp, text))
}

fn thread_pool(jobs: usize) -> Outcome<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(usage)
}

fn read_dataset(path: &Path) -> Outcome<Dataset> {
    load_dataset(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_model(path: &Path) -> Outcome<GnnModel> {
    load_model(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "na".to_string(), |x| x.to_string())
}

/// Graph ids can hold any text; file names keep only a safe subset.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn select<'a>(d: &'a Dataset, sel: &Selection) -> Outcome<Vec<&'a AttributedGraph>> {
    if !sel.ids.is_empty() {
        let wanted: BTreeSet<&str> = sel.ids.iter().map(String::as_str).collect();
        let found: Vec<_> = d.graphs.iter().filter(|g| wanted.contains(g.graph_id())).collect();
        if found.len() != wanted.len() {
            let have: BTreeSet<&str> = found.iter().map(|g| g.graph_id()).collect();
            let missing: Vec<&str> = wanted.difference(&have).copied().collect();
            return Err(usage(format!("unknown graph id(s): {}", missing.join(", "))));
        }
        return Ok(found);
    }
    let indices: Vec<usize> = match sel.split {
        Part::Train => d.split_indices(SplitPart::Train).to_vec(),
        Part::Validation => d.split_indices(SplitPart::Validation).to_vec(),
        Part::Test => d.split_indices(SplitPart::Test).to_vec(),
        Part::All => (0..d.graphs.len()).collect(),
    };
    Ok(indices.into_iter().map(|i| &d.graphs[i]).collect())
}

fn gen_dataset(a: GenArgs) -> Outcome<()> {
    check_writable(&a.out, a.force)?;
    let d = match a.kind {
        Kind::Ba2motifs => generate_ba2motifs(a.n, a.seed).map_err(usage)?,
    };
    write_atomic(&a.out, |tmp| save_dataset(&d, tmp).map_err(std::io::Error::other))?;
    let nodes: usize = d.graphs.iter().map(AttributedGraph::node_count).sum();
    println!(
        "graphs={} train={} val={} test={} avg_nodes={}",
        d.graphs.len(),
        d.split.train.len(),
        d.split.validation.len(),
        d.split.test.len(),
        nodes as f64 / d.graphs.len().max(1) as f64
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Outcome<()> {
    let d = read_dataset(&a.data)?;
    check_writable(&a.out, a.force)?;
    let arch = Architecture {
        attr_dim: d.attr_dim,
        gcn_widths: vec![a.hidden; a.layers],
        head_widths: Vec::new(),
        num_classes: d.num_classes,
    };
    let params = TrainParams { lr: a.lr, epochs: a.epochs, seed: a.seed };
    let out = thread_pool(a.jobs)?.install(|| train(&arch, &d, &params)).map_err(|e| match e {
        gexplain::Error::EmptyDataset => usage(e),
        e => compute(e),
    })?;
    write_text(&a.out, &out.model.to_json())?;
    println!(
        "accuracy train={} val={} test={}",
        out.train_accuracy,
        fmt_opt(out.val_accuracy),
        fmt_opt(out.test_accuracy)
    );
    Ok(())
}

fn explain_config(a: &ExplainArgs) -> Outcome<ExplainConfig> {
    let base = ExplainConfig::default();
    let cfg = ExplainConfig {
        epochs: a.epochs.unwrap_or(base.epochs),
        learning_rate: a.lr.unwrap_or(base.learning_rate),
        lambda_edge_size: a.lambda_edge_size.unwrap_or(base.lambda_edge_size),
        lambda_attr_size: a.lambda_attr_size.unwrap_or(base.lambda_attr_size),
        lambda_edge_entropy: a.lambda_edge_entropy.unwrap_or(base.lambda_edge_entropy),
        lambda_attr_entropy: a.lambda_attr_entropy.unwrap_or(base.lambda_attr_entropy),
        agg1: a.agg1.core(),
        agg2: a.agg2.core(),
        pair_agg: match a.pair_agg {
            PairAggArg::Mean => PairAgg::Mean,
            PairAggArg::Max => PairAgg::Max,
            PairAggArg::Min => PairAgg::Min,
        },
        mode: match a.mode {
            ModeArg::Full => ExplainMode::Full,
            ModeArg::EdgeOnly => ExplainMode::EdgeOnly,
            ModeArg::AttributeOnly => ExplainMode::AttributeOnly,
        },
        edge_sharing: match a.edge_sharing {
            EdgeSharingArg::Independent => EdgeSharing::Independent,
            EdgeSharingArg::PairShared => EdgeSharing::PairShared,
        },
        attr_sharing: match a.attr_sharing {
            AttrSharingArg::Independent => AttrSharing::Independent,
            AttrSharingArg::PerNode => AttrSharing::PerNode,
            AttrSharingArg::Global => AttrSharing::Global,
        },
        hard_concrete: HardConcreteConfig {
            beta: a.beta.unwrap_or(base.hard_concrete.beta),
            stochastic: !a.deterministic,
            seed: a.seed,
            ..base.hard_concrete
        },
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn explain_cmd(a: ExplainArgs) -> Outcome<()> {
    let cfg = explain_config(&a)?;
    let model = read_model(&a.model)?;
    let d = read_dataset(&a.data)?;
    let graphs = select(&d, &a.select)?;
    if model.attr_dim() != d.attr_dim {
        return Err(compute(format!("model reads {} attributes, dataset has {}", model.attr_dim(), d.attr_dim)));
    }
    fs::create_dir_all(&a.out_dir).map_err(|e| usage(format!("{}: {e}", a.out_dir.display())))?;
    let paths: Vec<PathBuf> = graphs.iter().map(|g| a.out_dir.join(format!("{}.json", file_stem(g.graph_id())))).collect();
    for p in &paths {
        check_writable(p, a.force)?;
    }
    thread_pool(a.jobs)?.install(|| {
        graphs.par_iter().zip(&paths).try_for_each(|(g, p)| {
            let e = explain(&model, g, &cfg).map_err(compute)?;
            write_text(p, &e.to_json())
        })
    })?;
    println!("explained={} out_dir={}", graphs.len(), a.out_dir.display());
    Ok(())
}

/// Explanations found in `dir` for the selected graphs; absent files are
/// left out so the metrics report every missing id at once.
fn read_explanations(dir: &Path, graphs: &[&AttributedGraph]) -> Outcome<Vec<Explanation>> {
    let mut out = Vec::new();
    for g in graphs {
        let path = dir.join(format!("{}.json", file_stem(g.graph_id())));
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        out.push(Explanation::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?);
    }
    Ok(out)
}

fn eval_cmd(a: EvalArgs) -> Outcome<()> {
    let budget = match (a.top_k, a.rate) {
        (_, Some(r)) => Budget::Rate(r),
        (Some(k), None) => Budget::TopK(k),
        (None, None) => Budget::TopK(5),
    };
    budget.validate().map_err(usage)?;
    for p in a.sweep.iter().chain(&a.report) {
        check_writable(p, a.force)?;
    }
    let model = read_model(&a.model)?;
    let d = read_dataset(&a.data)?;
    let graphs = select(&d, &a.select)?;
    let expls = read_explanations(&a.explanations, &graphs)?;
    let pool = thread_pool(a.jobs)?;
    let report = pool.install(|| evaluate(&model, &graphs, &expls, budget, a.attr_top)).map_err(compute)?;
    println!(
        "ep_explained={} ep_remaining={} sparsity={} eligible={}",
        fmt_opt(report.ep_explained),
        fmt_opt(report.ep_remaining),
        fmt_opt(report.sparsity),
        report.eligible_count
    );
    if a.attr_top.is_some() {
        println!("ep_attribute={}", fmt_opt(report.ep_attribute));
    }
    if let Some(path) = &a.sweep {
        let largest = graphs.iter().map(|g| g.node_count()).max().unwrap_or(0);
        let mut rows: Vec<GraphVerdict> = Vec::new();
        for k in 1..=largest {
            let r = pool.install(|| evaluate(&model, &graphs, &expls, Budget::TopK(k), None)).map_err(compute)?;
            rows.extend(r.per_graph.into_iter().filter(|v| !v.skipped));
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).map_err(usage)?;
        write_atomic(path, |tmp| fs::write(tmp, &buf))?;
    }
    if let Some(path) = &a.report {
        write_text(path, &report.to_json())?;
    }
    Ok(())
}

fn export_dot(a: DotArgs) -> Outcome<()> {
    let d = read_dataset(&a.data)?;
    let graphs = select(&d, &a.select)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| usage(format!("{}: {e}", a.out_dir.display())))?;
    let expls = read_explanations(&a.explanations, &graphs)?;
    if expls.len() != graphs.len() {
        let have: BTreeSet<&str> = expls.iter().map(|e| e.graph_id.as_str()).collect();
        let missing: Vec<&str> = graphs.iter().map(|g| g.graph_id()).filter(|id| !have.contains(id)).collect();
        return Err(compute(gexplain::Error::MissingExplanation(missing.iter().map(|s| s.to_string()).collect())));
    }
    let paths: Vec<PathBuf> = graphs.iter().map(|g| a.out_dir.join(format!("{}.dot", file_stem(g.graph_id())))).collect();
    for p in &paths {
        check_writable(p, a.force)?;
    }
    for ((g, e), p) in graphs.iter().zip(&expls).zip(&paths) {
        let text = to_dot(g, e, a.top_attrs, None).map_err(compute)?;
        write_text(p, &text)?;
    }
    println!("exported={} out_dir={}", graphs.len(), a.out_dir.display());
    Ok(())
}
