use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hae_core::autodiff::{load_checkpoint, save_checkpoint, RngStream};
use hae_core::hin::{generate_synthetic_hin, load_hetero_graph, save_hetero_graph, DatasetPaths, HeteroGraph, Labels, SyntheticConfig};
use hae_core::layers::{GraphInputs, HaeModel, ModelConfig, Variant};
use hae_core::linalg::Matrix;
use hae_core::parallel::Execution;
use hae_core::semantics::{binary_adjacency, common_target, SemanticCache, SemanticStructure};
use hae_core::train::{evaluate_embeddings, extract_embeddings, protocol_split, summarize, train, TrainConfig};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::exit::CliError;
use crate::manifest::{ManifestWriter, FILE_NAME};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Global {
    pub seed: Option<u64>,
    pub quiet: bool,
    pub force: bool,
}

impl Global {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    CliError::Usage(msg.into()).into()
}

fn data(msg: impl Into<String>) -> anyhow::Error {
    CliError::Data(msg.into()).into()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

/// Creates `out`, refusing a non-empty directory without `--force` and
/// refusing any of the `inputs` directories outright.
fn prepare_out_dir(out: &Path, force: bool, inputs: &[&Path]) -> Result<()> {
    if inputs.iter().any(|d| same_path(out, d)) {
        return Err(usage(format!("{} is an input directory; choose another output directory", out.display())));
    }
    if out.exists() {
        if !out.is_dir() {
            return Err(usage(format!("{} exists and is not a directory", out.display())));
        }
        let occupied = fs::read_dir(out)
            .with_context(|| format!("reading {}", out.display()))?
            .next()
            .is_some();
        if occupied && !force {
            return Err(usage(format!("{} is not empty; pass --force to overwrite", out.display())));
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

/// Loads `nodes.tsv`, `edges.tsv` and, when present, `features.tsv`.
/// Returns the graph and the files it was read from.
fn load_dataset(dir: &Path) -> Result<(HeteroGraph, Vec<PathBuf>)> {
    let paths = DatasetPaths::in_dir(dir);
    let features = paths.features.exists().then_some(paths.features.as_path());
    let g = load_hetero_graph(&paths.nodes, &paths.edges, features)
        .with_context(|| format!("loading dataset {}", dir.display()))?;
    let mut files = vec![paths.nodes.clone(), paths.edges.clone()];
    files.extend(features.map(Path::to_path_buf));
    Ok((g, files))
}

fn parse_structures(specs: &[String]) -> Result<Vec<SemanticStructure>> {
    if specs.is_empty() {
        return Err(usage("no structures given"));
    }
    specs
        .iter()
        .map(|s| SemanticStructure::parse(s).with_context(|| format!("structure `{s}`")))
        .collect()
}

fn require_features(inputs: &GraphInputs, target: &str) -> Result<()> {
    if inputs.feature_dim() == 0 {
        return Err(data(format!("target type `{target}` has no features")));
    }
    Ok(())
}

/// The labels, which must sit on the structures' target type.
fn require_labels<'g>(g: &'g HeteroGraph, target: &str) -> Result<&'g Labels> {
    let labels = g
        .labels()
        .ok_or_else(|| data("dataset has no labels; nodes.tsv needs a label column on the target type"))?;
    if g.type_name(labels.node_type) != target {
        return Err(data(format!(
            "labels are on type `{}` but the structures target `{target}`",
            g.type_name(labels.node_type)
        )));
    }
    Ok(labels)
}

pub struct GenerateArgs {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn generate(args: &GenerateArgs, global: Global) -> Result<()> {
    let mut cfg: SyntheticConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    prepare_out_dir(&args.out, global.force, &[])?;
    let paths = DatasetPaths::in_dir(&args.out);
    let manifest = ManifestWriter::begin(
        args.out.join(FILE_NAME),
        "generate",
        Some(cfg.seed),
        json!({ "synthetic": cfg }),
        &args.config.iter().cloned().collect::<Vec<_>>(),
        vec![paths.nodes.clone(), paths.edges.clone(), paths.features.clone()],
    )?;
    let g = generate_synthetic_hin(&cfg)?;
    save_hetero_graph(&g, &paths)?;
    manifest.finish(None)?;
    global.note(format!("wrote {} nodes to {}", g.total_nodes(), args.out.display()));
    Ok(())
}

pub struct CommuteArgs {
    pub data: PathBuf,
    pub structures: Vec<String>,
    pub model_config: Option<PathBuf>,
    pub out: PathBuf,
}

/// `i<TAB>j<TAB>value` rows in row-major order.
fn triples<V: std::fmt::Display>(rows: impl Iterator<Item = (usize, usize, V)>) -> String {
    let mut text = String::from("i\tj\tvalue\n");
    for (i, j, v) in rows {
        writeln!(text, "{i}\t{j}\t{v}").expect("writing to a String");
    }
    text
}

fn dense_nonzeros(m: &Matrix) -> impl Iterator<Item = (usize, usize, String)> + '_ {
    (0..m.rows()).flat_map(move |i| {
        (0..m.cols())
            .filter(move |&j| m[(i, j)] != 0.0)
            .map(move |j| (i, j, format!("{:?}", m[(i, j)])))
    })
}

pub fn commute(args: &CommuteArgs, global: Global) -> Result<()> {
    // flags win over the config, which wins over the defaults
    let specs = if !args.structures.is_empty() {
        args.structures.clone()
    } else if let Some(p) = &args.model_config {
        read_json::<ModelConfig>(p)?.structures
    } else {
        ModelConfig::default().structures
    };
    let structures = parse_structures(&specs)?;
    let target = common_target(&structures)?.to_string();
    prepare_out_dir(&args.out, global.force, &[&args.data])?;
    let (g, mut inputs) = load_dataset(&args.data)?;
    inputs.extend(args.model_config.iter().cloned());

    let mut outputs = Vec::new();
    for k in 0..structures.len() {
        outputs.push(args.out.join(format!("s{k}_counts.tsv")));
        outputs.push(args.out.join(format!("s{k}_similarity.tsv")));
    }
    outputs.push(args.out.join("mask.tsv"));
    outputs.push(args.out.join("index.json"));
    let canonical: Vec<String> = structures.iter().map(ToString::to_string).collect();
    let manifest = ManifestWriter::begin(
        args.out.join(FILE_NAME),
        "commute",
        None,
        json!({ "data": args.data, "structures": canonical }),
        &inputs,
        outputs,
    )?;

    let cache = SemanticCache::build(&g, &structures, Execution::Parallel)?;
    let mut counts = Vec::with_capacity(structures.len());
    for (k, s) in structures.iter().enumerate() {
        let compiled = cache.get(s).expect("every structure was compiled");
        write_text(&args.out.join(format!("s{k}_counts.tsv")), &triples(compiled.counts.nonzeros()))?;
        write_text(
            &args.out.join(format!("s{k}_similarity.tsv")),
            &triples(dense_nonzeros(compiled.similarity.values())),
        )?;
        counts.push(compiled.counts.clone());
    }
    let adjacency = binary_adjacency(&counts)?;
    let mask = (0..adjacency.n()).flat_map(|i| adjacency.neighbors(i).iter().map(move |&j| (i, j, 1)));
    write_text(&args.out.join("mask.tsv"), &triples(mask))?;
    let ty = g.type_id(&target)?;
    write_json(
        &args.out.join("index.json"),
        &json!({ "target_type": target, "structures": canonical, "ids": g.ids().ids_of(ty) }),
    )?;
    manifest.finish(None)?;
    global.note(format!(
        "{} structures over {} `{target}` nodes, {} mask entries",
        structures.len(),
        adjacency.n(),
        adjacency.edge_count()
    ));
    Ok(())
}

pub struct TrainArgs {
    pub data: PathBuf,
    pub model_config: Option<PathBuf>,
    pub train_config: Option<PathBuf>,
    pub structures: Vec<String>,
    pub variant: Option<String>,
    pub out: PathBuf,
}

pub const CHECKPOINT: &str = "checkpoint.bin";
pub const REPORT: &str = "report.json";
pub const MODEL_CONFIG: &str = "model.json";
pub const TRAIN_CONFIG: &str = "train.json";

pub fn train_cmd(args: &TrainArgs, global: Global) -> Result<()> {
    let mut model_cfg: ModelConfig = match &args.model_config {
        Some(p) => read_json(p)?,
        None => ModelConfig::default(),
    };
    if !args.structures.is_empty() {
        model_cfg.structures = args.structures.clone();
    }
    if let Some(v) = &args.variant {
        model_cfg.variant = Variant::Named(v.clone());
    }
    let mut train_cfg: TrainConfig = match &args.train_config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = global.seed {
        train_cfg.seed = seed;
    }
    model_cfg.validate()?;
    train_cfg.validate()?;
    let structures = parse_structures(&model_cfg.structures)?;
    prepare_out_dir(&args.out, global.force, &[&args.data])?;

    let (g, mut inputs) = load_dataset(&args.data)?;
    inputs.extend(args.model_config.iter().cloned());
    inputs.extend(args.train_config.iter().cloned());
    let [checkpoint, report_path, model_path, train_path] =
        [CHECKPOINT, REPORT, MODEL_CONFIG, TRAIN_CONFIG].map(|f| args.out.join(f));
    let manifest = ManifestWriter::begin(
        args.out.join(FILE_NAME),
        "train",
        Some(train_cfg.seed),
        json!({ "data": args.data, "model": model_cfg, "train": train_cfg }),
        &inputs,
        vec![checkpoint.clone(), report_path.clone(), model_path.clone(), train_path.clone()],
    )?;

    let target = common_target(&structures)?;
    let labels = require_labels(&g, target)?;
    let graph_inputs = GraphInputs::from_graph(&g, &structures, Execution::Parallel)?;
    require_features(&graph_inputs, target)?;
    let split = protocol_split(&g, train_cfg.train_ratio, train_cfg.val_ratio, train_cfg.seed)?;
    let model = HaeModel::build(
        &model_cfg,
        graph_inputs.feature_dim(),
        labels.num_classes(),
        &mut RngStream::new(train_cfg.seed),
    )?;
    global.note(format!(
        "training {} layers on {} nodes ({} train, {} val, {} test)",
        model.order(),
        graph_inputs.n(),
        split.train_ids.len(),
        split.val_ids.len(),
        split.test_ids.len()
    ));
    let mut report = train(&model, &graph_inputs, labels, &split, &train_cfg)?;
    // wall clock and memory are not reproducible, so they go to the manifest
    let timing = report.timing.take();

    save_checkpoint(&checkpoint, &model.snapshot())?;
    write_json(&report_path, &report)?;
    write_json(&model_path, &model_cfg)?;
    write_json(&train_path, &train_cfg)?;
    manifest.finish(timing)?;

    global.note(format!(
        "best epoch {} of {}{}",
        report.best_epoch,
        report.epochs.len(),
        if report.stopped_early { " (stopped early)" } else { "" }
    ));
    for note in &report.notes {
        global.note(format!("note: {note}"));
    }
    for layer in &report.omega {
        for w in &layer.weights {
            global.note(format!("omega[{}] {:<16} {:.4}", layer.layer, w.structure, w.weight));
        }
    }
    Ok(())
}

pub struct ModelArgs {
    pub data: PathBuf,
    pub checkpoint: PathBuf,
    /// Defaults to `model.json` next to the checkpoint.
    pub model_config: Option<PathBuf>,
}

struct Restored {
    graph: HeteroGraph,
    inputs: Vec<PathBuf>,
    embeddings: Matrix,
    target: String,
    classes: usize,
}

fn restore(args: &ModelArgs) -> Result<Restored> {
    let config_path = match &args.model_config {
        Some(p) => p.clone(),
        None => args
            .checkpoint
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(MODEL_CONFIG),
    };
    let cfg: ModelConfig = read_json(&config_path)?;
    cfg.validate()?;
    let structures = parse_structures(&cfg.structures)?;
    let (graph, mut inputs) = load_dataset(&args.data)?;
    inputs.push(config_path);
    inputs.push(args.checkpoint.clone());
    let target = common_target(&structures)?.to_string();
    let graph_inputs = GraphInputs::from_graph(&graph, &structures, Execution::Parallel)?;
    require_features(&graph_inputs, &target)?;
    let params = load_checkpoint(&args.checkpoint)?;
    // the head bias is 1 x classes
    let classes = params
        .iter()
        .find(|(name, _)| name == "head.b")
        .map(|(_, m)| m.cols())
        .ok_or_else(|| data(format!("{} has no classifier head", args.checkpoint.display())))?;
    let model = HaeModel::from_parameters(&cfg, graph_inputs.feature_dim(), classes, &params)
        .context("checkpoint does not fit this dataset and model config")?;
    let embeddings = extract_embeddings(&model, &graph_inputs)?;
    Ok(Restored {
        target,
        classes,
        graph,
        inputs,
        embeddings,
    })
}

pub struct EvalArgs {
    pub model: ModelArgs,
    pub train_ratio: f64,
    pub repeats: usize,
}

/// Runs `repeats` probe/k-means evaluations with seeds `seed, seed+1, ...`
/// and prints their mean and standard deviation as JSON.
pub fn eval(args: &EvalArgs, global: Global) -> Result<()> {
    if !(args.train_ratio > 0.0 && args.train_ratio < 1.0) {
        return Err(usage(format!("--train-ratio must lie in (0,1), got {}", args.train_ratio)));
    }
    if args.repeats == 0 {
        return Err(usage("--repeats must be >= 1"));
    }
    let restored = restore(&args.model)?;
    let labels = require_labels(&restored.graph, &restored.target)?;
    if labels.num_classes() != restored.classes {
        return Err(data(format!(
            "checkpoint predicts {} classes but the dataset has {}",
            restored.classes,
            labels.num_classes()
        )));
    }
    let base = global.seed.unwrap_or(0);
    // each repeat is single-threaded; the fan-out is across repeats
    let runs = (0..args.repeats)
        .into_par_iter()
        .map(|k| {
            let seed = base.wrapping_add(k as u64);
            let split = protocol_split(&restored.graph, args.train_ratio, 0.0, seed)?;
            evaluate_embeddings(&restored.embeddings, labels, &split, seed, Execution::Sequential)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = summarize(&runs);
    println!("{}", serde_json::to_string_pretty(&summary)?);
    global.note(format!(
        "{} repeats at train ratio {}: macro-F1 {:.4} ± {:.4}",
        args.repeats, args.train_ratio, summary.macro_f1_mean, summary.macro_f1_std
    ));
    Ok(())
}

pub struct EmbedArgs {
    pub model: ModelArgs,
    pub out: PathBuf,
}

/// Writes `node_id<TAB>v0<TAB>...` rows, one per target node, in the
/// dataset's node order. The manifest goes to `<out>.manifest.json`.
pub fn embed(args: &EmbedArgs, global: Global) -> Result<()> {
    if args.out.exists() && !global.force {
        return Err(usage(format!("{} exists; pass --force to overwrite", args.out.display())));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        if same_path(parent, &args.model.data) {
            return Err(usage(format!("{} is inside the input directory", args.out.display())));
        }
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file_name = args
        .out
        .file_name()
        .ok_or_else(|| usage(format!("{} is not a file path", args.out.display())))?;
    let manifest_path = args
        .out
        .with_file_name(format!("{}.{FILE_NAME}", file_name.to_string_lossy()));

    let restored = restore(&args.model)?;
    let manifest = ManifestWriter::begin(
        manifest_path,
        "embed",
        None,
        json!({ "data": args.model.data, "checkpoint": args.model.checkpoint }),
        &restored.inputs,
        vec![args.out.clone()],
    )?;
    let ty = restored.graph.type_id(&restored.target)?;
    let ids = restored.graph.ids().ids_of(ty);
    let emb = &restored.embeddings;
    let mut text = String::new();
    for (i, id) in ids.iter().enumerate() {
        text.push_str(id);
        for v in emb.row(i) {
            write!(text, "\t{v:?}").expect("writing to a String");
        }
        text.push('\n');
    }
    write_text(&args.out, &text)?;
    manifest.finish(None)?;
    global.note(format!("wrote {}x{} embeddings to {}", emb.rows(), emb.cols(), args.out.display()));
    Ok(())
}
