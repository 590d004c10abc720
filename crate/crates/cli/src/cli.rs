//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dlp2c_classify::{cheap_features, evaluate, train, Algorithm, FeatureDataset, LrSpec, MlpSpec, Model};
use dlp2c_core::artifact::GroundTruthSidecar;
use dlp2c_core::codegen::prototxt::prototxt_check;
use dlp2c_core::codegen::{generate_with, Dialect, GenerateOptions, RuleSet};
use dlp2c_core::eval::{boxplot, boxplot_svg, graph_equivalent, records_to_csv, score_extraction, AccuracyRecord};
use dlp2c_core::graph::{from_json, to_json};
use dlp2c_core::simulator::{generate_dataset, write_atomic, SimConfig};
use dlp2c_core::table::{extract_table_graph, is_design_table, orientation, BowModel, CellGrid, Orientation};
use dlp2c_vision::{extract, render, save, sidecar_path, ExtractorConfig, OcrBackend, RenderSink, RenderStyle};
use ndarray::Array2;
use serde_json::{json, Value};

use crate::service::{self, ServiceConfig, DEFAULT_BODY_LIMIT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "dlp2c", version, about = "Deep-learning design diagrams to code")]
pub struct Cli {
    /// Output and error format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample grammar-valid models into a dataset directory.
    Simulate(SimulateArgs),
    /// Draw a graph as a flow diagram with ground truth.
    Render(RenderArgs),
    /// Recover a graph from a diagram image.
    Extract(ExtractArgs),
    /// Recover a graph from a CSV or JSON table.
    TableExtract(TableArgs),
    /// Train, evaluate and apply figure classifiers.
    #[command(subcommand)]
    Classify(ClassifyCommand),
    /// Emit Keras or Caffe source for a graph.
    Codegen(CodegenArgs),
    /// Score extraction against rendered ground truth.
    Eval(EvalArgs),
    /// Run the HTTP design service.
    Serve(ServeArgs),
}

fn depth_range(s: &str) -> Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad depth {t:?}"));
    let (lo, hi) = match s.split_once(':') {
        Some((a, b)) => (parse(a)?, parse(b)?),
        None => {
            let d = parse(s)?;
            (d, d)
        }
    };
    if lo > hi {
        return Err(format!("empty depth range {s}"));
    }
    Ok((lo, hi))
}

fn style(s: &str) -> Result<RenderStyle, String> {
    RenderStyle::parse(s).ok_or_else(|| format!("unknown style {s:?} (StyleK or StyleC)"))
}

fn dialect(s: &str) -> Result<Dialect, String> {
    Dialect::parse(s).ok_or_else(|| format!("unknown target {s:?} (keras or caffe)"))
}

fn ocr(s: &str) -> Result<OcrBackend, String> {
    if s == "builtin" {
        return Ok(OcrBackend::Builtin);
    }
    match s.split_once(':') {
        Some(("external", cmd)) if !cmd.trim().is_empty() => Ok(OcrBackend::External { command: cmd.to_string() }),
        _ => Err(format!("unknown OCR backend {s:?} (builtin or external:<command>)")),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 3000)]
    pub per_depth: usize,
    /// Depth or inclusive range `lo:hi`.
    #[arg(long, value_parser = depth_range, default_value = "5:40")]
    pub depth: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also render every model in these styles.
    #[arg(long, value_parser = style, value_delimiter = ',')]
    pub render: Vec<RenderStyle>,
    #[arg(long, default_value_t = 1)]
    pub scale: u32,
    #[arg(long)]
    pub concat_probability: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = style, default_value = "StyleK")]
    pub style: RenderStyle,
    #[arg(long, default_value_t = 1)]
    pub scale: u32,
    /// PNG path; the ground truth is written beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// `builtin` or `external:<command>`.
    #[arg(long, value_parser = ocr, default_value = "builtin")]
    pub ocr: OcrBackend,
    /// Extractor settings as JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fill missing hyper-parameters so the graph compiles.
    #[arg(long)]
    pub executable: bool,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write blobs, arrows and diagnostics.
    #[arg(long)]
    pub details: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrientationArg {
    Auto,
    Rows,
    Columns,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// `.csv` or `.json` cell grid.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = OrientationArg::Auto)]
    pub orientation: OrientationArg,
    /// Fail unless the table scores as an architecture table.
    #[arg(long)]
    pub require_design: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelSource {
    /// Diagram style from the ground truth.
    Style,
    /// Name of the parent directory.
    Parent,
}

#[derive(Debug, Subcommand)]
pub enum ClassifyCommand {
    /// Compute image features for every PNG under a directory.
    Features {
        #[arg(long)]
        images: PathBuf,
        #[arg(long, value_enum, default_value_t = LabelSource::Style)]
        label: LabelSource,
        /// `.csv` or `.dlpf` (labels in the sibling `.labels`).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on the training split.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// nb, lr or mlp.
        #[arg(long, default_value = "mlp")]
        algorithm: String,
        /// Hidden layer widths, e.g. `1024,256`.
        #[arg(long, value_delimiter = ',')]
        hidden: Vec<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy on each split and the test confusion matrix.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        confusion: Option<PathBuf>,
    },
    /// Predict the class of images.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CodegenArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = dialect)]
    pub target: Dialect,
    /// Writes to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Omit the softmax classifier after the last layer.
    #[arg(long)]
    pub no_head: bool,
    /// Rule base in TOML instead of the builtin one.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory searched recursively for PNGs with ground truth.
    #[arg(long)]
    pub renders: PathBuf,
    #[arg(long, value_parser = ocr, default_value = "builtin")]
    pub ocr: OcrBackend,
    #[arg(long)]
    pub out: PathBuf,
    /// Summary statistics as JSON.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Box plot of both accuracies.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "DLP2C_STORE", default_value = "dlp2c-store")]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Allowed origin; repeat for several. Any origin when absent.
    #[arg(long)]
    pub cors_origin: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_BODY_LIMIT)]
    pub body_limit: usize,
}

/// What a successful command reports.
pub struct Outcome {
    pub text: String,
    pub json: Value,
}

impl Outcome {
    fn new(text: impl Into<String>, json: Value) -> Outcome {
        Outcome { text: text.into(), json }
    }

    fn silent() -> Outcome {
        Outcome::new("", Value::Null)
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    write_atomic(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn load_graph(path: &Path) -> Result<dlp2c_core::CompGraph> {
    from_json(&read(path)?).with_context(|| format!("{} is not a graph", path.display()))
}

fn simulate(a: &SimulateArgs) -> Result<Outcome> {
    let mut cfg = SimConfig {
        depth_min: a.depth.0,
        depth_max: a.depth.1,
        models_per_depth: a.per_depth,
        seed: a.seed,
        ..SimConfig::default()
    };
    if let Some(p) = a.concat_probability {
        cfg.concat_probability = p;
    }
    let sink = RenderSink {
        styles: a.render.clone(),
        scale: a.scale,
    };
    let sink: Option<&dyn dlp2c_core::simulator::ModelSink> = if a.render.is_empty() { None } else { Some(&sink) };
    let m = generate_dataset(&cfg, &a.out, sink)?;
    Ok(Outcome::new(
        format!("{} models, {} images in {}", m.total_models, m.total_images, a.out.display()),
        json!({ "models": m.total_models, "images": m.total_images, "out": a.out, "config_hash": m.config_hash }),
    ))
}

fn render_cmd(a: &RenderArgs) -> Result<Outcome> {
    let g = load_graph(&a.input)?;
    let r = render(&g, a.style, a.scale)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    save(&r, &a.out)?;
    let side = sidecar_path(&a.out);
    Ok(Outcome::new(
        format!("{} ({}x{}), ground truth {}", a.out.display(), r.sidecar.width, r.sidecar.height, side.display()),
        json!({ "image": a.out, "sidecar": side, "width": r.sidecar.width, "height": r.sidecar.height }),
    ))
}

fn load_image(path: &Path) -> Result<image::DynamicImage> {
    image::open(path).with_context(|| format!("cannot decode {}", path.display()))
}

fn extract_cmd(a: &ExtractArgs) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<ExtractorConfig>(&read(p)?).with_context(|| format!("bad extractor config {}", p.display()))?,
        None => ExtractorConfig::default(),
    };
    cfg.ocr = a.ocr.clone();
    cfg.executable |= a.executable;
    let result = extract(&load_image(&a.input)?, &cfg)?;
    write(&a.out, to_json(&result.graph).as_bytes())?;
    if let Some(p) = &a.details {
        write(p, (serde_json::to_string_pretty(&result.to_json_value())? + "\n").as_bytes())?;
    }
    let d = &result.diagnostics;
    Ok(Outcome::new(
        format!(
            "{} layers, {} edges ({} discarded, {} unresolved labels) -> {}",
            result.graph.len(),
            result.graph.edges.len(),
            d.discarded_edges,
            d.unresolved_labels,
            a.out.display()
        ),
        json!({ "nodes": result.graph.len(), "edges": result.graph.edges.len(), "diagnostics": d, "out": a.out }),
    ))
}

fn table_cmd(a: &TableArgs) -> Result<Outcome> {
    let grid = CellGrid::load(&a.input)?;
    let score = is_design_table(&grid, BowModel::builtin());
    if a.require_design && !score.is_design {
        bail!(
            "{} does not look like an architecture table (design {:.3}, results {:.3})",
            a.input.display(),
            score.design_cosine,
            score.results_cosine
        );
    }
    let o = match a.orientation {
        OrientationArg::Auto => orientation(&grid),
        OrientationArg::Rows => Orientation::RowMajor,
        OrientationArg::Columns => Orientation::ColumnMajor,
    };
    let t = extract_table_graph(&grid, o)?;
    write(&a.out, to_json(&t.graph).as_bytes())?;
    Ok(Outcome::new(
        format!("{} layers ({:?}, {} skipped) -> {}", t.graph.len(), o, t.skipped.len(), a.out.display()),
        json!({
            "nodes": t.graph.len(),
            "orientation": o,
            "skipped": t.skipped,
            "is_design": score.is_design,
            "design_cosine": score.design_cosine,
            "results_cosine": score.results_cosine,
            "out": a.out,
        }),
    ))
}

fn pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).with_context(|| format!("cannot list {}", d.display()))? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

fn load_sidecar(png: &Path) -> Result<GroundTruthSidecar> {
    let p = sidecar_path(png);
    GroundTruthSidecar::from_json(&read(&p)?).with_context(|| format!("bad ground truth {}", p.display()))
}

fn features_cmd(images: &Path, label: LabelSource, out: &Path) -> Result<Outcome> {
    let files = pngs(images)?;
    if files.is_empty() {
        bail!("no PNG files under {}", images.display());
    }
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut x = Array2::zeros((files.len(), dlp2c_classify::FEATURE_DIM));
    for (i, f) in files.iter().enumerate() {
        let name = match label {
            LabelSource::Style => load_sidecar(f)?.style,
            LabelSource::Parent => f
                .parent()
                .and_then(|p| p.file_name())
                .map(|n| n.to_string_lossy().to_string())
                .unwrap_or_default(),
        };
        let idx = names.iter().position(|n| *n == name).unwrap_or_else(|| {
            names.push(name);
            names.len() - 1
        });
        labels.push(idx);
        for (j, v) in cheap_features(&load_image(f)?).into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    let ds = FeatureDataset::new(x, labels, names.clone(), 0)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    ds.save(out)?;
    Ok(Outcome::new(
        format!("{} vectors, classes {} -> {}", ds.len(), names.join(", "), out.display()),
        json!({ "vectors": ds.len(), "dim": ds.dim(), "classes": names, "out": out }),
    ))
}

fn classify(cmd: &ClassifyCommand) -> Result<Outcome> {
    match cmd {
        ClassifyCommand::Features { images, label, out } => features_cmd(images, *label, out),
        ClassifyCommand::Train {
            data,
            algorithm,
            hidden,
            epochs,
            learning_rate,
            seed,
            out,
        } => {
            let ds = FeatureDataset::load(data, *seed)?;
            let alg = match Algorithm::parse(algorithm) {
                Some(Algorithm::NaiveBayes) => Algorithm::NaiveBayes,
                Some(Algorithm::LogisticRegression(_)) => {
                    let mut s = LrSpec { seed: *seed, ..LrSpec::default() };
                    s.epochs = epochs.unwrap_or(s.epochs);
                    s.learning_rate = learning_rate.unwrap_or(s.learning_rate);
                    Algorithm::LogisticRegression(s)
                }
                Some(Algorithm::Mlp(_)) => {
                    let mut s = MlpSpec { seed: *seed, ..MlpSpec::default() };
                    if !hidden.is_empty() {
                        s.hidden = hidden.clone();
                    }
                    s.epochs = epochs.unwrap_or(s.epochs);
                    s.learning_rate = learning_rate.unwrap_or(s.learning_rate);
                    s.check().map_err(anyhow::Error::msg)?;
                    Algorithm::Mlp(s)
                }
                None => bail!(UsageError(format!("unknown algorithm {algorithm:?} (nb, lr or mlp)"))),
            };
            let model = train(&ds, &alg)?;
            let ev = evaluate(&model, &ds)?;
            model.save(out)?;
            Ok(Outcome::new(
                format!(
                    "{}: train {:.4}, val {:.4}, test {:.4} -> {}",
                    alg.name(),
                    ev.train_accuracy,
                    ev.val_accuracy,
                    ev.test_accuracy,
                    out.display()
                ),
                json!({
                    "algorithm": alg.name(),
                    "train_accuracy": ev.train_accuracy,
                    "val_accuracy": ev.val_accuracy,
                    "test_accuracy": ev.test_accuracy,
                    "out": out,
                }),
            ))
        }
        ClassifyCommand::Evaluate { model, data, seed, confusion } => {
            let m = Model::load(model)?;
            let ds = FeatureDataset::load(data, *seed)?;
            let ev = evaluate(&m, &ds)?;
            if let Some(p) = confusion {
                write(p, ev.confusion.to_csv().as_bytes())?;
            }
            Ok(Outcome::new(
                format!("train {:.4}, val {:.4}, test {:.4}", ev.train_accuracy, ev.val_accuracy, ev.test_accuracy),
                json!({
                    "train_accuracy": ev.train_accuracy,
                    "val_accuracy": ev.val_accuracy,
                    "test_accuracy": ev.test_accuracy,
                    "confusion": ev.confusion,
                }),
            ))
        }
        ClassifyCommand::Predict { model, images } => {
            let m = Model::load(model)?;
            let mut lines = Vec::new();
            let mut rows = Vec::new();
            for p in images {
                let k = m.predict_one(&cheap_features(&load_image(p)?))?;
                let label = &m.label_names[k];
                lines.push(format!("{}\t{label}", p.display()));
                rows.push(json!({ "image": p, "label": label }));
            }
            Ok(Outcome::new(lines.join("\n"), json!({ "predictions": rows })))
        }
    }
}

/// Code text exactly as the service returns it.
pub fn codegen_text(graph: &dlp2c_core::CompGraph, target: Dialect, rules: &RuleSet, head: bool) -> Result<String> {
    Ok(generate_with(graph, target, rules, GenerateOptions { softmax_head: head })?)
}

fn codegen_cmd(a: &CodegenArgs) -> Result<Outcome> {
    let g = load_graph(&a.input)?;
    let custom;
    let rules = match &a.rules {
        Some(p) => {
            custom = RuleSet::from_toml(&read(p)?)?;
            &custom
        }
        None => RuleSet::builtin(),
    };
    let code = codegen_text(&g, a.target, rules, !a.no_head)?;
    if a.target == Dialect::CaffePrototxt && !prototxt_check(&code) {
        bail!("generated prototxt fails its structural check");
    }
    match &a.out {
        Some(p) => {
            write(p, code.as_bytes())?;
            Ok(Outcome::new(
                format!("{} {} -> {}", a.target.name(), g.name, p.display()),
                json!({ "target": a.target.name(), "out": p, "bytes": code.len() }),
            ))
        }
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(code.as_bytes())?;
            out.flush()?;
            Ok(Outcome::silent())
        }
    }
}

fn eval_cmd(a: &EvalArgs) -> Result<Outcome> {
    let files: Vec<PathBuf> = pngs(&a.renders)?.into_iter().filter(|p| sidecar_path(p).exists()).collect();
    if files.is_empty() {
        bail!("no rendered images with ground truth under {}", a.renders.display());
    }
    let cfg = ExtractorConfig {
        ocr: a.ocr.clone(),
        ..ExtractorConfig::default()
    };
    let mut records: Vec<AccuracyRecord> = Vec::new();
    let (mut compared, mut equivalent) = (0, 0);
    for f in &files {
        let truth = load_sidecar(f)?;
        let result = extract(&load_image(f)?, &cfg).with_context(|| format!("extracting {}", f.display()))?;
        let stem = f.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        records.push(score_extraction(&stem, &result, &truth));
        let model = f.with_file_name(format!("{}.dlg.json", truth.model_id));
        if let Ok(text) = fs::read_to_string(&model) {
            if let Ok(g) = from_json(&text) {
                compared += 1;
                equivalent += graph_equivalent(&g, &result.graph, false).unwrap_or(false) as usize;
            }
        }
    }
    write(&a.out, records_to_csv(&records).as_bytes())?;
    let blob: Vec<f64> = records.iter().map(|r| r.blob_accuracy).collect();
    let edge: Vec<f64> = records.iter().map(|r| r.edge_accuracy).collect();
    let (bs, es) = (boxplot(&blob)?, boxplot(&edge)?);
    let summary = json!({
        "images": records.len(),
        "blob_accuracy": bs,
        "edge_accuracy": es,
        "graphs_compared": compared,
        "graphs_equivalent": equivalent,
    });
    if let Some(p) = &a.summary {
        write(p, (serde_json::to_string_pretty(&summary)? + "\n").as_bytes())?;
    }
    if let Some(p) = &a.svg {
        let svg = boxplot_svg("Extraction accuracy (%)", &[("blobs".into(), bs), ("edges".into(), es)]);
        write(p, svg.as_bytes())?;
    }
    Ok(Outcome::new(
        format!(
            "{} images: blob mean {:.2} median {:.2}, edge mean {:.2} median {:.2} -> {}",
            records.len(),
            bs.mean,
            bs.median,
            es.mean,
            es.median,
            a.out.display()
        ),
        summary,
    ))
}

fn serve_cmd(a: &ServeArgs) -> Result<Outcome> {
    let config = ServiceConfig {
        store: a.store.clone(),
        body_limit: a.body_limit,
        cors_origins: a.cors_origin.clone(),
        extractor: ExtractorConfig::default(),
    };
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = service::bind(a.addr).await?;
        eprintln!("listening on http://{} (store {})", listener.local_addr()?, a.store.display());
        service::serve(&config, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })?;
    Ok(Outcome::silent())
}

/// A problem with the invocation rather than the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Render(a) => render_cmd(a),
        Command::Extract(a) => extract_cmd(a),
        Command::TableExtract(a) => table_cmd(a),
        Command::Classify(c) => classify(c),
        Command::Codegen(a) => codegen_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Serve(a) => serve_cmd(a),
    }
}

fn wants_json(args: &[OsString]) -> bool {
    args.windows(2).any(|w| w[0] == "--format" && w[1] == "json") || args.iter().any(|a| a == "--format=json")
}

fn report_error(format: Format, kind: &str, message: &str) {
    match format {
        Format::Json => eprintln!("{}", json!({ "error": message, "kind": kind })),
        Format::Text => eprintln!("error: {message}"),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn main_with(args: Vec<OsString>) -> i32 {
    let format = if wants_json(&args) { Format::Json } else { Format::Text };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            match format {
                Format::Json => report_error(format, "usage", e.to_string().trim()),
                Format::Text => eprint!("{e}"),
            }
            return EXIT_USAGE;
        }
    };
    match run(&cli) {
        Ok(o) => {
            match cli.format {
                Format::Json if !o.json.is_null() => println!("{}", o.json),
                Format::Text if !o.text.is_empty() => println!("{}", o.text),
                _ => {}
            }
            EXIT_OK
        }
        Err(e) => {
            if let Some(u) = e.downcast_ref::<UsageError>() {
                report_error(cli.format, "usage", &u.0);
                return EXIT_USAGE;
            }
            report_error(cli.format, "domain", &format!("{e:#}"));
            EXIT_DOMAIN
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_ranges() {
        assert_eq!(depth_range("5:9"), Ok((5, 9)));
        assert_eq!(depth_range("12"), Ok((12, 12)));
        assert!(depth_range("9:5").is_err());
        assert!(depth_range("a:b").is_err());
    }

    #[test]
    fn ocr_backends() {
        assert_eq!(ocr("builtin"), Ok(OcrBackend::Builtin));
        assert_eq!(ocr("external:tesseract - -"), Ok(OcrBackend::External { command: "tesseract - -".into() }));
        assert!(ocr("external:").is_err());
        assert!(ocr("gpt").is_err());
    }

    #[test]
    fn parses_documented_invocations() {
        let cli = Cli::try_parse_from(["dlp2c", "simulate", "--per-depth", "10", "--depth", "5:9", "--seed", "7", "--out", "d/"]).unwrap();
        let Command::Simulate(a) = cli.command else { panic!() };
        assert_eq!((a.per_depth, a.depth, a.seed), (10, (5, 9), 7));
        let cli = Cli::try_parse_from(["dlp2c", "codegen", "--in", "g.dlg.json", "--target", "caffe", "--format", "json"]).unwrap();
        assert_eq!(cli.format, Format::Json);
        assert!(Cli::try_parse_from(["dlp2c", "codegen", "--in", "g", "--target", "torch"]).is_err());
        let cli = Cli::try_parse_from(["dlp2c", "classify", "train", "--data", "f", "--hidden", "1024,256", "--out", "m"]).unwrap();
        let Command::Classify(ClassifyCommand::Train { hidden, .. }) = cli.command else { panic!() };
        assert_eq!(hidden, [1024, 256]);
    }

    #[test]
    fn usage_errors_exit_two() {
        let args = |v: &[&str]| v.iter().map(OsString::from).collect::<Vec<_>>();
        assert_eq!(main_with(args(&["dlp2c", "frobnicate"])), EXIT_USAGE);
        assert_eq!(main_with(args(&["dlp2c", "--format", "json", "simulate"])), EXIT_USAGE);
        assert_eq!(main_with(args(&["dlp2c", "--help"])), EXIT_OK);
        assert_eq!(
            main_with(args(&["dlp2c", "codegen", "--in", "/nonexistent/g.dlg.json", "--target", "keras"])),
            EXIT_DOMAIN
        );
    }
}
