//! Grammar-driven random generation of valid model designs.
//!
//! A model is a random walk over the layer grammar. At every step the walk
//! picks uniformly among the symbols that the grammar allows after the
//! current layer *and* that admit at least one parameter combination whose
//! output shape is valid and from which the walk can still end in a vector
//! within the remaining depth. Parameters are then drawn uniformly from the
//! feasible part of their domains, which is the distribution that rejection
//! sampling over the full domains would give.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{
    allowed_next, domains_for, infer_shape, params_from_values, to_json, validate, CompGraph,
    GrammarSymbol, HyperParams, LayerKind, Node, Provenance, TensorShape,
};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub depth_min: usize,
    pub depth_max: usize,
    pub models_per_depth: usize,
    pub seed: u64,
    /// Weights over `LayerKind::INPUTS`.
    pub input_mix: [f64; 4],
    pub concat_probability: f64,
    /// Number of walks tried for one model before giving up.
    pub max_resample_attempts: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            depth_min: 5,
            depth_max: 40,
            models_per_depth: 3000,
            seed: 0,
            input_mix: [0.25; 4],
            concat_probability: 0.15,
            max_resample_attempts: 50,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("depth {depth} outside configured range {min}..={max}")]
    DepthOutOfRange { depth: usize, min: usize, max: usize },
    #[error("no valid model of depth {depth} after {attempts} attempts")]
    GenerationFailure { depth: usize, attempts: usize },
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("output sink failed for {stem}: {message}")]
    Sink { stem: String, message: String },
}

impl SimConfig {
    pub fn check(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        if self.depth_min < 5 || self.depth_min > self.depth_max {
            return bad("depths must satisfy 5 <= depth_min <= depth_max");
        }
        if self.models_per_depth == 0 {
            return bad("models_per_depth must be at least 1");
        }
        if self.input_mix.iter().any(|w| !(*w >= 0.0)) {
            return bad("input weights must be non-negative");
        }
        if (self.input_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("input weights must sum to 1");
        }
        if !(0.0..=1.0).contains(&self.concat_probability) {
            return bad("concat_probability must lie in [0, 1]");
        }
        if self.max_resample_attempts == 0 {
            return bad("max_resample_attempts must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 of the config's JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn depths(&self) -> std::ops::RangeInclusive<usize> {
        self.depth_min..=self.depth_max
    }
}

/// Fewest further layers needed before a shape can feed the terminal Dense.
fn steps_to_vector(shape: &TensorShape) -> usize {
    match shape {
        TensorShape::Vec { .. } => 0,
        TensorShape::Map3D { .. } | TensorShape::Seq { .. } => 1,
        TensorShape::TokenSeq { .. } => 2,
    }
}

/// Every parameter record in the domains of `kind`.
fn all_params(kind: LayerKind) -> Vec<HyperParams> {
    let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
    for (_, domain) in domains_for(kind) {
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                domain.values().map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .filter_map(|values| params_from_values(kind, &values))
        .collect()
}

struct Walk {
    graph: CompGraph,
    shapes: Vec<TensorShape>,
}

impl Walk {
    fn id(i: usize) -> String {
        format!("n{i:02}")
    }

    fn push(&mut self, node: Node, shape: TensorShape, parents: &[usize]) -> usize {
        let i = self.shapes.len();
        for &p in parents {
            let src = Walk::id(p);
            self.graph.add_edge(src, node.id.clone());
        }
        self.graph.add_node(node);
        self.shapes.push(shape);
        i
    }
}

/// One candidate continuation of the walk.
struct Candidate {
    kind: LayerKind,
    return_seq: bool,
    params: Vec<(HyperParams, TensorShape)>,
    second_parents: Vec<usize>,
}

fn feasible_params(
    kind: LayerKind,
    return_seq: bool,
    input: TensorShape,
    remaining: usize,
) -> Vec<(HyperParams, TensorShape)> {
    all_params(kind)
        .into_iter()
        .filter_map(|p| {
            let out = infer_shape(kind, return_seq, &p, &[input]).ok()?;
            (steps_to_vector(&out) <= remaining).then_some((p, out))
        })
        .collect()
}

fn try_walk(config: &SimConfig, depth: usize, rng: &mut Rng) -> Option<CompGraph> {
    let input_kind = LayerKind::INPUTS[rng.weighted(&config.input_mix)?];
    let mut walk = Walk {
        graph: CompGraph::new(""),
        shapes: Vec::new(),
    };
    let input_shape = infer_shape(input_kind, false, &HyperParams::Empty, &[]).ok()?;
    walk.push(Node::new(Walk::id(0), input_kind, HyperParams::Empty), input_shape, &[]);
    let mut current = 0;
    for step in 0..depth {
        let remaining = depth - step - 1;
        let cur_id = Walk::id(current);
        let allowed = allowed_next(&walk.graph, &cur_id).ok()?;
        let cur_shape = walk.shapes[current];
        let mut options = Vec::new();
        let offer_concat = rng.chance(config.concat_probability);
        for sym in allowed {
            let Some((kind, return_seq)) = sym.layer() else { continue };
            if sym == GrammarSymbol::Concat {
                if !offer_concat
                    || !cur_shape.concat_compatible(&cur_shape)
                    || steps_to_vector(&cur_shape) > remaining
                {
                    continue;
                }
                let seconds: Vec<usize> = (0..current)
                    .filter(|&p| {
                        walk.shapes[p].concat_compatible(&cur_shape)
                            && allowed_next(&walk.graph, &Walk::id(p))
                                .is_ok_and(|a| a.contains(&GrammarSymbol::Concat))
                    })
                    .collect();
                if seconds.is_empty() {
                    continue;
                }
                options.push(Candidate {
                    kind,
                    return_seq,
                    params: Vec::new(),
                    second_parents: seconds,
                });
                continue;
            }
            let params = feasible_params(kind, return_seq, cur_shape, remaining);
            if !params.is_empty() {
                options.push(Candidate {
                    kind,
                    return_seq,
                    params,
                    second_parents: Vec::new(),
                });
            }
        }
        let choice = rng.choose(&options)?;
        let id = Walk::id(walk.shapes.len());
        current = if choice.kind == LayerKind::Concat {
            let second = *rng.choose(&choice.second_parents)?;
            let out = infer_shape(
                LayerKind::Concat,
                false,
                &HyperParams::Empty,
                &[cur_shape, walk.shapes[second]],
            )
            .ok()?;
            if steps_to_vector(&out) > remaining {
                return None;
            }
            walk.push(Node::new(id, LayerKind::Concat, HyperParams::Empty), out, &[current, second])
        } else {
            let (params, out) = *rng.choose(&choice.params)?;
            walk.push(Node::recurrent(id, choice.kind, params, choice.return_seq), out, &[current])
        };
    }
    let head = HyperParams::Dense {
        nodes: input_kind.class_count()?,
    };
    let out = infer_shape(LayerKind::Dense, false, &head, &[walk.shapes[current]]).ok()?;
    let id = Walk::id(walk.shapes.len());
    walk.push(Node::new(id, LayerKind::Dense, head), out, &[current]);
    Some(walk.graph)
}

/// Samples one model with exactly `depth` layers between the input and the
/// terminal Dense.
pub fn sample_model(config: &SimConfig, depth: usize, rng: &mut Rng) -> Result<CompGraph, SimError> {
    if !config.depths().contains(&depth) {
        return Err(SimError::DepthOutOfRange {
            depth,
            min: config.depth_min,
            max: config.depth_max,
        });
    }
    for _ in 0..config.max_resample_attempts {
        if let Some(mut g) = try_walk(config, depth, rng) {
            if validate(&g, true).is_valid() {
                g.provenance = Provenance::Simulated;
                return Ok(g);
            }
        }
    }
    Err(SimError::GenerationFailure {
        depth,
        attempts: config.max_resample_attempts,
    })
}

/// The model at position `index` of depth `depth` in the dataset of `config`.
pub fn dataset_model(config: &SimConfig, depth: usize, index: usize) -> Result<CompGraph, SimError> {
    let mut rng = Rng::for_stream(config.seed, depth as u64, index as u64);
    let mut g = sample_model(config, depth, &mut rng)?;
    g.name = model_stem(depth, index);
    Ok(g)
}

pub fn model_stem(depth: usize, index: usize) -> String {
    format!("d{depth:02}_m{index:05}")
}

/// Receives every generated model, e.g. to render it.
pub trait ModelSink: Sync {
    /// Writes extra files for a model into `dir` and returns their paths
    /// relative to the dataset root.
    fn emit(&self, graph: &CompGraph, root: &Path, dir: &str, stem: &str) -> Result<Vec<String>, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: SimConfig,
    pub config_hash: String,
    pub counts: BTreeMap<usize, usize>,
    pub total_models: usize,
    pub total_images: usize,
    pub files: Vec<String>,
    pub complete: bool,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Generates the whole dataset under `out_dir`: one `.dlg.json` per model,
/// anything the sink writes, and `manifest.json`. If any model fails the
/// manifest is still written, with `complete: false`, and the first error is
/// returned.
pub fn generate_dataset(
    config: &SimConfig,
    out_dir: &Path,
    sink: Option<&dyn ModelSink>,
) -> Result<DatasetManifest, SimError> {
    config.check()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    for depth in config.depths() {
        let dir = out_dir.join(format!("d{depth:02}"));
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let jobs: Vec<(usize, usize)> = config
        .depths()
        .flat_map(|d| (0..config.models_per_depth).map(move |i| (d, i)))
        .collect();
    let results: Vec<Result<(usize, Vec<String>, usize), SimError>> = jobs
        .par_iter()
        .map(|&(depth, index)| {
            let graph = dataset_model(config, depth, index)?;
            let dir = format!("d{depth:02}");
            let stem = model_stem(depth, index);
            let rel = format!("{dir}/{stem}.dlg.json");
            let path = out_dir.join(&rel);
            fs::write(&path, to_json(&graph)).map_err(io_err(&path))?;
            let mut files = vec![rel];
            let mut images = 0;
            if let Some(sink) = sink {
                let extra = sink
                    .emit(&graph, out_dir, &dir, &stem)
                    .map_err(|message| SimError::Sink { stem, message })?;
                images = extra.iter().filter(|f| f.ends_with(".png")).count();
                files.extend(extra);
            }
            Ok((depth, files, images))
        })
        .collect();

    let mut manifest = DatasetManifest {
        config: config.clone(),
        config_hash: config.hash(),
        counts: config.depths().map(|d| (d, 0)).collect(),
        total_models: 0,
        total_images: 0,
        files: Vec::new(),
        complete: true,
    };
    let mut first_error = None;
    for r in results {
        match r {
            Ok((depth, files, images)) => {
                *manifest.counts.entry(depth).or_default() += 1;
                manifest.total_models += 1;
                manifest.total_images += images;
                manifest.files.extend(files);
            }
            Err(e) => {
                manifest.complete = false;
                first_error.get_or_insert(e);
            }
        }
    }
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n";
    write_atomic(&path, text.as_bytes()).map_err(io_err(&path))?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}
