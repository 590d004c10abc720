//! The abstract computational graph: typed layers, hyper-parameters and the
//! directed edges between them.
//!
//! A [`CompGraph`] is a plain value. Construction helpers do not enforce the
//! structural invariants; [`validate`] reports every violation as data so that
//! partially extracted designs can still be stored, displayed and edited.

mod domains;
mod grammar;
mod json;
mod shape;
mod validate;

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use domains::{
    domains_for, midpoint_params, params_from_values, Domain, CONV_FILTERS, DENSE_NODES, DROPOUT_PROBABILITY,
    EMBED_SIZE, EMBED_VOCAB, FILTER_SIZE, LSTM_NODES, POOL_STRIDE, RNN_UNITS,
};
pub use grammar::{
    allowed_next, effective_kind, output_rank, successors, GrammarSymbol, Rank, TABLE_COLUMNS,
    PRINTED_TABLE,
};
pub use json::{from_json, from_json_with, from_value, to_json, to_value, JsonError, ParseMode, SCHEMA_VERSION};
pub use shape::{infer_graph_shapes, infer_shape, ShapeError, TensorShape, IMDB_SEQ_LEN};
pub use validate::{validate, Category, Locus, ValidationReport, Violation};

/// Layer kinds understood by the grammar, plus an `Unknown` placeholder used
/// when a detected diagram node could not be matched to any layer name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    InputMnist,
    InputCifar10,
    InputImageNet,
    InputImdbText,
    Dense,
    Conv2D,
    Flatten,
    Dropout,
    MaxPool2D,
    AvgPool2D,
    Concat,
    Embed,
    SimpleRnn,
    Lstm,
    Unknown,
}

impl LayerKind {
    /// The fourteen real layer kinds, in declaration order.
    pub const ALL: [LayerKind; 14] = [
        LayerKind::InputMnist,
        LayerKind::InputCifar10,
        LayerKind::InputImageNet,
        LayerKind::InputImdbText,
        LayerKind::Dense,
        LayerKind::Conv2D,
        LayerKind::Flatten,
        LayerKind::Dropout,
        LayerKind::MaxPool2D,
        LayerKind::AvgPool2D,
        LayerKind::Concat,
        LayerKind::Embed,
        LayerKind::SimpleRnn,
        LayerKind::Lstm,
    ];

    pub const INPUTS: [LayerKind; 4] = [
        LayerKind::InputMnist,
        LayerKind::InputCifar10,
        LayerKind::InputImageNet,
        LayerKind::InputImdbText,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::InputMnist => "InputMNIST",
            LayerKind::InputCifar10 => "InputCIFAR10",
            LayerKind::InputImageNet => "InputImageNet",
            LayerKind::InputImdbText => "InputIMDBText",
            LayerKind::Dense => "Dense",
            LayerKind::Conv2D => "Conv2D",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dropout => "Dropout",
            LayerKind::MaxPool2D => "MaxPool2D",
            LayerKind::AvgPool2D => "AvgPool2D",
            LayerKind::Concat => "Concat",
            LayerKind::Embed => "Embed",
            LayerKind::SimpleRnn => "SimpleRNN",
            LayerKind::Lstm => "LSTM",
            LayerKind::Unknown => "Unknown",
        }
    }

    pub fn from_name(name: &str) -> Option<LayerKind> {
        LayerKind::ALL
            .iter()
            .chain(std::iter::once(&LayerKind::Unknown))
            .copied()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }

    pub fn is_input(self) -> bool {
        matches!(
            self,
            LayerKind::InputMnist
                | LayerKind::InputCifar10
                | LayerKind::InputImageNet
                | LayerKind::InputImdbText
        )
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, LayerKind::SimpleRnn | LayerKind::Lstm)
    }

    /// Whether nodes of this kind carry hyper-parameters.
    pub fn has_params(self) -> bool {
        matches!(
            self,
            LayerKind::Dense
                | LayerKind::Dropout
                | LayerKind::Conv2D
                | LayerKind::MaxPool2D
                | LayerKind::AvgPool2D
                | LayerKind::Embed
                | LayerKind::SimpleRnn
                | LayerKind::Lstm
        )
    }

    /// Number of output classes of the dataset behind an input kind.
    pub fn class_count(self) -> Option<u32> {
        match self {
            LayerKind::InputMnist | LayerKind::InputCifar10 => Some(10),
            LayerKind::InputImageNet => Some(1000),
            LayerKind::InputImdbText => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyper-parameters of a layer; the variant is determined by the layer kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HyperParams {
    Dense { nodes: u32 },
    Dropout { probability: f64 },
    Conv2D { filters: u32, filter_size: u32 },
    Pool { stride: u32, filter_size: u32 },
    Embed { embed_size: u32, vocab: u32 },
    SimpleRnn { units: u32 },
    Lstm { nodes: u32 },
    /// Kinds without hyper-parameters (Input, Flatten, Concat).
    Empty,
}

impl HyperParams {
    /// Whether this parameter variant belongs to `kind`.
    pub fn fits(&self, kind: LayerKind) -> bool {
        matches!(
            (kind, self),
            (LayerKind::Dense, HyperParams::Dense { .. })
                | (LayerKind::Dropout, HyperParams::Dropout { .. })
                | (LayerKind::Conv2D, HyperParams::Conv2D { .. })
                | (LayerKind::MaxPool2D | LayerKind::AvgPool2D, HyperParams::Pool { .. })
                | (LayerKind::Embed, HyperParams::Embed { .. })
                | (LayerKind::SimpleRnn, HyperParams::SimpleRnn { .. })
                | (LayerKind::Lstm, HyperParams::Lstm { .. })
        ) || (!kind.has_params() && *self == HyperParams::Empty)
    }

    /// Named integer/float fields, in a fixed order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        match *self {
            HyperParams::Dense { nodes } => vec![("nodes", nodes as f64)],
            HyperParams::Dropout { probability } => vec![("probability", probability)],
            HyperParams::Conv2D { filters, filter_size } => {
                vec![("filters", filters as f64), ("filter_size", filter_size as f64)]
            }
            HyperParams::Pool { stride, filter_size } => {
                vec![("stride", stride as f64), ("filter_size", filter_size as f64)]
            }
            HyperParams::Embed { embed_size, vocab } => {
                vec![("embed_size", embed_size as f64), ("vocab", vocab as f64)]
            }
            HyperParams::SimpleRnn { units } => vec![("units", units as f64)],
            HyperParams::Lstm { nodes } => vec![("nodes", nodes as f64)],
            HyperParams::Empty => Vec::new(),
        }
    }
}

/// Where a design came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulated,
    ExtractedFigure,
    ExtractedTable,
    Edited,
    #[default]
    Unspecified,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Simulated => "simulated",
            Provenance::ExtractedFigure => "extracted_figure",
            Provenance::ExtractedTable => "extracted_table",
            Provenance::Edited => "edited",
            Provenance::Unspecified => "unspecified",
        }
    }

    pub fn parse(s: &str) -> Option<Provenance> {
        [
            Provenance::Simulated,
            Provenance::ExtractedFigure,
            Provenance::ExtractedTable,
            Provenance::Edited,
            Provenance::Unspecified,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }
}

/// One layer of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: LayerKind,
    /// Only meaningful for SimpleRNN and LSTM.
    pub return_seq: bool,
    /// `None` when the parameters are not known (e.g. extracted from a figure
    /// that only shows layer names).
    pub params: Option<HyperParams>,
    /// Free text attached to the node, such as the OCR output of an
    /// unrecognised diagram box.
    pub label: Option<String>,
    /// Unknown JSON fields kept by lenient parsing.
    pub extra: Map<String, Value>,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: LayerKind, params: HyperParams) -> Node {
        Node {
            id: id.into(),
            kind,
            return_seq: false,
            params: Some(params),
            label: None,
            extra: Map::new(),
        }
    }

    pub fn recurrent(id: impl Into<String>, kind: LayerKind, params: HyperParams, return_seq: bool) -> Node {
        Node {
            return_seq,
            ..Node::new(id, kind, params)
        }
    }

    /// A node whose parameters are unknown.
    pub fn bare(id: impl Into<String>, kind: LayerKind) -> Node {
        let params = if kind.has_params() { None } else { Some(HyperParams::Empty) };
        Node {
            params,
            ..Node::new(id, kind, HyperParams::Empty)
        }
    }

    /// The grammar symbol of this node's own kind, if it has one.
    pub fn symbol(&self) -> Option<GrammarSymbol> {
        GrammarSymbol::of(self.kind, self.return_seq)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub src: String,
    pub dst: String,
}

impl Edge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>) -> Edge {
        Edge {
            src: src.into(),
            dst: dst.into(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("node `{0}` does not exist")]
    MissingNode(String),
    #[error("node `{0}` needs a predecessor to resolve its grammar symbol")]
    DanglingPredecessor(String),
    #[error("cycle detected while resolving node `{0}`")]
    Cycle(String),
    #[error("node `{0}` has unknown kind")]
    UnknownKind(String),
}

/// A directed graph of layers. Node order is insertion order; edge order is
/// significant because it fixes the input order of Concat layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompGraph {
    pub name: String,
    pub provenance: Provenance,
    pub nodes: IndexMap<String, Node>,
    pub edges: Vec<Edge>,
    /// Unknown top-level JSON fields kept by lenient parsing.
    pub extra: Map<String, Value>,
}

impl CompGraph {
    pub fn new(name: impl Into<String>) -> CompGraph {
        CompGraph {
            name: name.into(),
            ..CompGraph::default()
        }
    }

    /// Inserts a node, replacing any node with the same id.
    pub fn add_node(&mut self, node: Node) -> &mut Self {
        self.nodes.insert(node.id.clone(), node);
        self
    }

    pub fn add_edge(&mut self, src: impl Into<String>, dst: impl Into<String>) -> &mut Self {
        self.edges.push(Edge::new(src, dst));
        self
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Predecessors of `id` in edge order.
    pub fn predecessors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.dst == id)
            .map(|e| e.src.as_str())
    }

    pub fn successors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges
            .iter()
            .filter(move |e| e.src == id)
            .map(|e| e.dst.as_str())
    }

    pub fn in_degree(&self, id: &str) -> usize {
        self.edges.iter().filter(|e| e.dst == id).count()
    }

    pub fn out_degree(&self, id: &str) -> usize {
        self.edges.iter().filter(|e| e.src == id).count()
    }

    pub fn inputs(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind.is_input())
    }

    pub fn sinks(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| self.out_degree(&n.id) == 0)
    }

    /// Whether every node's parameters are present and no node is `Unknown`.
    pub fn is_concrete(&self) -> bool {
        self.nodes
            .values()
            .all(|n| n.kind != LayerKind::Unknown && n.params.is_some())
    }

    /// Topological order using Kahn's algorithm with lexicographic id
    /// tie-break. Returns `None` if the graph has a cycle or an edge refers to
    /// a missing node.
    pub fn topo_order(&self) -> Option<Vec<&str>> {
        let mut indeg: HashMap<&str, usize> = self.nodes.keys().map(|k| (k.as_str(), 0)).collect();
        for e in &self.edges {
            if !self.nodes.contains_key(&e.src) {
                return None;
            }
            *indeg.get_mut(e.dst.as_str())? += 1;
        }
        let mut ready: std::collections::BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&k, _)| k)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for e in self.edges.iter().filter(|e| e.src == id) {
                let d = indeg.get_mut(e.dst.as_str()).expect("checked above");
                *d -= 1;
                if *d == 0 {
                    ready.insert(e.dst.as_str());
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    /// Longest-path rank from the sources; `None` for cyclic graphs.
    pub fn ranks(&self) -> Option<HashMap<&str, usize>> {
        let order = self.topo_order()?;
        let mut rank: HashMap<&str, usize> = HashMap::new();
        for id in order {
            let r = self
                .predecessors(id)
                .map(|p| rank.get(p).copied().unwrap_or(0) + 1)
                .max()
                .unwrap_or(0);
            rank.insert(id, r);
        }
        Some(rank)
    }

    /// Fills absent hyper-parameters with the middle value of each domain.
    pub fn fill_default_params(&mut self) {
        for node in self.nodes.values_mut() {
            if node.params.is_none() && node.kind != LayerKind::Unknown {
                node.params = Some(midpoint_params(node.kind));
            }
        }
    }
}
