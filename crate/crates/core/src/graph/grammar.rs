//! Layer adjacency grammar: which layer may follow which.

use std::fmt;

use super::{CompGraph, GraphError, LayerKind};

/// A grammar symbol is a layer kind, with the recurrent kinds split by their
/// `return_seq` flag and the four input kinds collapsed into `Input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GrammarSymbol {
    Input,
    Dense,
    Conv2D,
    Flatten,
    Dropout,
    MaxPool,
    AvgPool,
    Concat,
    Embed,
    Rnn,
    RnnSeq,
    Lstm,
    LstmSeq,
}

impl GrammarSymbol {
    pub fn of(kind: LayerKind, return_seq: bool) -> Option<GrammarSymbol> {
        use GrammarSymbol as S;
        Some(match kind {
            k if k.is_input() => S::Input,
            LayerKind::Dense => S::Dense,
            LayerKind::Conv2D => S::Conv2D,
            LayerKind::Flatten => S::Flatten,
            LayerKind::Dropout => S::Dropout,
            LayerKind::MaxPool2D => S::MaxPool,
            LayerKind::AvgPool2D => S::AvgPool,
            LayerKind::Concat => S::Concat,
            LayerKind::Embed => S::Embed,
            LayerKind::SimpleRnn if return_seq => S::RnnSeq,
            LayerKind::SimpleRnn => S::Rnn,
            LayerKind::Lstm if return_seq => S::LstmSeq,
            LayerKind::Lstm => S::Lstm,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            GrammarSymbol::Input => "Input",
            GrammarSymbol::Dense => "Dense",
            GrammarSymbol::Conv2D => "Conv2D",
            GrammarSymbol::Flatten => "Flatten",
            GrammarSymbol::Dropout => "Dropout",
            GrammarSymbol::MaxPool => "MaxPool",
            GrammarSymbol::AvgPool => "AvgPool",
            GrammarSymbol::Concat => "Concat",
            GrammarSymbol::Embed => "Embed",
            GrammarSymbol::Rnn => "RNN",
            GrammarSymbol::RnnSeq => "RNN(seq)",
            GrammarSymbol::Lstm => "LSTM",
            GrammarSymbol::LstmSeq => "LSTM(seq)",
        }
    }

    /// The layer kind and `return_seq` flag a non-input symbol stands for.
    pub fn layer(self) -> Option<(LayerKind, bool)> {
        Some(match self {
            GrammarSymbol::Input => return None,
            GrammarSymbol::Dense => (LayerKind::Dense, false),
            GrammarSymbol::Conv2D => (LayerKind::Conv2D, false),
            GrammarSymbol::Flatten => (LayerKind::Flatten, false),
            GrammarSymbol::Dropout => (LayerKind::Dropout, false),
            GrammarSymbol::MaxPool => (LayerKind::MaxPool2D, false),
            GrammarSymbol::AvgPool => (LayerKind::AvgPool2D, false),
            GrammarSymbol::Concat => (LayerKind::Concat, false),
            GrammarSymbol::Embed => (LayerKind::Embed, false),
            GrammarSymbol::Rnn => (LayerKind::SimpleRnn, false),
            GrammarSymbol::RnnSeq => (LayerKind::SimpleRnn, true),
            GrammarSymbol::Lstm => (LayerKind::Lstm, false),
            GrammarSymbol::LstmSeq => (LayerKind::Lstm, true),
        })
    }
}

impl fmt::Display for GrammarSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Column headings of the next-layer table.
pub const TABLE_COLUMNS: [GrammarSymbol; 12] = [
    GrammarSymbol::Dense,
    GrammarSymbol::Conv2D,
    GrammarSymbol::Flatten,
    GrammarSymbol::Dropout,
    GrammarSymbol::MaxPool,
    GrammarSymbol::AvgPool,
    GrammarSymbol::Concat,
    GrammarSymbol::Embed,
    GrammarSymbol::Rnn,
    GrammarSymbol::RnnSeq,
    GrammarSymbol::Lstm,
    GrammarSymbol::LstmSeq,
];

const X: bool = true;
const O: bool = false;

/// The next-layer table exactly as published, one row per current layer.
/// Dropout and Concat rows are rules rather than marks and are absent here;
/// there is no Embed row. The LSTM row marks Conv2D instead of Dense, which
/// [`successors`] does not follow.
pub const PRINTED_TABLE: [(GrammarSymbol, [bool; 12]); 10] = [
    //                         De Cv Fl Dr Mx Av Cc Em R  Rs L  Ls
    (GrammarSymbol::Input,    [X, X, O, O, O, O, O, X, O, O, O, O]),
    (GrammarSymbol::Dense,    [X, O, O, X, O, O, X, X, O, O, O, O]),
    (GrammarSymbol::Conv2D,   [O, X, X, X, X, X, X, O, O, O, O, O]),
    (GrammarSymbol::Flatten,  [X, O, O, X, O, O, X, X, O, O, O, O]),
    (GrammarSymbol::MaxPool,  [O, X, X, X, X, X, X, O, O, O, O, O]),
    (GrammarSymbol::AvgPool,  [O, X, X, X, X, X, X, O, O, O, O, O]),
    (GrammarSymbol::Rnn,      [X, O, O, X, O, O, X, X, O, O, O, O]),
    (GrammarSymbol::RnnSeq,   [O, O, X, X, O, O, X, O, X, X, X, X]),
    (GrammarSymbol::Lstm,     [O, X, O, X, O, O, X, X, O, O, O, O]),
    (GrammarSymbol::LstmSeq,  [O, O, X, X, O, O, X, O, X, X, X, X]),
];

fn printed_row(sym: GrammarSymbol) -> &'static [bool; 12] {
    &PRINTED_TABLE
        .iter()
        .find(|(s, _)| *s == sym)
        .expect("row exists")
        .1
}

fn marked(row: &[bool; 12]) -> Vec<GrammarSymbol> {
    TABLE_COLUMNS
        .iter()
        .zip(row.iter())
        .filter_map(|(s, &m)| m.then_some(*s))
        .collect()
}

/// Allowed successors of a concrete (already resolved) symbol.
///
/// `Dropout` and `Concat` resolve to another symbol through
/// [`effective_kind`] and have no row of their own; asking for them returns
/// an empty list.
pub fn successors(sym: GrammarSymbol) -> Vec<GrammarSymbol> {
    use GrammarSymbol as S;
    match sym {
        S::Dropout | S::Concat => Vec::new(),
        // Non-sequence LSTM is treated as the SimpleRNN row.
        S::Lstm => marked(printed_row(S::Rnn)),
        S::Embed => vec![S::Rnn, S::RnnSeq, S::Lstm, S::LstmSeq],
        other => marked(printed_row(other)),
    }
}

/// Rank class of the node's output.
/// Only the structure and layer kinds are consulted, never parameters.
pub fn output_rank(graph: &CompGraph, id: &str) -> Result<Rank, GraphError> {
    rank_inner(graph, id, graph.len() + 1)
}

/// Rank class of a tensor, as far as the grammar is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Vector,
    Map,
    Sequence,
    Tokens,
}

fn first_pred<'a>(graph: &'a CompGraph, id: &str) -> Result<&'a str, GraphError> {
    graph
        .edges
        .iter()
        .find(|e| e.dst == id)
        .map(|e| e.src.as_str())
        .ok_or_else(|| GraphError::DanglingPredecessor(id.to_string()))
}

fn rank_inner(graph: &CompGraph, id: &str, fuel: usize) -> Result<Rank, GraphError> {
    if fuel == 0 {
        return Err(GraphError::Cycle(id.to_string()));
    }
    let node = graph
        .node(id)
        .ok_or_else(|| GraphError::MissingNode(id.to_string()))?;
    Ok(match node.kind {
        LayerKind::InputImdbText => Rank::Tokens,
        k if k.is_input() => Rank::Map,
        LayerKind::Dense | LayerKind::Flatten => Rank::Vector,
        LayerKind::Conv2D | LayerKind::MaxPool2D | LayerKind::AvgPool2D => Rank::Map,
        LayerKind::Embed => Rank::Sequence,
        LayerKind::SimpleRnn | LayerKind::Lstm => {
            if node.return_seq {
                Rank::Sequence
            } else {
                Rank::Vector
            }
        }
        LayerKind::Dropout | LayerKind::Concat => {
            let pred = first_pred(graph, id)?;
            rank_inner(graph, pred, fuel - 1)?
        }
        _ => return Err(GraphError::UnknownKind(id.to_string())),
    })
}

/// Grammar symbol that governs what may follow `id`.
///
/// Dropout inherits the symbol of its predecessor; Concat behaves like Dense
/// when its output is a vector and otherwise inherits from its first-listed
/// input. Resolution is transitive.
pub fn effective_kind(graph: &CompGraph, id: &str) -> Result<GrammarSymbol, GraphError> {
    let mut current = id;
    for _ in 0..=graph.len() {
        let node = graph
            .node(current)
            .ok_or_else(|| GraphError::MissingNode(current.to_string()))?;
        let sym = node
            .symbol()
            .ok_or_else(|| GraphError::UnknownKind(current.to_string()))?;
        match sym {
            GrammarSymbol::Dropout => current = first_pred(graph, current)?,
            GrammarSymbol::Concat => {
                if output_rank(graph, current)? == Rank::Vector {
                    return Ok(GrammarSymbol::Dense);
                }
                current = first_pred(graph, current)?;
            }
            other => return Ok(other),
        }
    }
    Err(GraphError::Cycle(id.to_string()))
}

/// Symbols allowed to follow node `id`.
pub fn allowed_next(graph: &CompGraph, id: &str) -> Result<Vec<GrammarSymbol>, GraphError> {
    effective_kind(graph, id).map(successors)
}
