//! Layer-name dictionary and label text.
//!
//! [`format_label`] produces the node text drawn in diagrams, e.g.
//! `"Conv2D (32, 5x5)"` or `"LSTM (12, seq)"`; [`Lexicon::correct_label`]
//! maps possibly misspelled text back to a layer kind and, when the text
//! carries them, its hyper-parameters.

use std::sync::OnceLock;

use serde::Deserialize;

use crate::graph::{HyperParams, LayerKind, Node, IMDB_SEQ_LEN};

const BUILTIN: &str = include_str!("../data/lexicon.toml");

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("no layer name within the edit bound of `{0}`")]
    NoMatch(String),
    #[error("invalid lexicon file: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatch {
    pub kind: LayerKind,
    /// `Some` when the text says whether a recurrent layer returns sequences.
    pub return_seq: Option<bool>,
    pub params: Option<HyperParams>,
    pub alias: String,
    pub distance: usize,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: Vec<(LayerKind, Vec<String>)>,
}

#[derive(Deserialize)]
struct LexiconFile {
    kind: Vec<KindEntry>,
}

#[derive(Deserialize)]
struct KindEntry {
    name: String,
    aliases: Vec<String>,
}

/// Lowercase with everything but ASCII letters and digits removed.
pub fn normalize(text: &str) -> String {
    text.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

impl Lexicon {
    pub fn from_toml(text: &str) -> Result<Lexicon, LexiconError> {
        let file: LexiconFile = toml::from_str(text).map_err(|e| LexiconError::Invalid(e.to_string()))?;
        let mut entries = Vec::new();
        for k in file.kind {
            let kind = LayerKind::from_name(&k.name)
                .filter(|k| *k != LayerKind::Unknown)
                .ok_or_else(|| LexiconError::Invalid(format!("unknown layer kind `{}`", k.name)))?;
            let mut aliases: Vec<String> = Vec::new();
            for a in std::iter::once(&k.name).chain(&k.aliases) {
                let a = normalize(a);
                if !a.is_empty() && !aliases.contains(&a) {
                    aliases.push(a);
                }
            }
            entries.push((kind, aliases));
        }
        Ok(Lexicon { entries })
    }

    /// The dictionary shipped with the crate.
    pub fn builtin() -> &'static Lexicon {
        static LEXICON: OnceLock<Lexicon> = OnceLock::new();
        LEXICON.get_or_init(|| Lexicon::from_toml(BUILTIN).expect("builtin lexicon parses"))
    }

    pub fn entries(&self) -> &[(LayerKind, Vec<String>)] {
        &self.entries
    }

    /// Closest kind to a single name token, honouring the edit bound.
    ///
    /// An alias of length `n` accepts at most `min(max_edit, n / 3)` edits,
    /// so two-letter abbreviations such as `fc` must match exactly. Tokens
    /// are also tried with trailing digits removed (`conv1` → `conv`).
    pub fn match_name(&self, token: &str, max_edit: usize) -> Option<(LayerKind, &str, usize)> {
        let full = normalize(token);
        if full.is_empty() {
            return None;
        }
        let stripped = full.trim_end_matches(|c: char| c.is_ascii_digit()).to_string();
        let mut best: Option<(LayerKind, &str, usize)> = None;
        for (kind, aliases) in &self.entries {
            for alias in aliases {
                let bound = max_edit.min(alias.len() / 3);
                for cand in [&full, &stripped] {
                    if cand.is_empty() {
                        continue;
                    }
                    let d = strsim::levenshtein(cand, alias);
                    if d <= bound && best.is_none_or(|(_, _, bd)| d < bd) {
                        best = Some((*kind, alias.as_str(), d));
                    }
                }
            }
        }
        best
    }

    /// Maps label text to a layer kind, parsing parenthesised parameters
    /// when present.
    pub fn correct_label(&self, raw: &str, max_edit: usize) -> Result<LabelMatch, LexiconError> {
        let (name, args) = match raw.find('(') {
            Some(i) => (&raw[..i], Some(&raw[i + 1..])),
            None => (raw, None),
        };
        let (kind, alias, distance) = self
            .match_name(name, max_edit)
            .ok_or_else(|| LexiconError::NoMatch(raw.trim().to_string()))?;
        let (params, return_seq) = match args {
            Some(a) => parse_args(kind, a.trim_end().trim_end_matches(')')),
            None => (None, None),
        };
        Ok(LabelMatch {
            kind,
            return_seq: if kind.is_recurrent() { return_seq } else { None },
            params: if kind.has_params() { params } else { Some(HyperParams::Empty) },
            alias: alias.to_string(),
            distance,
        })
    }
}

/// Leading number of a piece such as `5x5` or `0.5`.
pub(crate) fn leading_number(piece: &str) -> Option<f64> {
    let s: String = piece
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == '.')
        .collect();
    s.parse().ok()
}

fn parse_args(kind: LayerKind, args: &str) -> (Option<HyperParams>, Option<bool>) {
    let pieces: Vec<&str> = args.split(',').map(str::trim).collect();
    let seq = pieces
        .iter()
        .any(|p| strsim::levenshtein(&normalize(p), "seq") <= 1 && leading_number(p).is_none());
    let nums: Vec<f64> = pieces.iter().filter_map(|p| leading_number(p)).collect();
    let int = |i: usize| {
        nums.get(i)
            .filter(|v| v.fract() == 0.0 && **v >= 1.0 && **v <= u32::MAX as f64)
            .map(|v| *v as u32)
    };
    let params = match kind {
        LayerKind::Dense => int(0).map(|nodes| HyperParams::Dense { nodes }),
        LayerKind::Dropout => nums
            .first()
            .filter(|p| (0.0..=1.0).contains(*p))
            .map(|&probability| HyperParams::Dropout { probability }),
        LayerKind::Conv2D => int(0)
            .zip(int(1))
            .map(|(filters, filter_size)| HyperParams::Conv2D { filters, filter_size }),
        LayerKind::MaxPool2D | LayerKind::AvgPool2D => int(0)
            .zip(int(1))
            .map(|(filter_size, stride)| HyperParams::Pool { stride, filter_size }),
        LayerKind::Embed => int(0)
            .zip(int(1))
            .map(|(embed_size, vocab)| HyperParams::Embed { embed_size, vocab }),
        LayerKind::SimpleRnn => int(0).map(|units| HyperParams::SimpleRnn { units }),
        LayerKind::Lstm => int(0).map(|nodes| HyperParams::Lstm { nodes }),
        _ => None,
    };
    (params, Some(seq))
}

/// Diagram text of a node: the kind name followed by its parameters.
pub fn format_label(node: &Node) -> String {
    let name = node.kind.name();
    let args = match node.kind {
        LayerKind::InputMnist => Some("28x28x1".to_string()),
        LayerKind::InputCifar10 => Some("32x32x3".to_string()),
        LayerKind::InputImageNet => Some("224x224x3".to_string()),
        LayerKind::InputImdbText => Some(IMDB_SEQ_LEN.to_string()),
        _ => match node.params {
            Some(HyperParams::Dense { nodes }) => Some(nodes.to_string()),
            Some(HyperParams::Dropout { probability }) => Some(format!("{probability:.1}")),
            Some(HyperParams::Conv2D { filters, filter_size: k }) => Some(format!("{filters}, {k}x{k}")),
            Some(HyperParams::Pool { stride, filter_size: k }) => Some(format!("{k}x{k}, {stride}")),
            Some(HyperParams::Embed { embed_size, vocab }) => Some(format!("{embed_size}, {vocab}")),
            Some(HyperParams::SimpleRnn { units: n } | HyperParams::Lstm { nodes: n }) => {
                Some(if node.return_seq { format!("{n}, seq") } else { n.to_string() })
            }
            _ => None,
        },
    };
    match args {
        Some(a) => format!("{name} ({a})"),
        None => name.to_string(),
    }
}
