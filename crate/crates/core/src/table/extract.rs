use serde::Serialize;

use super::{CellGrid, TableConfig, TableError};
use crate::graph::{domains_for, params_from_values, CompGraph, HyperParams, LayerKind, Node, Provenance};
use crate::lexicon::{leading_number, normalize, LabelMatch, Lexicon};

const MAX_EDIT: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// One layer per row.
    RowMajor,
    /// One layer per column.
    ColumnMajor,
}

/// A row (or column) whose name cell matched no layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableExtraction {
    pub graph: CompGraph,
    pub skipped: Vec<Skipped>,
}

fn layer_of(text: &str) -> Option<LabelMatch> {
    if text.trim().is_empty() {
        return None;
    }
    Lexicon::builtin().correct_label(text, MAX_EDIT).ok()
}

fn column_hits(grid: &CellGrid, c: usize) -> usize {
    (0..grid.n_rows()).filter(|&r| layer_of(grid.cell(r, c)).is_some()).count()
}

/// Which axis the layers advance along.
///
/// Lexicon hits down the first two columns are compared with hits across
/// the first two rows; on a tie the longer axis wins, and a square tie is
/// read row-major.
pub fn orientation(grid: &CellGrid) -> Orientation {
    let down = (0..grid.n_cols().min(2)).map(|c| column_hits(grid, c)).max().unwrap_or(0);
    let t = grid.transpose();
    let across = (0..t.n_cols().min(2)).map(|c| column_hits(&t, c)).max().unwrap_or(0);
    match down.cmp(&across) {
        std::cmp::Ordering::Greater => Orientation::RowMajor,
        std::cmp::Ordering::Less => Orientation::ColumnMajor,
        std::cmp::Ordering::Equal if grid.n_cols() > grid.n_rows() => Orientation::ColumnMajor,
        std::cmp::Ordering::Equal => Orientation::RowMajor,
    }
}

/// Input kind of a row whose name reads `input`, `data` or `image`, judged
/// from the dataset named or the first size mentioned anywhere in the row.
fn input_kind(row: &[String], name: &str) -> Option<LayerKind> {
    let n = normalize(name);
    if !(n.starts_with("input") || n == "data" || n == "image") {
        return None;
    }
    let text = row.join(" ").to_ascii_lowercase();
    for (word, kind) in [
        ("mnist", LayerKind::InputMnist),
        ("cifar", LayerKind::InputCifar10),
        ("imagenet", LayerKind::InputImageNet),
        ("imdb", LayerKind::InputImdbText),
        ("text", LayerKind::InputImdbText),
        ("token", LayerKind::InputImdbText),
        ("word", LayerKind::InputImdbText),
    ] {
        if text.contains(word) {
            return Some(kind);
        }
    }
    let first = text
        .split(|c: char| !c.is_ascii_digit())
        .find(|s| !s.is_empty())
        .and_then(|s| s.parse::<u32>().ok())?;
    match first {
        28 => Some(LayerKind::InputMnist),
        32 => Some(LayerKind::InputCifar10),
        64.. if text.contains('x') => Some(LayerKind::InputImageNet),
        _ => None,
    }
}

fn params_for(kind: LayerKind, values: &[(String, f64)], config: &TableConfig) -> Option<HyperParams> {
    if !kind.has_params() {
        return Some(HyperParams::Empty);
    }
    let bindings = config.fields.get(kind.name())?;
    let mut out = Vec::new();
    for (field, _) in domains_for(kind) {
        let roles = bindings.get(*field)?;
        let v = roles
            .iter()
            .find_map(|role| values.iter().find(|(r, _)| r == role).map(|(_, v)| *v))?;
        let integral = kind != LayerKind::Dropout;
        if (integral && (v.fract() != 0.0 || v < 1.0)) || (!integral && !(0.0..=1.0).contains(&v)) {
            return None;
        }
        out.push(v);
    }
    params_from_values(kind, &out)
}

/// Reads a design table into a chain of layers.
///
/// The layer axis is walked in order. The name column is the one with the
/// most lexicon hits (leftmost on ties); the first row is a header when its
/// name cell is not a layer. Parameters come from header columns through
/// the header dictionary, else from a parenthesised list in the name cell.
pub fn extract_table_graph(grid: &CellGrid, orientation: Orientation) -> Result<TableExtraction, TableError> {
    let grid = match orientation {
        Orientation::RowMajor => grid.clone(),
        Orientation::ColumnMajor => grid.transpose(),
    };
    let config = TableConfig::builtin();
    let name_col = (0..grid.n_cols())
        .map(|c| (column_hits(&grid, c), c))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, c)| c)
        .ok_or(TableError::EmptyDesign)?;
    let has_header = grid.n_rows() > 0 && layer_of(grid.cell(0, name_col)).is_none();
    let roles: Vec<Option<String>> = (0..grid.n_cols())
        .map(|c| {
            (has_header && c != name_col)
                .then(|| config.role_of(grid.cell(0, c)).map(str::to_string))
                .flatten()
        })
        .collect();

    let mut graph = CompGraph::new("table");
    graph.provenance = Provenance::ExtractedTable;
    let mut skipped = Vec::new();
    let mut prev: Option<String> = None;
    for r in usize::from(has_header)..grid.n_rows() {
        let text = grid.cell(r, name_col).trim();
        if text.is_empty() {
            continue;
        }
        let row = &grid.rows[r];
        let (kind, label_params, return_seq) = match input_kind(row, text) {
            Some(k) => (k, Some(HyperParams::Empty), None),
            None => match layer_of(text) {
                Some(m) => (m.kind, m.params, m.return_seq),
                None => {
                    skipped.push(Skipped {
                        index: r,
                        text: text.to_string(),
                    });
                    continue;
                }
            },
        };
        let values: Vec<(String, f64)> = roles
            .iter()
            .enumerate()
            .filter_map(|(c, role)| Some((role.clone()?, leading_number(grid.cell(r, c))?)))
            .collect();
        let params = params_for(kind, &values, config).or(label_params);
        let id = format!("t{r:02}");
        graph.add_node(Node {
            return_seq: return_seq.unwrap_or(false),
            params,
            label: Some(text.to_string()),
            ..Node::bare(id.clone(), kind)
        });
        if let Some(p) = prev.replace(id.clone()) {
            graph.add_edge(p, id);
        }
    }
    if graph.is_empty() {
        return Err(TableError::EmptyDesign);
    }
    Ok(TableExtraction { graph, skipped })
}
