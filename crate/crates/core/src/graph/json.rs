//! `.dlg.json` serialisation.
//!
//! ```json
//! {
//!   "schema": "dlp2c/1",
//!   "name": "lenet",
//!   "provenance": "simulated",
//!   "nodes": [{"id": "n0", "kind": "InputMNIST", "params": {}}, ...],
//!   "edges": [["n0", "n1"], ...]
//! }
//! ```
//!
//! Edge order is preserved and defines Concat input order. Unknown fields are
//! rejected in [`ParseMode::Strict`] and carried through in
//! [`ParseMode::Lenient`]. Parameter objects always have a closed schema.

use serde_json::{json, Map, Value};

use super::{CompGraph, Edge, HyperParams, LayerKind, Node, Provenance};

pub const SCHEMA_VERSION: &str = "dlp2c/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JsonError {
    #[error("parse error at {}: {message}", locus(.line, .column, .field))]
    Parse {
        line: Option<usize>,
        column: Option<usize>,
        field: Option<String>,
        message: String,
    },
    #[error("unsupported schema `{found}`, expected `{SCHEMA_VERSION}`")]
    SchemaVersionMismatch { found: String },
}

fn locus(line: &Option<usize>, column: &Option<usize>, field: &Option<String>) -> String {
    match (line, column, field) {
        (Some(l), Some(c), _) => format!("line {l}, column {c}"),
        (_, _, Some(f)) => format!("field `{f}`"),
        _ => "document".to_string(),
    }
}

fn field_err(field: impl Into<String>, message: impl Into<String>) -> JsonError {
    JsonError::Parse {
        line: None,
        column: None,
        field: Some(field.into()),
        message: message.into(),
    }
}

fn params_value(node: &Node) -> Value {
    let Some(p) = node.params else { return Value::Null };
    let mut m = Map::new();
    for (name, value) in p.fields() {
        let v = if name == "probability" {
            json!(value)
        } else {
            json!(value as u64)
        };
        m.insert(name.to_string(), v);
    }
    Value::Object(m)
}

/// Serialises a graph as pretty-printed JSON with a trailing newline.
pub fn to_json(graph: &CompGraph) -> String {
    let mut text = serde_json::to_string_pretty(&to_value(graph)).expect("value serialises");
    text.push('\n');
    text
}

pub fn to_value(graph: &CompGraph) -> Value {
    let mut top = Map::new();
    top.insert("schema".into(), json!(SCHEMA_VERSION));
    top.insert("name".into(), json!(graph.name));
    top.insert("provenance".into(), json!(graph.provenance.as_str()));
    let nodes: Vec<Value> = graph
        .nodes
        .values()
        .map(|n| {
            let mut m = Map::new();
            m.insert("id".into(), json!(n.id));
            m.insert("kind".into(), json!(n.kind.name()));
            m.insert("params".into(), params_value(n));
            if n.kind.is_recurrent() {
                m.insert("return_seq".into(), json!(n.return_seq));
            }
            if let Some(label) = &n.label {
                m.insert("label".into(), json!(label));
            }
            for (k, v) in &n.extra {
                m.insert(k.clone(), v.clone());
            }
            Value::Object(m)
        })
        .collect();
    top.insert("nodes".into(), Value::Array(nodes));
    let edges: Vec<Value> = graph.edges.iter().map(|e| json!([e.src, e.dst])).collect();
    top.insert("edges".into(), Value::Array(edges));
    for (k, v) in &graph.extra {
        top.insert(k.clone(), v.clone());
    }
    Value::Object(top)
}

pub fn from_json(text: &str) -> Result<CompGraph, JsonError> {
    from_json_with(text, ParseMode::Strict)
}

pub fn from_json_with(text: &str, mode: ParseMode) -> Result<CompGraph, JsonError> {
    let value: Value = serde_json::from_str(text).map_err(|e| JsonError::Parse {
        line: Some(e.line()),
        column: Some(e.column()),
        field: None,
        message: e.to_string(),
    })?;
    from_value(&value, mode)
}

/// Builds a graph from an already parsed JSON value.
pub fn from_value(value: &Value, mode: ParseMode) -> Result<CompGraph, JsonError> {
    let top = value
        .as_object()
        .ok_or_else(|| field_err("$", "expected a JSON object"))?;
    match top.get("schema") {
        Some(Value::String(s)) if s == SCHEMA_VERSION => {}
        Some(Value::String(s)) => return Err(JsonError::SchemaVersionMismatch { found: s.clone() }),
        Some(_) => return Err(field_err("schema", "expected a string")),
        None => return Err(field_err("schema", "missing schema version")),
    }
    let mut graph = CompGraph::new(match top.get("name") {
        None | Some(Value::Null) => "",
        Some(Value::String(s)) => s.as_str(),
        Some(_) => return Err(field_err("name", "expected a string")),
    });
    if let Some(p) = top.get("provenance") {
        let s = p.as_str().ok_or_else(|| field_err("provenance", "expected a string"))?;
        graph.provenance =
            Provenance::parse(s).ok_or_else(|| field_err("provenance", format!("unknown provenance `{s}`")))?;
    }
    for (k, v) in top {
        if !matches!(k.as_str(), "schema" | "name" | "provenance" | "nodes" | "edges") {
            match mode {
                ParseMode::Strict => return Err(field_err(k.clone(), "unknown field")),
                ParseMode::Lenient => {
                    graph.extra.insert(k.clone(), v.clone());
                }
            }
        }
    }
    let nodes = top
        .get("nodes")
        .and_then(Value::as_array)
        .ok_or_else(|| field_err("nodes", "expected an array of nodes"))?;
    if nodes.is_empty() {
        return Err(field_err("nodes", "graph has no nodes (an input layer is required)"));
    }
    for (i, n) in nodes.iter().enumerate() {
        let node = parse_node(n, i, mode)?;
        if graph.nodes.contains_key(&node.id) {
            return Err(field_err(format!("nodes[{i}].id"), format!("duplicate id `{}`", node.id)));
        }
        graph.add_node(node);
    }
    let edges = match top.get("edges") {
        None => &Vec::new(),
        Some(v) => v.as_array().ok_or_else(|| field_err("edges", "expected an array"))?,
    };
    for (i, e) in edges.iter().enumerate() {
        let at = format!("edges[{i}]");
        let pair = e
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| field_err(at.clone(), "expected [src, dst]"))?;
        let mut ends = pair.iter().map(|v| v.as_str());
        let (Some(Some(src)), Some(Some(dst))) = (ends.next(), ends.next()) else {
            return Err(field_err(at, "edge ends must be strings"));
        };
        for end in [src, dst] {
            if !graph.nodes.contains_key(end) {
                return Err(field_err(at.clone(), format!("edge references missing node `{end}`")));
            }
        }
        graph.edges.push(Edge::new(src, dst));
    }
    Ok(graph)
}

fn parse_node(value: &Value, i: usize, mode: ParseMode) -> Result<Node, JsonError> {
    let at = |f: &str| format!("nodes[{i}].{f}");
    let obj = value
        .as_object()
        .ok_or_else(|| field_err(format!("nodes[{i}]"), "expected an object"))?;
    let id = obj
        .get("id")
        .and_then(Value::as_str)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| field_err(at("id"), "expected a non-empty string"))?;
    let kind_name = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| field_err(at("kind"), "expected a string"))?;
    let kind = LayerKind::from_name(kind_name)
        .ok_or_else(|| field_err(at("kind"), format!("unknown layer kind `{kind_name}`")))?;
    let mut node = Node::bare(id, kind);
    match obj.get("return_seq") {
        None => {}
        Some(_) if !kind.is_recurrent() => {
            return Err(field_err(at("return_seq"), format!("not allowed on {kind}")))
        }
        Some(Value::Bool(b)) => node.return_seq = *b,
        Some(_) => return Err(field_err(at("return_seq"), "expected a boolean")),
    }
    match obj.get("label") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => node.label = Some(s.clone()),
        Some(_) => return Err(field_err(at("label"), "expected a string")),
    }
    let params = obj.get("params").filter(|v| !v.is_null());
    if kind == LayerKind::Unknown {
        node.params = None;
    } else if let Some(p) = params {
        let p = p.as_object().ok_or_else(|| field_err(at("params"), "expected an object"))?;
        node.params = Some(parse_params(kind, p, &at("params"))?);
    } else if !kind.has_params() {
        node.params = Some(HyperParams::Empty);
    }
    for (k, v) in obj {
        if !matches!(k.as_str(), "id" | "kind" | "params" | "return_seq" | "label") {
            match mode {
                ParseMode::Strict => return Err(field_err(at(k), "unknown field")),
                ParseMode::Lenient => {
                    node.extra.insert(k.clone(), v.clone());
                }
            }
        }
    }
    Ok(node)
}

fn parse_params(kind: LayerKind, obj: &Map<String, Value>, at: &str) -> Result<HyperParams, JsonError> {
    let expected: &[&str] = match kind {
        LayerKind::Dense | LayerKind::Lstm => &["nodes"],
        LayerKind::Dropout => &["probability"],
        LayerKind::Conv2D => &["filters", "filter_size"],
        LayerKind::MaxPool2D | LayerKind::AvgPool2D => &["stride", "filter_size"],
        LayerKind::Embed => &["embed_size", "vocab"],
        LayerKind::SimpleRnn => &["units"],
        _ => &[],
    };
    if let Some(k) = obj.keys().find(|k| !expected.contains(&k.as_str())) {
        return Err(field_err(format!("{at}.{k}"), format!("unknown parameter for {kind}")));
    }
    let int = |name: &str| -> Result<u32, JsonError> {
        obj.get(name)
            .and_then(Value::as_u64)
            .filter(|&v| v > 0 && v <= u32::MAX as u64)
            .map(|v| v as u32)
            .ok_or_else(|| field_err(format!("{at}.{name}"), "expected a positive integer"))
    };
    Ok(match kind {
        LayerKind::Dense => HyperParams::Dense { nodes: int("nodes")? },
        LayerKind::Lstm => HyperParams::Lstm { nodes: int("nodes")? },
        LayerKind::Dropout => {
            let p = obj
                .get("probability")
                .and_then(Value::as_f64)
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(|| field_err(format!("{at}.probability"), "expected a number in [0, 1]"))?;
            HyperParams::Dropout { probability: p }
        }
        LayerKind::Conv2D => HyperParams::Conv2D {
            filters: int("filters")?,
            filter_size: int("filter_size")?,
        },
        LayerKind::MaxPool2D | LayerKind::AvgPool2D => HyperParams::Pool {
            stride: int("stride")?,
            filter_size: int("filter_size")?,
        },
        LayerKind::Embed => HyperParams::Embed {
            embed_size: int("embed_size")?,
            vocab: int("vocab")?,
        },
        LayerKind::SimpleRnn => HyperParams::SimpleRnn { units: int("units")? },
        _ => HyperParams::Empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> CompGraph {
        let mut g = CompGraph::new("text");
        g.provenance = Provenance::Edited;
        g.add_node(Node::new("in", LayerKind::InputImdbText, HyperParams::Empty))
            .add_node(Node::new("emb", LayerKind::Embed, HyperParams::Embed { embed_size: 64, vocab: 10_000 }))
            .add_node(Node::recurrent("rnn", LayerKind::Lstm, HyperParams::Lstm { nodes: 8 }, true))
            .add_node(Node::new("drop", LayerKind::Dropout, HyperParams::Dropout { probability: 0.3 }))
            .add_node(Node::bare("head", LayerKind::Dense));
        g.add_edge("in", "emb").add_edge("emb", "rnn").add_edge("rnn", "drop").add_edge("drop", "head");
        g
    }

    #[test]
    fn round_trip() {
        let g = sample();
        let text = to_json(&g);
        assert!(text.ends_with('\n'));
        assert_eq!(from_json(&text).unwrap(), g);
    }

    #[test]
    fn missing_edge_target() {
        let text = r#"{"schema":"dlp2c/1","name":"x","nodes":[{"id":"a","kind":"InputMNIST"}],"edges":[["a","b"]]}"#;
        match from_json(text) {
            Err(JsonError::Parse { field: Some(f), .. }) => assert_eq!(f, "edges[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_nodes_rejected() {
        let text = r#"{"schema":"dlp2c/1","name":"x","nodes":[],"edges":[]}"#;
        assert!(matches!(from_json(text), Err(JsonError::Parse { .. })));
    }

    #[test]
    fn syntax_error_has_line() {
        let text = "{\n  \"schema\": \"dlp2c/1\",\n  oops\n}";
        match from_json(text) {
            Err(JsonError::Parse { line: Some(3), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_mismatch() {
        let text = r#"{"schema":"dlp2c/9","nodes":[{"id":"a","kind":"InputMNIST"}]}"#;
        assert_eq!(
            from_json(text),
            Err(JsonError::SchemaVersionMismatch { found: "dlp2c/9".into() })
        );
    }

    #[test]
    fn unknown_fields_strict_vs_lenient() {
        let text = r#"{"schema":"dlp2c/1","name":"x","color":"red",
            "nodes":[{"id":"a","kind":"InputMNIST","pos":[1,2]}],"edges":[]}"#;
        assert!(from_json(text).is_err());
        let g = from_json_with(text, ParseMode::Lenient).unwrap();
        assert_eq!(g.extra["color"], json!("red"));
        assert_eq!(g.nodes["a"].extra["pos"], json!([1, 2]));
        let again = from_json_with(&to_json(&g), ParseMode::Lenient).unwrap();
        assert_eq!(again, g);
    }

    #[test]
    fn return_seq_only_on_recurrent() {
        let text = r#"{"schema":"dlp2c/1","nodes":[{"id":"a","kind":"Dense","params":{"nodes":5},"return_seq":false}]}"#;
        assert!(from_json(text).is_err());
    }

    fn arb_graph() -> impl Strategy<Value = CompGraph> {
        let kinds = prop::sample::select(LayerKind::ALL.to_vec());
        prop::collection::vec((kinds, any::<bool>(), 1u32..500, 0u8..=10), 1..12).prop_flat_map(|spec| {
            let n = spec.len();
            let edges = prop::collection::vec((0..n, 0..n), 0..2 * n);
            (Just(spec), edges)
        })
        .prop_map(|(spec, edges)| {
            let mut g = CompGraph::new("arb");
            for (i, (kind, seq, v, p)) in spec.into_iter().enumerate() {
                let params = match kind {
                    LayerKind::Dense => HyperParams::Dense { nodes: v },
                    LayerKind::Dropout => HyperParams::Dropout { probability: p as f64 / 10.0 },
                    LayerKind::Conv2D => HyperParams::Conv2D { filters: v, filter_size: 3 },
                    LayerKind::MaxPool2D | LayerKind::AvgPool2D => HyperParams::Pool { stride: 2, filter_size: v },
                    LayerKind::Embed => HyperParams::Embed { embed_size: v, vocab: 10_000 },
                    LayerKind::SimpleRnn => HyperParams::SimpleRnn { units: v },
                    LayerKind::Lstm => HyperParams::Lstm { nodes: v },
                    _ => HyperParams::Empty,
                };
                let mut node = Node::new(format!("id{i}"), kind, params);
                node.return_seq = seq && kind.is_recurrent();
                g.add_node(node);
            }
            for (a, b) in edges {
                g.add_edge(format!("id{a}"), format!("id{b}"));
            }
            g
        })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_identity(g in arb_graph()) {
            let back = from_json(&to_json(&g)).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
