//! Protocol-buffer text format: a parser and printer for the generic message
//! tree, a structural checker for Caffe network definitions, and a reader
//! that maps a network definition back to a [`CompGraph`].

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Dialect, RuleSet};
use crate::graph::{domains_for, params_from_values, CompGraph, HyperParams, Node};

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Str(String),
    Num(String),
    Ident(String),
}

impl Scalar {
    pub fn text(&self) -> &str {
        match self {
            Scalar::Str(s) | Scalar::Num(s) | Scalar::Ident(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Scalar(Scalar),
    Message(Message),
}

/// A named field. Equality ignores the source line.
#[derive(Debug, Clone)]
pub struct Field {
    pub name: String,
    pub value: FieldValue,
    pub line: usize,
}

impl PartialEq for Field {
    fn eq(&self, other: &Field) -> bool {
        self.name == other.name && self.value == other.value
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Message {
    pub fields: Vec<Field>,
}

impl Message {
    pub fn all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a FieldValue> + 'a {
        self.fields.iter().filter(move |f| f.name == name).map(|f| &f.value)
    }

    pub fn scalar<'a>(&'a self, name: &'a str) -> Option<&'a Scalar> {
        self.all(name).find_map(|v| match v {
            FieldValue::Scalar(s) => Some(s),
            _ => None,
        })
    }

    pub fn message<'a>(&'a self, name: &'a str) -> Option<&'a Message> {
        self.all(name).find_map(|v| match v {
            FieldValue::Message(m) => Some(m),
            _ => None,
        })
    }

    pub fn strings<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.all(name).filter_map(|v| match v {
            FieldValue::Scalar(s) => Some(s.text()),
            _ => None,
        })
    }

    /// Prints the message in a canonical layout with two-space indentation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out
    }

    fn write(&self, out: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        for f in &self.fields {
            match &f.value {
                FieldValue::Scalar(Scalar::Str(s)) => {
                    let _ = writeln!(out, "{pad}{}: \"{}\"", f.name, escape(s));
                }
                FieldValue::Scalar(s) => {
                    let _ = writeln!(out, "{pad}{}: {}", f.name, s.text());
                }
                FieldValue::Message(m) => {
                    let _ = writeln!(out, "{pad}{} {{", f.name);
                    m.write(out, depth + 1);
                    let _ = writeln!(out, "{pad}}}");
                }
            }
        }
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(String),
    Colon,
    Open(char),
    Close(char),
    Sep,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Lexer<'_> {
    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, ParseError> {
        let mut out = Vec::new();
        while let Some(&c) = self.chars.peek() {
            let (line, col) = (self.line, self.column);
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while self.chars.peek().is_some_and(|&c| c != '\n') {
                    self.bump();
                }
            } else if c == ':' {
                self.bump();
                out.push((Tok::Colon, line, col));
            } else if c == ';' || c == ',' {
                self.bump();
                out.push((Tok::Sep, line, col));
            } else if matches!(c, '{' | '<' | '[') {
                self.bump();
                out.push((Tok::Open(c), line, col));
            } else if matches!(c, '}' | '>' | ']') {
                self.bump();
                out.push((Tok::Close(c), line, col));
            } else if c == '"' || c == '\'' {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        None | Some('\n') => return Err(self.err("unterminated string")),
                        Some(q) if q == c => break,
                        Some('\\') => match self.bump() {
                            Some('n') => s.push('\n'),
                            Some('t') => s.push('\t'),
                            Some(e) => s.push(e),
                            None => return Err(self.err("unterminated string")),
                        },
                        Some(ch) => s.push(ch),
                    }
                }
                out.push((Tok::Str(s), line, col));
            } else if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' {
                let mut s = String::new();
                while let Some(&d) = self.chars.peek() {
                    if d.is_ascii_alphanumeric() || matches!(d, '.' | '-' | '+') {
                        s.push(d);
                        self.bump();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Num(s), line, col));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut s = String::new();
                while let Some(&d) = self.chars.peek() {
                    if d.is_ascii_alphanumeric() || matches!(d, '_' | '.' | '/') {
                        s.push(d);
                        self.bump();
                    } else {
                        break;
                    }
                }
                out.push((Tok::Ident(s), line, col));
            } else {
                return Err(self.err(format!("unexpected character `{c}`")));
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.1, t.2)).unwrap_or(self.end)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        let (line, column) = self.here();
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn closing(open: char) -> char {
        match open {
            '{' => '}',
            '<' => '>',
            _ => ']',
        }
    }

    fn message(&mut self, close: Option<char>) -> Result<Message, ParseError> {
        let mut msg = Message::default();
        loop {
            match self.peek().cloned() {
                None if close.is_none() => return Ok(msg),
                None => return Err(self.err("missing closing brace")),
                Some(Tok::Close(c)) if Some(c) == close => {
                    self.pos += 1;
                    return Ok(msg);
                }
                Some(Tok::Close(c)) => return Err(self.err(format!("unbalanced `{c}`"))),
                Some(Tok::Ident(name)) => {
                    let line = self.here().0;
                    self.pos += 1;
                    let colon = self.peek() == Some(&Tok::Colon);
                    if colon {
                        self.pos += 1;
                    }
                    for value in self.values(colon)? {
                        msg.fields.push(Field {
                            name: name.clone(),
                            value,
                            line,
                        });
                    }
                    if self.peek() == Some(&Tok::Sep) {
                        self.pos += 1;
                    }
                }
                Some(_) => return Err(self.err("expected a field name")),
            }
        }
    }

    fn values(&mut self, after_colon: bool) -> Result<Vec<FieldValue>, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Open('[')) if after_colon => {
                self.pos += 1;
                let mut out = Vec::new();
                loop {
                    match self.peek() {
                        Some(Tok::Close(']')) => {
                            self.pos += 1;
                            return Ok(out);
                        }
                        Some(Tok::Sep) => self.pos += 1,
                        _ => out.extend(self.values(true)?),
                    }
                }
            }
            Some(Tok::Open(c)) if c != '[' => {
                self.pos += 1;
                Ok(vec![FieldValue::Message(self.message(Some(Parser::closing(c)))?)])
            }
            Some(tok) if after_colon => {
                let s = match tok {
                    Tok::Str(s) => {
                        self.pos += 1;
                        let mut s = s;
                        while let Some(Tok::Str(next)) = self.peek().cloned() {
                            s.push_str(&next);
                            self.pos += 1;
                        }
                        Scalar::Str(s)
                    }
                    Tok::Num(n) => {
                        self.pos += 1;
                        Scalar::Num(n)
                    }
                    Tok::Ident(i) => {
                        self.pos += 1;
                        Scalar::Ident(i)
                    }
                    _ => return Err(self.err("expected a value")),
                };
                Ok(vec![FieldValue::Scalar(s)])
            }
            _ => Err(self.err("expected `:` or `{` after field name")),
        }
    }
}

/// Parses a text-format document into its top-level message.
pub fn parse(text: &str) -> Result<Message, ParseError> {
    let lexer = Lexer {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let toks = lexer.tokens()?;
    let lines = text.lines().count().max(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: (lines, 1),
    };
    p.message(None)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub diagnostics: Vec<String>,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Structural check of a Caffe network definition: it parses, every layer
/// has a name and type, names are unique and every bottom refers to a blob
/// produced earlier.
pub fn check(text: &str) -> CheckReport {
    let mut report = CheckReport::default();
    let doc = match parse(text) {
        Ok(d) => d,
        Err(e) => {
            report.diagnostics.push(format!("parse error at {e}"));
            return report;
        }
    };
    let mut blobs: Vec<String> = doc.strings("input").map(str::to_string).collect();
    let mut names = std::collections::HashSet::new();
    let mut count = 0;
    for (i, layer) in doc.all("layer").enumerate() {
        let FieldValue::Message(layer) = layer else {
            report.diagnostics.push(format!("layer #{i} is not a message"));
            continue;
        };
        count += 1;
        let name = layer.scalar("name").map(|s| s.text().to_string());
        let label = name.clone().unwrap_or_else(|| format!("#{i}"));
        match &name {
            None => report.diagnostics.push(format!("layer {label} has no name")),
            Some(n) if !names.insert(n.clone()) => {
                report.diagnostics.push(format!("duplicate layer name `{n}`"))
            }
            _ => {}
        }
        if layer.scalar("type").is_none() {
            report.diagnostics.push(format!("layer {label} has no type"));
        }
        for b in layer.strings("bottom") {
            if !blobs.iter().any(|x| x == b) {
                report.diagnostics.push(format!("layer {label} reads undeclared bottom `{b}`"));
            }
        }
        blobs.extend(layer.strings("top").map(str::to_string));
    }
    if count == 0 {
        report.diagnostics.push("document has no layers".to_string());
    }
    report
}

pub fn prototxt_check(text: &str) -> bool {
    check(text).is_clean()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("layer `{layer}` has unmapped type `{ty}`")]
    UnknownType { layer: String, ty: String },
    #[error("layer `{0}` lacks a name or type")]
    Incomplete(String),
    #[error("layer `{layer}` reads unknown blob `{blob}`")]
    UnknownBlob { layer: String, blob: String },
}

fn literal_matches(expected: &str, actual: Option<&FieldValue>) -> bool {
    match actual {
        Some(FieldValue::Scalar(s)) => s.text() == expected,
        Some(FieldValue::Message(m)) => match parse(&format!("x {expected}")) {
            Ok(doc) => doc.message("x") == Some(m),
            Err(_) => false,
        },
        None => false,
    }
}

/// Reconstructs the layer graph of a Caffe network definition using the
/// prototxt rules in reverse. Softmax layers are treated as output heads and
/// dropped; in-place layers are followed through their blob names.
pub fn read_graph(text: &str, rules: &RuleSet) -> Result<CompGraph, ReadError> {
    let doc = parse(text)?;
    let mut graph = CompGraph::new(doc.scalar("name").map(|s| s.text()).unwrap_or(""));
    let mut producer: HashMap<String, String> = HashMap::new();
    for layer in doc.all("layer") {
        let FieldValue::Message(layer) = layer else { continue };
        let (Some(name), Some(ty)) = (layer.scalar("name"), layer.scalar("type")) else {
            return Err(ReadError::Incomplete(format!("{layer:?}")));
        };
        let (name, ty) = (name.text().to_string(), ty.text().to_string());
        let bottoms: Vec<String> = layer
            .strings("bottom")
            .map(|b| {
                producer.get(b).cloned().ok_or_else(|| ReadError::UnknownBlob {
                    layer: name.clone(),
                    blob: b.to_string(),
                })
            })
            .collect::<Result<_, _>>()?;
        if ty == "Softmax" {
            if let Some(src) = bottoms.first() {
                for top in layer.strings("top") {
                    producer.insert(top.to_string(), src.clone());
                }
            }
            continue;
        }
        let rule = rules
            .rules(Dialect::CaffePrototxt)
            .filter(|r| !r.rule.unsupported && r.rule.layer == ty)
            .find(|r| {
                let block = r.rule.block.as_deref().and_then(|b| layer.message(b));
                let scope = block.unwrap_or(layer);
                r.rule
                    .args
                    .iter()
                    .filter_map(|a| a.value.as_deref().map(|v| (a, v)))
                    .all(|(a, v)| literal_matches(v, scope.all(&a.key).next()))
            })
            .ok_or_else(|| ReadError::UnknownType {
                layer: name.clone(),
                ty: ty.clone(),
            })?;
        let kind = rule.kind;
        let scope = rule.rule.block.as_deref().and_then(|b| layer.message(b));
        let params = if kind.has_params() {
            let values: Option<Vec<f64>> = domains_for(kind)
                .iter()
                .map(|(field, _)| {
                    let arg = rule.rule.args.iter().find(|a| {
                        a.from.as_deref() == Some(*field)
                            && matches!(a.transform.as_deref(), None | Some("float"))
                    })?;
                    scope?.scalar(&arg.key)?.text().parse::<f64>().ok()
                })
                .collect();
            values.and_then(|v| params_from_values(kind, &v))
        } else {
            Some(HyperParams::Empty)
        };
        let mut node = Node::bare(name.clone(), kind);
        node.params = params;
        graph.add_node(node);
        for b in bottoms {
            graph.add_edge(b, name.clone());
        }
        for top in layer.strings("top") {
            producer.insert(top.to_string(), name.clone());
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LayerKind;

    const NET: &str = r#"
name: "tiny"  # comment
layer {
  name: "data"
  type: "Input"
  top: "data"
  input_param { shape { dim: 1 dim: 1 dim: 28 dim: 28 } }
}
layer {
  name: "ip"
  type: "InnerProduct"
  bottom: "data"
  top: "ip"
  inner_product_param { num_output: 10 }
}
"#;

    #[test]
    fn parses_nested_messages() {
        let doc = parse(NET).unwrap();
        assert_eq!(doc.scalar("name").unwrap().text(), "tiny");
        let layers: Vec<_> = doc.all("layer").collect();
        assert_eq!(layers.len(), 2);
        let FieldValue::Message(first) = layers[0] else { panic!() };
        let shape = first.message("input_param").unwrap().message("shape").unwrap();
        assert_eq!(shape.strings("dim").collect::<Vec<_>>(), ["1", "1", "28", "28"]);
    }

    #[test]
    fn printer_round_trips() {
        let doc = parse(NET).unwrap();
        assert_eq!(parse(&doc.to_text()).unwrap(), doc);
    }

    #[test]
    fn list_and_colon_message_syntax() {
        let doc = parse("a: [1, 2, 3] b: { c: \"x\" \"y\" } d < e: F >").unwrap();
        assert_eq!(doc.strings("a").count(), 3);
        assert_eq!(doc.message("b").unwrap().scalar("c").unwrap().text(), "xy");
        assert_eq!(doc.message("d").unwrap().scalar("e"), Some(&Scalar::Ident("F".into())));
    }

    #[test]
    fn check_accepts_clean_network() {
        assert!(prototxt_check(NET));
    }

    #[test]
    fn check_rejects_unbalanced_brace() {
        let broken = NET.replacen("inner_product_param { num_output: 10 }", "inner_product_param { num_output: 10", 1);
        assert!(!prototxt_check(&broken));
        assert!(!prototxt_check("layer { name: \"a\" type: \"X\" } }"));
    }

    #[test]
    fn check_rejects_dangling_bottom() {
        let broken = NET.replace("bottom: \"data\"", "bottom: \"nope\"");
        let r = check(&broken);
        assert!(!r.is_clean());
        assert!(r.diagnostics[0].contains("nope"));
    }

    #[test]
    fn check_rejects_missing_type() {
        assert!(!prototxt_check("layer { name: \"a\" top: \"a\" }"));
        assert!(!prototxt_check(""));
    }

    #[test]
    fn reads_graph_back() {
        let g = read_graph(NET, RuleSet::builtin()).unwrap();
        assert_eq!(g.nodes["data"].kind, LayerKind::InputMnist);
        assert_eq!(g.nodes["ip"].params, Some(HyperParams::Dense { nodes: 10 }));
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn reader_follows_in_place_layers() {
        let text = format!(
            "{NET}layer {{ name: \"drop\" type: \"Dropout\" bottom: \"ip\" top: \"ip\" dropout_param {{ dropout_ratio: 0.3 }} }}\n\
             layer {{ name: \"ip2\" type: \"InnerProduct\" bottom: \"ip\" top: \"ip2\" inner_product_param {{ num_output: 2 }} }}"
        );
        let g = read_graph(&text, RuleSet::builtin()).unwrap();
        assert_eq!(g.predecessors("ip2").collect::<Vec<_>>(), ["drop"]);
        assert_eq!(g.nodes["drop"].params, Some(HyperParams::Dropout { probability: 0.3 }));
    }
}
