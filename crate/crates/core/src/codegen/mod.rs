//! Rule-based conversion of a [`CompGraph`] into Keras source or Caffe
//! prototxt.
//!
//! All target-specific knowledge (layer names, argument spellings, value
//! transforms, assertions and text templates) lives in [`RuleSet`], loaded
//! from `data/rules.toml` or a user-supplied file of the same shape.

pub mod prototxt;
mod rules;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use rules::{fill, Arg, CompiledRule, DialectTemplates, MappingRule, Predicate, RuleSet, TRANSFORMS};

use crate::graph::{infer_graph_shapes, validate, CompGraph, HyperParams, LayerKind, Node, TensorShape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dialect {
    #[serde(rename = "keras")]
    KerasFunctional,
    #[serde(rename = "caffe")]
    CaffePrototxt,
}

impl Dialect {
    pub const ALL: [Dialect; 2] = [Dialect::KerasFunctional, Dialect::CaffePrototxt];

    pub fn name(self) -> &'static str {
        match self {
            Dialect::KerasFunctional => "keras",
            Dialect::CaffePrototxt => "caffe",
        }
    }

    pub fn parse(s: &str) -> Option<Dialect> {
        match s.to_ascii_lowercase().as_str() {
            "keras" | "keras_functional" | "py" => Some(Dialect::KerasFunctional),
            "caffe" | "caffe_prototxt" | "prototxt" => Some(Dialect::CaffePrototxt),
            _ => None,
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodegenError {
    #[error("graph is not valid: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),
    #[error("unsupported layers: {}", fmt_loci(.0))]
    UnsupportedLayer(Vec<(String, LayerKind)>),
    #[error("node {node}: assertion `{predicate}` failed")]
    AssertionFailed { node: String, predicate: String },
    #[error("rule base: {0}")]
    Rules(String),
}

fn fmt_loci(loci: &[(String, LayerKind)]) -> String {
    loci.iter()
        .map(|(id, k)| format!("{id} ({k})"))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Append a softmax classifier after the terminal layer.
    pub softmax_head: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions { softmax_head: true }
    }
}

/// Generates a document with the builtin rules and a softmax head.
pub fn generate(graph: &CompGraph, dialect: Dialect) -> Result<String, CodegenError> {
    generate_with(graph, dialect, RuleSet::builtin(), GenerateOptions::default())
}

fn quote(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

const PY_RESERVED: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in",
    "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with",
    "yield", "keras", "layers", "model", "input", "print", "type", "id",
];

/// Unique Python identifiers derived from node ids.
struct Names {
    used: HashSet<String>,
}

impl Names {
    fn new() -> Names {
        Names { used: HashSet::new() }
    }

    fn python(&mut self, id: &str) -> String {
        let mut base: String = id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
            .collect();
        if base.is_empty() || base.starts_with(|c: char| c.is_ascii_digit()) {
            base.insert_str(0, "x_");
        }
        if PY_RESERVED.contains(&base.as_str()) {
            base.push('_');
        }
        self.unique(base)
    }

    fn unique(&mut self, base: String) -> String {
        let mut name = base.clone();
        let mut n = 2;
        while self.used.contains(&name) {
            name = format!("{base}_{n}");
            n += 1;
        }
        self.used.insert(name.clone());
        name
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn format_float(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') || s.contains('e') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Per-node values available to `from` and to assertions.
struct Context<'a> {
    params: &'a HyperParams,
    return_seq: bool,
    concat_axis: usize,
}

enum Value {
    Num(f64),
    Bool(bool),
}

impl Context<'_> {
    fn lookup(&self, field: &str) -> Option<Value> {
        match field {
            "return_seq" => Some(Value::Bool(self.return_seq)),
            "concat_axis" => Some(Value::Num(self.concat_axis as f64)),
            _ => self
                .params
                .fields()
                .into_iter()
                .find(|(k, _)| *k == field)
                .map(|(_, v)| Value::Num(v)),
        }
    }
}

fn render_arg(arg: &Arg, ctx: &Context<'_>) -> Result<String, CodegenError> {
    if let Some(v) = &arg.value {
        return Ok(v.clone());
    }
    let field = arg.from.as_deref().unwrap_or_default();
    let value = ctx
        .lookup(field)
        .ok_or_else(|| CodegenError::Rules(format!("argument `{}` reads unknown field `{field}`", arg.key)))?;
    Ok(match (arg.transform.as_deref(), value) {
        (Some("same_pad"), Value::Num(k)) => format_number(((k as i64 - 1) / 2) as f64),
        (Some("py_bool"), Value::Bool(b)) => if b { "True" } else { "False" }.to_string(),
        (Some("float"), Value::Num(x)) => format_float(x),
        (None, Value::Num(x)) => format_number(x),
        (None, Value::Bool(b)) => b.to_string(),
        (t, _) => {
            return Err(CodegenError::Rules(format!(
                "transform {t:?} does not apply to field `{field}`"
            )))
        }
    })
}

fn check_assertions(rule: &CompiledRule, node_id: &str, ctx: &Context<'_>) -> Result<(), CodegenError> {
    for p in &rule.predicates {
        let ok = match ctx.lookup(p.field()) {
            Some(Value::Num(x)) => p.holds(x),
            Some(Value::Bool(b)) => p.holds(b as u8 as f64),
            None => false,
        };
        if !ok {
            return Err(CodegenError::AssertionFailed {
                node: node_id.to_string(),
                predicate: p.text.clone(),
            });
        }
    }
    Ok(())
}

/// Names used when emitting one layer.
struct Site<'a> {
    name: &'a str,
    var: &'a str,
    inputs: &'a [String],
}

fn emit_layer(
    rules: &RuleSet,
    dialect: Dialect,
    node: &Node,
    site: &Site<'_>,
    concat_axis: usize,
) -> Result<String, CodegenError> {
    let rule = rules
        .rule(node.kind, dialect)
        .filter(|r| !r.rule.unsupported)
        .ok_or_else(|| CodegenError::UnsupportedLayer(vec![(node.id.clone(), node.kind)]))?;
    let params = node
        .params
        .as_ref()
        .ok_or_else(|| CodegenError::InvalidGraph(vec![format!("node {} has no parameters", node.id)]))?;
    let ctx = Context {
        params,
        return_seq: node.return_seq,
        concat_axis,
    };
    check_assertions(rule, &node.id, &ctx)?;
    let args: Vec<(String, String)> = rule
        .rule
        .args
        .iter()
        .map(|a| Ok((a.key.clone(), render_arg(a, &ctx)?)))
        .collect::<Result<_, CodegenError>>()?;
    let name = quote(site.name);
    let template = rule
        .rule
        .template
        .as_deref()
        .unwrap_or(&rules.templates(dialect).layer_template);
    match dialect {
        Dialect::KerasFunctional => {
            let mut parts: Vec<String> = args.iter().map(|(k, v)| format!("{k}={v}")).collect();
            parts.push(format!("name=\"{name}\""));
            let inputs = match site.inputs {
                [one] => one.clone(),
                many => format!("[{}]", many.join(", ")),
            };
            fill(
                template,
                &[
                    ("var", site.var),
                    ("name", &name),
                    ("layer", &rule.rule.layer),
                    ("args", &parts.join(", ")),
                    ("inputs", &inputs),
                ],
            )
        }
        Dialect::CaffePrototxt => {
            let bottoms: String = site
                .inputs
                .iter()
                .map(|b| format!("  bottom: \"{}\"\n", quote(b)))
                .collect();
            let mut block = String::new();
            if !args.is_empty() {
                let (indent, close) = match &rule.rule.block {
                    Some(b) => {
                        block.push_str(&format!("  {b} {{\n"));
                        ("    ", "  }\n")
                    }
                    None => ("  ", ""),
                };
                for (k, v) in &args {
                    if v.starts_with('{') {
                        block.push_str(&format!("{indent}{k} {v}\n"));
                    } else {
                        block.push_str(&format!("{indent}{k}: {v}\n"));
                    }
                }
                block.push_str(close);
            }
            fill(
                template,
                &[
                    ("name", &name),
                    ("layer", &rule.rule.layer),
                    ("bottoms", &bottoms),
                    ("top", &name),
                    ("block", &block),
                ],
            )
        }
    }
}

/// Emits the fragment for a single layer named `layer` reading from `input`.
pub fn map_layer(
    kind: LayerKind,
    params: HyperParams,
    return_seq: bool,
    dialect: Dialect,
) -> Result<String, CodegenError> {
    let node = Node::recurrent("layer", kind, params, return_seq);
    let inputs = if kind.is_input() {
        Vec::new()
    } else if kind == LayerKind::Concat {
        vec!["input_a".to_string(), "input_b".to_string()]
    } else {
        vec!["input".to_string()]
    };
    let site = Site {
        name: "layer",
        var: "layer",
        inputs: &inputs,
    };
    emit_layer(RuleSet::builtin(), dialect, &node, &site, 1)
}

/// Generates a complete document. Layers appear in topological order with
/// lexicographic tie-break on node ids; Concat inputs keep edge order.
pub fn generate_with(
    graph: &CompGraph,
    dialect: Dialect,
    rules: &RuleSet,
    options: GenerateOptions,
) -> Result<String, CodegenError> {
    let report = validate(graph, false);
    if !report.is_valid() {
        return Err(CodegenError::InvalidGraph(
            report.violations.iter().map(|v| v.to_string()).collect(),
        ));
    }
    let unsupported: Vec<(String, LayerKind)> = graph
        .nodes
        .values()
        .filter(|n| rules.rule(n.kind, dialect).is_none_or(|r| r.rule.unsupported))
        .map(|n| (n.id.clone(), n.kind))
        .collect();
    if !unsupported.is_empty() {
        return Err(CodegenError::UnsupportedLayer(unsupported));
    }
    let order = graph.topo_order().expect("validated graph is acyclic");
    let (shapes, _) = infer_graph_shapes(graph).expect("validated graph is acyclic");
    let templates = rules.templates(dialect);

    let mut names = Names::new();
    let vars: std::collections::HashMap<&str, String> = order
        .iter()
        .map(|id| {
            let v = match dialect {
                Dialect::KerasFunctional => names.python(id),
                Dialect::CaffePrototxt => id.to_string(),
            };
            (*id, v)
        })
        .collect();

    let model = if graph.name.is_empty() { "model" } else { graph.name.as_str() };
    let model = quote(model);
    let mut out = String::new();
    out.push_str(&fill(&templates.header, &[("model", &model)])?);
    for id in &order {
        let node = &graph.nodes[*id];
        let inputs: Vec<String> = graph.predecessors(id).map(|p| vars[p].clone()).collect();
        let concat_axis = match shapes.get(graph.predecessors(id).next().unwrap_or("")) {
            Some(TensorShape::Seq { .. }) => 2,
            _ => 1,
        };
        let site = Site {
            name: id,
            var: &vars[*id],
            inputs: &inputs,
        };
        out.push_str(&emit_layer(rules, dialect, node, &site, concat_axis)?);
    }

    let input = graph.inputs().next().expect("validated graph has an input");
    let sink = graph.sinks().next().expect("validated graph has a sink");
    let mut output = vars[sink.id.as_str()].clone();
    if options.softmax_head {
        let mut head = templates.head_name.clone();
        while graph.nodes.contains_key(&head) {
            head.push('_');
        }
        let var = match dialect {
            Dialect::KerasFunctional => names.python("output"),
            Dialect::CaffePrototxt => head.clone(),
        };
        let quoted = quote(&head);
        let bottoms = format!("  bottom: \"{}\"\n", quote(&output));
        out.push_str(&fill(
            &templates.head_template,
            &[
                ("var", &var),
                ("name", &quoted),
                ("inputs", &output),
                ("bottoms", &bottoms),
                ("top", &quoted),
                ("last", &output),
            ],
        )?);
        output = var;
    }
    out.push_str(&fill(
        &templates.footer,
        &[("model", &model), ("input", &vars[input.id.as_str()]), ("output", &output)],
    )?);
    if !out.ends_with('\n') {
        out.push('\n');
    }
    Ok(out)
}
