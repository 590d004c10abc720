//! Graph validation. Violations are data: an empty report means the graph
//! is a well-formed, grammar-valid, shape-valid design.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::domains::domains_for;
use super::grammar::{allowed_next, GrammarSymbol};
use super::shape::infer_graph_shapes;
use super::{CompGraph, GraphError, LayerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Structure,
    GrammarAdjacency,
    ShapeError,
    ParamDomain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Locus {
    Graph,
    Node { id: String },
    Edge { src: String, dst: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub category: Category,
    pub locus: Locus,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = match &self.locus {
            Locus::Graph => "graph".to_string(),
            Locus::Node { id } => format!("node {id}"),
            Locus::Edge { src, dst } => format!("edge {src}->{dst}"),
        };
        write!(f, "{:?} at {at}: {}", self.category, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, category: Category) -> usize {
        self.violations.iter().filter(|v| v.category == category).count()
    }

    fn push(&mut self, category: Category, locus: Locus, message: impl Into<String>) {
        self.violations.push(Violation {
            category,
            locus,
            message: message.into(),
        });
    }
}

fn node(id: &str) -> Locus {
    Locus::Node { id: id.to_string() }
}

/// Checks structure, grammar adjacency, shapes and (with `strict_domains`)
/// parameter domains.
///
/// The terminal classifier Dense (the single sink, sized to the class count
/// of the input dataset) is exempt from the Dense width domain.
pub fn validate(graph: &CompGraph, strict_domains: bool) -> ValidationReport {
    let mut report = ValidationReport::default();
    let acyclic = check_structure(graph, &mut report);
    if !acyclic {
        return report;
    }
    check_adjacency(graph, &mut report);
    check_shapes(graph, &mut report);
    if strict_domains {
        check_domains(graph, &mut report);
    }
    report
}

/// Returns false if later stages cannot run (cycle or dangling edges).
fn check_structure(graph: &CompGraph, r: &mut ValidationReport) -> bool {
    use Category::Structure;
    if graph.is_empty() {
        r.push(Structure, Locus::Graph, "graph has no nodes");
        return false;
    }
    let mut dangling = false;
    let mut seen = HashSet::new();
    for e in &graph.edges {
        let locus = Locus::Edge { src: e.src.clone(), dst: e.dst.clone() };
        for end in [&e.src, &e.dst] {
            if !graph.nodes.contains_key(end) {
                r.push(Structure, locus.clone(), format!("edge references missing node `{end}`"));
                dangling = true;
            }
        }
        if e.src == e.dst {
            r.push(Structure, locus.clone(), "self loop");
        }
        if !seen.insert((&e.src, &e.dst)) {
            r.push(Structure, locus, "duplicate edge");
        }
    }
    for (id, n) in &graph.nodes {
        if n.kind == LayerKind::Unknown {
            let text = n.label.as_deref().unwrap_or("");
            r.push(Structure, node(id), format!("unrecognised layer `{text}`"));
        }
        if n.return_seq && !n.kind.is_recurrent() {
            r.push(Structure, node(id), "return_seq set on a non-recurrent layer");
        }
        match n.params {
            None if n.kind != LayerKind::Unknown => {
                r.push(Category::ParamDomain, node(id), format!("{} has no parameters", n.kind))
            }
            Some(p) if !p.fits(n.kind) => r.push(
                Category::ParamDomain,
                node(id),
                format!("parameters do not belong to {}", n.kind),
            ),
            _ => {}
        }
    }
    if dangling {
        return false;
    }
    let inputs: Vec<&str> = graph.inputs().map(|n| n.id.as_str()).collect();
    if inputs.len() != 1 {
        r.push(
            Structure,
            Locus::Graph,
            format!("expected exactly one input layer, found {}", inputs.len()),
        );
    }
    for (id, n) in &graph.nodes {
        let indeg = graph.in_degree(id);
        let ok = if n.kind.is_input() {
            indeg == 0
        } else if n.kind == LayerKind::Concat {
            indeg >= 2
        } else {
            indeg == 1
        };
        if !ok {
            let want = match n.kind {
                k if k.is_input() => "0",
                LayerKind::Concat => "at least 2",
                _ => "1",
            };
            r.push(Structure, node(id), format!("in-degree {indeg}, expected {want}"));
        }
    }
    let sinks = graph.sinks().count();
    if sinks != 1 {
        r.push(Structure, Locus::Graph, format!("expected exactly one sink, found {sinks}"));
    }
    if graph.topo_order().is_none() {
        r.push(Structure, Locus::Graph, "graph contains a cycle");
        return false;
    }
    true
}

fn check_adjacency(graph: &CompGraph, r: &mut ValidationReport) {
    for e in &graph.edges {
        let Some(dst_sym) = graph.nodes[&e.dst].symbol() else { continue };
        let locus = Locus::Edge { src: e.src.clone(), dst: e.dst.clone() };
        match allowed_next(graph, &e.src) {
            Ok(allowed) => {
                if dst_sym == GrammarSymbol::Input || !allowed.contains(&dst_sym) {
                    let from = graph.nodes[&e.src].kind;
                    r.push(
                        Category::GrammarAdjacency,
                        locus,
                        format!("{dst_sym} may not follow {from}"),
                    );
                }
            }
            Err(GraphError::UnknownKind(_)) => {}
            Err(err) => r.push(Category::Structure, locus, err.to_string()),
        }
    }
}

fn check_shapes(graph: &CompGraph, r: &mut ValidationReport) {
    let Some((_, errors)) = infer_graph_shapes(graph) else { return };
    for (id, err) in errors {
        if graph.nodes[&id].kind == LayerKind::Unknown {
            continue;
        }
        r.push(Category::ShapeError, node(&id), err.to_string());
    }
}

fn terminal_head(graph: &CompGraph) -> Option<&str> {
    let classes = graph.inputs().next()?.kind.class_count()?;
    let mut sinks = graph.sinks();
    let sink = sinks.next()?;
    if sinks.next().is_some() || sink.kind != LayerKind::Dense {
        return None;
    }
    match sink.params {
        Some(super::HyperParams::Dense { nodes }) if nodes == classes => Some(&sink.id),
        _ => None,
    }
}

fn check_domains(graph: &CompGraph, r: &mut ValidationReport) {
    let head = terminal_head(graph);
    for (id, n) in &graph.nodes {
        if Some(id.as_str()) == head {
            continue;
        }
        let Some(params) = n.params.as_ref().filter(|p| p.fits(n.kind)) else { continue };
        for ((field, value), (_, domain)) in params.fields().into_iter().zip(domains_for(n.kind)) {
            if !domain.contains(value) {
                r.push(
                    Category::ParamDomain,
                    node(id),
                    format!("{} {field}={value} is outside its domain", n.kind),
                );
            }
        }
    }
}
