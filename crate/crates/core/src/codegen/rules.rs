//! The rule base: per-dialect templates and per-layer mapping rules, loaded
//! from TOML.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use serde::Deserialize;

use super::{CodegenError, Dialect};
use crate::graph::LayerKind;

const BUILTIN: &str = include_str!("../../data/rules.toml");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialectTemplates {
    pub extension: String,
    pub header: String,
    pub layer_template: String,
    pub head_template: String,
    pub head_name: String,
    pub footer: String,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Arg {
    pub key: String,
    pub from: Option<String>,
    pub transform: Option<String>,
    pub value: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingRule {
    pub kind: String,
    pub dialect: Dialect,
    #[serde(default)]
    pub layer: String,
    pub block: Option<String>,
    pub template: Option<String>,
    #[serde(default)]
    pub args: Vec<Arg>,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<String>,
    #[serde(default)]
    pub unsupported: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    version: u32,
    dialect: BTreeMap<String, DialectTemplates>,
    rule: Vec<MappingRule>,
}

/// A comparison `field op value`, or `field odd`.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub text: String,
    field: String,
    op: String,
    rhs: f64,
}

impl Predicate {
    pub fn parse(text: &str) -> Result<Predicate, String> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let (field, op, rhs) = match parts.as_slice() {
            [f, "odd"] => (*f, "odd", 0.0),
            [f, op @ (">=" | "<=" | ">" | "<" | "=="), v] => {
                (*f, *op, v.parse::<f64>().map_err(|_| format!("bad number in `{text}`"))?)
            }
            _ => return Err(format!("cannot parse assertion `{text}`")),
        };
        Ok(Predicate {
            text: text.to_string(),
            field: field.to_string(),
            op: op.to_string(),
            rhs,
        })
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn holds(&self, x: f64) -> bool {
        match self.op.as_str() {
            "odd" => x.fract() == 0.0 && (x as i64).rem_euclid(2) == 1,
            ">=" => x >= self.rhs,
            "<=" => x <= self.rhs,
            ">" => x > self.rhs,
            "<" => x < self.rhs,
            _ => x == self.rhs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub rule: MappingRule,
    pub kind: LayerKind,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone)]
pub struct RuleSet {
    pub version: u32,
    templates: HashMap<Dialect, DialectTemplates>,
    rules: HashMap<(LayerKind, Dialect), CompiledRule>,
}

pub const TRANSFORMS: [&str; 3] = ["same_pad", "py_bool", "float"];

impl RuleSet {
    pub fn from_toml(text: &str) -> Result<RuleSet, CodegenError> {
        let bad = |m: String| CodegenError::Rules(m);
        let file: RuleFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let mut templates = HashMap::new();
        for (name, t) in file.dialect {
            let d = Dialect::parse(&name).ok_or_else(|| bad(format!("unknown dialect `{name}`")))?;
            templates.insert(d, t);
        }
        for d in Dialect::ALL {
            if !templates.contains_key(&d) {
                return Err(bad(format!("missing templates for dialect {}", d.name())));
            }
        }
        let mut rules = HashMap::new();
        for rule in file.rule {
            let kind = LayerKind::from_name(&rule.kind)
                .filter(|k| *k != LayerKind::Unknown)
                .ok_or_else(|| bad(format!("unknown layer kind `{}`", rule.kind)))?;
            if !rule.unsupported && rule.layer.is_empty() {
                return Err(bad(format!("rule {} / {} has no target layer", rule.kind, rule.dialect.name())));
            }
            for a in &rule.args {
                if a.from.is_some() == a.value.is_some() {
                    return Err(bad(format!("argument `{}` needs exactly one of from/value", a.key)));
                }
                if let Some(t) = &a.transform {
                    if !TRANSFORMS.contains(&t.as_str()) {
                        return Err(bad(format!("unknown transform `{t}`")));
                    }
                }
            }
            let predicates = rule
                .assertions
                .iter()
                .map(|s| Predicate::parse(s))
                .collect::<Result<Vec<_>, _>>()
                .map_err(bad)?;
            let key = (kind, rule.dialect);
            if rules.contains_key(&key) {
                return Err(bad(format!("duplicate rule for {} / {}", rule.kind, rule.dialect.name())));
            }
            rules.insert(key, CompiledRule { rule, kind, predicates });
        }
        for kind in LayerKind::ALL {
            for d in Dialect::ALL {
                if !rules.contains_key(&(kind, d)) {
                    return Err(bad(format!("no rule for {kind} / {}", d.name())));
                }
            }
        }
        Ok(RuleSet {
            version: file.version,
            templates,
            rules,
        })
    }

    pub fn builtin() -> &'static RuleSet {
        static RULES: OnceLock<RuleSet> = OnceLock::new();
        RULES.get_or_init(|| RuleSet::from_toml(BUILTIN).expect("builtin rules parse"))
    }

    pub fn templates(&self, dialect: Dialect) -> &DialectTemplates {
        &self.templates[&dialect]
    }

    /// The rule for a kind, `None` for `Unknown`.
    pub fn rule(&self, kind: LayerKind, dialect: Dialect) -> Option<&CompiledRule> {
        self.rules.get(&(kind, dialect))
    }

    pub fn rules(&self, dialect: Dialect) -> impl Iterator<Item = &CompiledRule> {
        self.rules.values().filter(move |r| r.rule.dialect == dialect)
    }
}

/// Substitutes `{name}` placeholders. Braces not enclosing an identifier
/// are copied verbatim.
pub fn fill(template: &str, values: &[(&str, &str)]) -> Result<String, CodegenError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let after = &rest[i + 1..];
        let ident_len = after
            .find(|c: char| !(c.is_ascii_lowercase() || c == '_'))
            .unwrap_or(after.len());
        if ident_len > 0 && after[ident_len..].starts_with('}') {
            let name = &after[..ident_len];
            let value = values
                .iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| CodegenError::Rules(format!("unbound placeholder {{{name}}}")))?;
            out.push_str(value);
            rest = &after[ident_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}
