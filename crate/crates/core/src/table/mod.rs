//! Design tables: recognising architecture tables, their orientation, and
//! reading them into a sequential graph.

mod bow;
mod extract;
mod grid;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

pub use bow::{bow_vector, design_corpus, is_design_table, results_corpus, tokenize, BowModel, DesignScore};
pub use extract::{extract_table_graph, orientation, Orientation, Skipped, TableExtraction};
pub use grid::CellGrid;

const BUILTIN: &str = include_str!("../../data/table.toml");

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TableError {
    #[error("no row or column names a known layer")]
    EmptyDesign,
    #[error("invalid CSV: {0}")]
    Csv(String),
    #[error("invalid grid JSON: {0}")]
    Json(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid table config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct Vocabulary {
    pub design: Vec<String>,
    pub results: Vec<String>,
}

/// Vocabulary keywords, the header dictionary and per-kind field bindings.
#[derive(Debug, Clone, Deserialize)]
pub struct TableConfig {
    pub version: u32,
    pub vocabulary: Vocabulary,
    /// Role name to header spellings.
    pub headers: BTreeMap<String, Vec<String>>,
    /// Kind name to field name to candidate roles, in priority order.
    pub fields: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

impl TableConfig {
    pub fn from_toml(text: &str) -> Result<TableConfig, TableError> {
        let cfg: TableConfig = toml::from_str(text).map_err(|e| TableError::Config(e.to_string()))?;
        for (kind, fields) in &cfg.fields {
            let k = crate::LayerKind::from_name(kind).ok_or_else(|| TableError::Config(format!("unknown kind `{kind}`")))?;
            let known: Vec<&str> = crate::graph::domains_for(k).iter().map(|(f, _)| *f).collect();
            for (field, roles) in fields {
                if !known.contains(&field.as_str()) {
                    return Err(TableError::Config(format!("{kind} has no field `{field}`")));
                }
                if let Some(r) = roles.iter().find(|r| !cfg.headers.contains_key(*r)) {
                    return Err(TableError::Config(format!("unknown role `{r}`")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn builtin() -> &'static TableConfig {
        static CONFIG: OnceLock<TableConfig> = OnceLock::new();
        CONFIG.get_or_init(|| TableConfig::from_toml(BUILTIN).expect("builtin table config parses"))
    }

    /// Role of a header cell; text after `(` is ignored.
    pub fn role_of(&self, header: &str) -> Option<&str> {
        let head = header.split('(').next().unwrap_or("");
        let key = crate::lexicon::normalize(head);
        if key.is_empty() {
            return None;
        }
        self.headers
            .iter()
            .find(|(_, spellings)| spellings.iter().any(|s| crate::lexicon::normalize(s) == key))
            .map(|(role, _)| role.as_str())
    }
}
