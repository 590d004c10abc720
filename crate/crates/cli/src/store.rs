//! File-per-design store: `{root}/{id}/design.json`, `meta.json` and the
//! generated `model.py` / `model.prototxt`, each written through a
//! temporary sibling and a rename.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use dlp2c_core::codegen::{generate, Dialect};
use dlp2c_core::graph::{from_json, to_json, to_value, validate, CompGraph, Provenance, ValidationReport};
use dlp2c_core::simulator::write_atomic;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

pub const CORRUPT_DIR: &str = "_corrupt";
const DESIGN_FILE: &str = "design.json";
const META_FILE: &str = "meta.json";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("design {0} not found")]
    NotFound(Uuid),
    #[error("design {id} is at version {current}, update was based on {expected}")]
    Conflict { id: Uuid, expected: u64, current: u64 },
    #[error("rating must be 1 to 5 stars, got {0}")]
    InvalidRating(i64),
    #[error("store i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Generated {
    pub keras_path: Option<String>,
    pub caffe_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMeta {
    pub id: Uuid,
    pub version: u64,
    pub provenance: Provenance,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    pub ratings: Vec<u8>,
    pub generated: Generated,
    pub source_ref: Option<String>,
    /// The graph failed validation or code generation.
    pub draft: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub meta: DesignMeta,
    pub graph: CompGraph,
    pub report: ValidationReport,
}

/// Mean of the ratings rounded to two decimals.
pub fn rating_average(ratings: &[u8]) -> Option<f64> {
    if ratings.is_empty() {
        return None;
    }
    let mean = ratings.iter().map(|&r| r as f64).sum::<f64>() / ratings.len() as f64;
    Some((mean * 100.0).round() / 100.0)
}

/// The JSON shape of a design in the service API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    #[serde(flatten)]
    pub meta: DesignMeta,
    pub graph: serde_json::Value,
    pub rating_average: Option<f64>,
    pub violations: Vec<dlp2c_core::graph::Violation>,
}

impl Design {
    pub fn record(&self) -> DesignRecord {
        DesignRecord {
            meta: self.meta.clone(),
            graph: to_value(&self.graph),
            rating_average: rating_average(&self.meta.ratings),
            violations: self.report.violations.clone(),
        }
    }
}

pub struct Store {
    root: PathBuf,
    designs: RwLock<BTreeMap<Uuid, Arc<RwLock<Design>>>>,
}

fn code_file(dialect: Dialect) -> &'static str {
    match dialect {
        Dialect::KerasFunctional => "model.py",
        Dialect::CaffePrototxt => "model.prototxt",
    }
}

impl Store {
    /// Opens (creating if needed) a store and indexes its designs; records
    /// that cannot be read are moved to `_corrupt/`.
    pub fn open(root: &Path) -> Result<Store, StoreError> {
        fs::create_dir_all(root).map_err(io(root))?;
        let mut designs = BTreeMap::new();
        for entry in fs::read_dir(root).map_err(io(root))? {
            let entry = entry.map_err(io(root))?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name == CORRUPT_DIR || name.starts_with('.') || !entry.path().is_dir() {
                continue;
            }
            match load_design(&entry.path(), &name) {
                Some(d) => {
                    designs.insert(d.meta.id, Arc::new(RwLock::new(d)));
                }
                None => quarantine(root, &entry.path(), &name)?,
            }
        }
        Ok(Store {
            root: root.to_path_buf(),
            designs: RwLock::new(designs),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.designs.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Oldest first.
    pub fn list(&self) -> Vec<DesignRecord> {
        let mut v: Vec<DesignRecord> = self.designs.read().values().map(|d| d.read().record()).collect();
        v.sort_by(|a, b| (a.meta.created, a.meta.id).cmp(&(b.meta.created, b.meta.id)));
        v
    }

    fn entry(&self, id: Uuid) -> Result<Arc<RwLock<Design>>, StoreError> {
        self.designs.read().get(&id).cloned().ok_or(StoreError::NotFound(id))
    }

    pub fn get(&self, id: Uuid) -> Result<DesignRecord, StoreError> {
        Ok(self.entry(id)?.read().record())
    }

    pub fn create(&self, graph: CompGraph, provenance: Option<Provenance>, source_ref: Option<String>) -> Result<DesignRecord, StoreError> {
        let now = Utc::now();
        let provenance = provenance.unwrap_or(graph.provenance);
        let mut design = Design {
            meta: DesignMeta {
                id: Uuid::new_v4(),
                version: 1,
                provenance,
                created: now,
                updated: now,
                ratings: Vec::new(),
                generated: Generated::default(),
                source_ref,
                draft: true,
            },
            graph,
            report: ValidationReport::default(),
        };
        self.persist(&mut design)?;
        let record = design.record();
        self.designs.write().insert(design.meta.id, Arc::new(RwLock::new(design)));
        Ok(record)
    }

    /// Replaces the graph if `version` is current, then re-validates and
    /// regenerates code.
    pub fn update(&self, id: Uuid, version: u64, graph: CompGraph, provenance: Option<Provenance>, source_ref: Option<Option<String>>) -> Result<DesignRecord, StoreError> {
        let entry = self.entry(id)?;
        let mut d = entry.write();
        if d.meta.version != version {
            return Err(StoreError::Conflict {
                id,
                expected: version,
                current: d.meta.version,
            });
        }
        let mut next = d.clone();
        next.graph = graph;
        next.meta.provenance = provenance.unwrap_or(Provenance::Edited);
        if let Some(s) = source_ref {
            next.meta.source_ref = s;
        }
        next.meta.version += 1;
        next.meta.updated = Utc::now();
        self.persist(&mut next)?;
        *d = next;
        Ok(d.record())
    }

    pub fn rate(&self, id: Uuid, stars: i64) -> Result<DesignRecord, StoreError> {
        if !(1..=5).contains(&stars) {
            return Err(StoreError::InvalidRating(stars));
        }
        let entry = self.entry(id)?;
        let mut d = entry.write();
        let mut meta = d.meta.clone();
        meta.ratings.push(stars as u8);
        self.write_meta(&meta)?;
        d.meta = meta;
        Ok(d.record())
    }

    pub fn delete(&self, id: Uuid) -> Result<(), StoreError> {
        let entry = self.designs.write().remove(&id).ok_or(StoreError::NotFound(id))?;
        let _guard = entry.write();
        let dir = self.root.join(id.to_string());
        fs::remove_dir_all(&dir).map_err(io(&dir))
    }

    fn write_meta(&self, meta: &DesignMeta) -> Result<(), StoreError> {
        let path = self.root.join(meta.id.to_string()).join(META_FILE);
        let text = serde_json::to_string_pretty(meta).expect("meta serialises") + "\n";
        write_atomic(&path, text.as_bytes()).map_err(io(&path))
    }

    /// Writes code, graph and finally the metadata.
    fn persist(&self, d: &mut Design) -> Result<(), StoreError> {
        let id = d.meta.id.to_string();
        let dir = self.root.join(&id);
        fs::create_dir_all(&dir).map_err(io(&dir))?;
        d.report = validate(&d.graph, false);
        let mut generated = Generated::default();
        let mut ok = d.report.is_valid();
        for dialect in Dialect::ALL {
            let path = dir.join(code_file(dialect));
            let code = if ok { generate(&d.graph, dialect).ok() } else { None };
            match code {
                Some(code) => {
                    write_atomic(&path, code.as_bytes()).map_err(io(&path))?;
                    let rel = Some(format!("{id}/{}", code_file(dialect)));
                    match dialect {
                        Dialect::KerasFunctional => generated.keras_path = rel,
                        Dialect::CaffePrototxt => generated.caffe_path = rel,
                    }
                }
                None => {
                    ok = false;
                    if path.exists() {
                        fs::remove_file(&path).map_err(io(&path))?;
                    }
                }
            }
        }
        if !ok {
            generated = Generated::default();
            for dialect in Dialect::ALL {
                let _ = fs::remove_file(dir.join(code_file(dialect)));
            }
        }
        d.meta.generated = generated;
        d.meta.draft = !ok;
        let path = dir.join(DESIGN_FILE);
        write_atomic(&path, to_json(&d.graph).as_bytes()).map_err(io(&path))?;
        self.write_meta(&d.meta)
    }
}

fn load_design(dir: &Path, name: &str) -> Option<Design> {
    let meta: DesignMeta = serde_json::from_str(&fs::read_to_string(dir.join(META_FILE)).ok()?).ok()?;
    if meta.id.to_string() != name {
        return None;
    }
    let graph = from_json(&fs::read_to_string(dir.join(DESIGN_FILE)).ok()?).ok()?;
    let report = validate(&graph, false);
    Some(Design { meta, graph, report })
}

fn quarantine(root: &Path, dir: &Path, name: &str) -> Result<(), StoreError> {
    let bin = root.join(CORRUPT_DIR);
    fs::create_dir_all(&bin).map_err(io(&bin))?;
    let mut target = bin.join(name);
    let mut n = 1;
    while target.exists() {
        target = bin.join(format!("{name}.{n}"));
        n += 1;
    }
    fs::rename(dir, &target).map_err(io(dir))
}
