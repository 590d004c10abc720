//! Feature matrices with labels and a fixed train/validation/test split.
//!
//! Binary files hold a little-endian header `DLPF`, `u32 N`, `u32 D` and
//! `N * D` `f32` values row by row; labels live next to them in a file with
//! the `.labels` extension holding `N` `i32` values, and the class names in
//! an optional `.names` JSON file. The CSV form has a header whose first
//! column is `label`.

use std::fs;
use std::path::{Path, PathBuf};

use dlp2c_core::rng::Rng;
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::ClassifyError;

pub const MAGIC: &[u8; 4] = b"DLPF";

/// Disjoint, exhaustive row partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffles `0..n` and cuts it 60/20/20.
    pub fn random(n: usize, seed: u64) -> Split {
        let mut idx: Vec<usize> = (0..n).collect();
        Rng::seed_from_u64(seed).shuffle(&mut idx);
        let n_train = (n as f64 * 0.6).round() as usize;
        let n_val = (n as f64 * 0.2).round() as usize;
        let test = idx.split_off((n_train + n_val).min(n));
        let val = idx.split_off(n_train.min(idx.len()));
        Split { seed, train: idx, val, test }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub vectors: Array2<f64>,
    pub labels: Vec<usize>,
    pub label_names: Vec<String>,
    pub split: Split,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ClassifyError + '_ {
    move |source| ClassifyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format<T>(msg: impl Into<String>) -> Result<T, ClassifyError> {
    Err(ClassifyError::Format(msg.into()))
}

impl FeatureDataset {
    /// Names default to the label numbers when `label_names` is empty.
    pub fn new(vectors: Array2<f64>, labels: Vec<usize>, label_names: Vec<String>, seed: u64) -> Result<FeatureDataset, ClassifyError> {
        if vectors.nrows() != labels.len() {
            return format(format!("{} rows but {} labels", vectors.nrows(), labels.len()));
        }
        let k = labels.iter().max().map_or(0, |m| m + 1);
        let label_names = if label_names.is_empty() {
            (0..k).map(|i| i.to_string()).collect()
        } else if label_names.len() < k {
            return format(format!("label {} has no name", k - 1));
        } else {
            label_names
        };
        let split = Split::random(labels.len(), seed);
        Ok(FeatureDataset {
            vectors,
            labels,
            label_names,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    /// Rows and labels of a subset.
    pub fn subset(&self, rows: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (self.vectors.select(Axis(0), rows), rows.iter().map(|&r| self.labels[r]).collect())
    }

    pub fn with_seed(mut self, seed: u64) -> FeatureDataset {
        self.split = Split::random(self.len(), seed);
        self
    }

    /// Reads a CSV file or a binary file with its `.labels` sibling and the
    /// optional `.names` sibling.
    pub fn load(path: &Path, seed: u64) -> Result<FeatureDataset, ClassifyError> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            return read_csv(path, seed);
        }
        let vectors = read_dlpf(path)?;
        let labels = read_labels(&labels_path(path))?;
        let labels = labels
            .into_iter()
            .map(|l| usize::try_from(l).or_else(|_| format(format!("negative label {l}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let names_file = names_path(path);
        let names = if names_file.exists() {
            let text = fs::read_to_string(&names_file).map_err(io(&names_file))?;
            serde_json::from_str(&text)?
        } else {
            Vec::new()
        };
        FeatureDataset::new(vectors, labels, names, seed)
    }

    /// Binary form; `.csv` paths are written as CSV.
    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            return fs::write(path, to_csv(self)).map_err(io(path));
        }
        write_dlpf(path, &self.vectors)?;
        let labels: Vec<i32> = self.labels.iter().map(|&l| l as i32).collect();
        write_labels(&labels_path(path), &labels)?;
        let names_file = names_path(path);
        let text = serde_json::to_string(&self.label_names)? + "\n";
        fs::write(&names_file, text).map_err(io(&names_file))
    }
}

pub fn labels_path(features: &Path) -> PathBuf {
    features.with_extension("labels")
}

/// JSON array of class names beside a binary feature file.
pub fn names_path(features: &Path) -> PathBuf {
    features.with_extension("names")
}

pub fn encode_dlpf(vectors: &Array2<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * vectors.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(vectors.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(vectors.ncols() as u32).to_le_bytes());
    for v in vectors.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_dlpf(bytes: &[u8]) -> Result<Array2<f64>, ClassifyError> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return format("missing DLPF header");
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("four bytes")) as usize;
    let (n, d) = (word(4), word(8));
    let want = n.checked_mul(d).and_then(|x| x.checked_mul(4)).and_then(|x| x.checked_add(12));
    if want != Some(bytes.len()) {
        return format(format!("header says {n}x{d} but file has {} bytes", bytes.len()));
    }
    let values = bytes[12..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")) as f64)
        .collect();
    Ok(Array2::from_shape_vec((n, d), values).expect("length checked"))
}

pub fn read_dlpf(path: &Path) -> Result<Array2<f64>, ClassifyError> {
    decode_dlpf(&fs::read(path).map_err(io(path))?)
}

pub fn write_dlpf(path: &Path, vectors: &Array2<f64>) -> Result<(), ClassifyError> {
    fs::write(path, encode_dlpf(vectors)).map_err(io(path))
}

pub fn read_labels(path: &Path) -> Result<Vec<i32>, ClassifyError> {
    let bytes = fs::read(path).map_err(io(path))?;
    if bytes.len() % 4 != 0 {
        return format("labels file length is not a multiple of 4");
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().expect("four bytes")))
        .collect())
}

pub fn write_labels(path: &Path, labels: &[i32]) -> Result<(), ClassifyError> {
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(io(path))
}

/// Integer labels keep their numbers; any other label text becomes a class
/// in order of first appearance.
pub fn parse_csv(text: &str, seed: u64) -> Result<FeatureDataset, ClassifyError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| ClassifyError::Format(e.to_string()))?.clone();
    if header.get(0).map(str::trim) != Some("label") {
        return format("first CSV column must be `label`");
    }
    let d = header.len() - 1;
    let (mut raw, mut values) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| ClassifyError::Format(e.to_string()))?;
        if rec.len() != d + 1 {
            return format(format!("row {} has {} columns", line + 1, rec.len()));
        }
        raw.push(rec[0].trim().to_string());
        for f in rec.iter().skip(1) {
            values.push(f.trim().parse::<f64>().or_else(|_| format(format!("row {}: bad number {f:?}", line + 1)))?);
        }
    }
    let vectors = Array2::from_shape_vec((raw.len(), d), values).expect("row lengths checked");
    let (labels, names) = if raw.iter().all(|l| l.parse::<usize>().is_ok()) {
        (raw.iter().map(|l| l.parse().expect("checked")).collect(), Vec::new())
    } else {
        let mut names: Vec<String> = Vec::new();
        let labels = raw
            .iter()
            .map(|l| match names.iter().position(|n| n == l) {
                Some(i) => i,
                None => {
                    names.push(l.clone());
                    names.len() - 1
                }
            })
            .collect();
        (labels, names)
    };
    FeatureDataset::new(vectors, labels, names, seed)
}

pub fn read_csv(path: &Path, seed: u64) -> Result<FeatureDataset, ClassifyError> {
    parse_csv(&fs::read_to_string(path).map_err(io(path))?, seed)
}

pub fn to_csv(ds: &FeatureDataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["label".to_string()];
    head.extend((0..ds.dim()).map(|j| format!("f{j}")));
    w.write_record(&head).expect("writing to memory");
    for (i, &l) in ds.labels.iter().enumerate() {
        let mut rec = vec![ds.label_names[l].clone()];
        rec.extend(ds.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8")
}
