use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TableError;

/// A table as recovered from a document: rectangular rows of cell text plus
/// the caption.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct CellGrid {
    pub caption: String,
    pub rows: Vec<Vec<String>>,
}

#[derive(Deserialize)]
struct RawGrid {
    #[serde(default)]
    caption: String,
    rows: Vec<Vec<String>>,
}

impl<'de> Deserialize<'de> for CellGrid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawGrid::deserialize(d)?;
        Ok(CellGrid::new(raw.caption, raw.rows))
    }
}

impl CellGrid {
    /// Builds a grid, padding ragged rows with empty cells.
    pub fn new(caption: impl Into<String>, mut rows: Vec<Vec<String>>) -> CellGrid {
        let width = rows.iter().map(Vec::len).max().unwrap_or(0);
        for r in &mut rows {
            r.resize(width, String::new());
        }
        CellGrid {
            caption: caption.into(),
            rows,
        }
    }

    pub fn from_strs(caption: &str, rows: &[&[&str]]) -> CellGrid {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|s| s.to_string()).collect())
            .collect();
        CellGrid::new(caption, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn cell(&self, r: usize, c: usize) -> &str {
        self.rows.get(r).and_then(|row| row.get(c)).map_or("", String::as_str)
    }

    pub fn transpose(&self) -> CellGrid {
        let rows = (0..self.n_cols())
            .map(|c| (0..self.n_rows()).map(|r| self.rows[r][c].clone()).collect())
            .collect();
        CellGrid {
            caption: self.caption.clone(),
            rows,
        }
    }

    /// Parses RFC 4180 CSV. Leading `#` lines are comments; one of the form
    /// `# caption: text` sets the caption.
    pub fn from_csv(text: &str) -> Result<CellGrid, TableError> {
        let mut caption = String::new();
        let mut body = text;
        while body.starts_with('#') {
            let (line, rest) = body.split_once('\n').unwrap_or((body, ""));
            if let Some(c) = line[1..].trim_start().strip_prefix("caption:") {
                caption = c.trim().to_string();
            }
            body = rest;
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(body.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| TableError::Csv(e.to_string()))?;
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(CellGrid::new(caption, rows))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        let body = String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input");
        if self.caption.is_empty() {
            body
        } else {
            format!("# caption: {}\n{body}", self.caption.replace('\n', " "))
        }
    }

    pub fn from_json(text: &str) -> Result<CellGrid, TableError> {
        serde_json::from_str(text).map_err(|e| TableError::Json(e.to_string()))
    }

    /// Reads a `.json` grid, or CSV for any other extension.
    pub fn load(path: &Path) -> Result<CellGrid, TableError> {
        let text = std::fs::read_to_string(path).map_err(|e| TableError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            CellGrid::from_json(&text)
        } else {
            CellGrid::from_csv(&text)
        }
    }

    /// Caption and all cells joined by spaces.
    pub fn text(&self) -> String {
        let mut s = self.caption.clone();
        for r in &self.rows {
            for c in r {
                s.push(' ');
                s.push_str(c);
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_rows_are_padded() {
        let g = CellGrid::from_strs("", &[&["a", "b", "c"], &["d"]]);
        assert_eq!((g.n_rows(), g.n_cols()), (2, 3));
        assert_eq!(g.cell(1, 2), "");
    }

    #[test]
    fn csv_with_caption() {
        let g = CellGrid::from_csv("# caption: Layer table\nlayer,kernel\n\"conv, 1\",3\npool\n").unwrap();
        assert_eq!(g.caption, "Layer table");
        assert_eq!(g.rows, vec![vec!["layer", "kernel"], vec!["conv, 1", "3"], vec!["pool", ""]]);
        assert_eq!(CellGrid::from_csv(&g.to_csv()).unwrap(), g);
    }

    #[test]
    fn json_form() {
        let g = CellGrid::from_json(r#"{"caption": "x", "rows": [["a"], ["b", "c"]]}"#).unwrap();
        assert_eq!(g.n_cols(), 2);
        assert_eq!(g.transpose().rows, vec![vec!["a", "b"], vec!["", "c"]]);
        assert!(CellGrid::from_json("{").is_err());
    }
}
