//! Data exchanged between the renderer, the extractor and the evaluator.

use serde::{Deserialize, Serialize};

use crate::graph::CompGraph;

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> BBox {
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x as f64 && x <= self.right() as f64 && y >= self.y as f64 && y <= self.bottom() as f64
    }

    /// Strict interior test.
    pub fn contains_inside(&self, x: f64, y: f64) -> bool {
        x > self.x as f64 && x < self.right() as f64 && y > self.y as f64 && y < self.bottom() as f64
    }

    pub fn intersection(&self, o: &BBox) -> u64 {
        let w = self.right().min(o.right()).saturating_sub(self.x.max(o.x));
        let h = self.bottom().min(o.bottom()).saturating_sub(self.y.max(o.y));
        w as u64 * h as u64
    }

    pub fn iou(&self, o: &BBox) -> f64 {
        let i = self.intersection(o);
        let u = self.area() + o.area() - i;
        if u == 0 {
            0.0
        } else {
            i as f64 / u as f64
        }
    }

    pub fn overlaps(&self, o: &BBox) -> bool {
        self.intersection(o) > 0
    }

    pub fn scaled(&self, k: u32) -> BBox {
        BBox::new(self.x * k, self.y * k, self.w * k, self.h * k)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarNode {
    pub id: String,
    pub label: String,
    /// Layer kind name.
    pub kind: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEdge {
    pub src: String,
    pub dst: String,
    /// Tail first, arrow tip last.
    pub polyline: Vec<[i64; 2]>,
}

/// Ground truth written next to every rendered image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSidecar {
    pub model_id: String,
    pub style: String,
    pub scale: u32,
    pub width: u32,
    pub height: u32,
    pub nodes: Vec<SidecarNode>,
    pub edges: Vec<SidecarEdge>,
}

pub const SIDECAR_SUFFIX: &str = ".gt.json";

impl GroundTruthSidecar {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<GroundTruthSidecar, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn node(&self, id: &str) -> Option<&SidecarNode> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// A closed contour recognised as a layer box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub id: String,
    pub bbox: BBox,
    /// Raw OCR text.
    pub text: String,
    /// Corrected layer kind name, `Unknown` when the text matched nothing.
    pub kind: String,
    /// Edit distance of the lexicon match.
    pub distance: Option<usize>,
    /// Agreement of the OCR templates with the crop, in `[0, 1]`.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrow {
    pub src: String,
    pub dst: String,
    /// Tail first, arrowhead last.
    pub polyline: Vec<[i64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ExtractionDiagnostics {
    /// Arrow components without two distinct endpoint blobs or with an
    /// undecidable direction.
    pub discarded_edges: usize,
    pub unresolved_labels: usize,
    pub contours: usize,
    pub rejected_contours: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionResult {
    pub graph: CompGraph,
    pub blobs: Vec<Blob>,
    pub arrows: Vec<Arrow>,
    pub diagnostics: ExtractionDiagnostics,
}

impl ExtractionResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "graph": crate::graph::to_value(&self.graph),
            "blobs": self.blobs,
            "arrows": self.arrows,
            "diagnostics": self.diagnostics,
        })
    }
}
