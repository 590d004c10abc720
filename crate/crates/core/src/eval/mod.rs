//! Extraction accuracy, summary statistics and graph equivalence.

mod equivalence;
mod report;
mod stats;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::artifact::{Arrow, Blob, ExtractionResult, GroundTruthSidecar, SidecarNode};

pub use equivalence::{graph_equivalent, EQUIVALENCE_NODE_LIMIT};
pub use report::{boxplot_svg, records_from_csv, records_to_csv};
pub use stats::{boxplot, quantile, BoxPlotStats, ConfusionMatrix};

/// Minimum IoU for a detected blob to stand for a ground-truth box.
pub const IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("graph has {nodes} nodes; equivalence is limited to {limit}")]
    SizeLimit { nodes: usize, limit: usize },
    #[error("no values to summarise")]
    EmptyInput,
}

/// Per-image extraction scores. Accuracies are percentages of the ground
/// truth; edge precision is relative to the detected arrows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRecord {
    pub model_id: String,
    pub blob_accuracy: f64,
    pub edge_accuracy: f64,
    pub blobs_matched: usize,
    pub blobs_missed: usize,
    pub blobs_spurious: usize,
    pub edges_matched: usize,
    pub edges_missed: usize,
    pub edges_spurious: usize,
    pub edge_precision: f64,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        100.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Greedy one-to-one pairing of detected and true boxes by descending IoU,
/// keeping pairs with IoU at least [`IOU_THRESHOLD`]. Returns
/// `(blob index, truth index, iou)`.
pub fn match_blobs(blobs: &[Blob], truth: &[SidecarNode]) -> Vec<(usize, usize, f64)> {
    let mut cands = Vec::new();
    for (i, b) in blobs.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let iou = b.bbox.iou(&t.bbox);
            if iou >= IOU_THRESHOLD {
                cands.push((i, j, iou));
            }
        }
    }
    cands.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    let (mut used_b, mut used_t) = (vec![false; blobs.len()], vec![false; truth.len()]);
    let mut out = Vec::new();
    for (i, j, iou) in cands {
        if !used_b[i] && !used_t[j] {
            used_b[i] = true;
            used_t[j] = true;
            out.push((i, j, iou));
        }
    }
    out
}

fn label_agrees(blob: &Blob, truth: &SidecarNode) -> bool {
    blob.kind.eq_ignore_ascii_case(&truth.kind)
}

/// Blob counts `(matched, missed, spurious)` and accuracy; a blob counts
/// when its box pairs with a true box and its corrected kind is right.
pub fn blob_accuracy(blobs: &[Blob], truth: &GroundTruthSidecar) -> (usize, usize, usize, f64) {
    let pairs = match_blobs(blobs, &truth.nodes);
    let matched = pairs
        .iter()
        .filter(|(i, j, _)| label_agrees(&blobs[*i], &truth.nodes[*j]))
        .count();
    (
        matched,
        truth.nodes.len() - matched,
        blobs.len() - matched,
        percent(matched, truth.nodes.len()),
    )
}

/// Edge counts `(matched, missed, spurious)`, recall and precision. Arrow
/// endpoints are mapped to true nodes through the box pairing regardless
/// of label, and a mapped arrow is correct when the same directed edge is
/// in the truth (each true edge is claimed once).
pub fn edge_accuracy(blobs: &[Blob], arrows: &[Arrow], truth: &GroundTruthSidecar) -> (usize, usize, usize, f64, f64) {
    let pairs = match_blobs(blobs, &truth.nodes);
    let to_truth: HashMap<&str, &str> = pairs
        .iter()
        .map(|(i, j, _)| (blobs[*i].id.as_str(), truth.nodes[*j].id.as_str()))
        .collect();
    let mut remaining: HashMap<(&str, &str), usize> = HashMap::new();
    for e in &truth.edges {
        *remaining.entry((e.src.as_str(), e.dst.as_str())).or_default() += 1;
    }
    let mut correct = 0;
    for a in arrows {
        let (Some(s), Some(d)) = (to_truth.get(a.src.as_str()), to_truth.get(a.dst.as_str())) else {
            continue;
        };
        if let Some(n) = remaining.get_mut(&(*s, *d)).filter(|n| **n > 0) {
            *n -= 1;
            correct += 1;
        }
    }
    let precision = if arrows.is_empty() && !truth.edges.is_empty() {
        0.0
    } else {
        percent(correct, arrows.len())
    };
    (
        correct,
        truth.edges.len() - correct,
        arrows.len() - correct,
        percent(correct, truth.edges.len()),
        precision,
    )
}

pub fn score_extraction(model_id: &str, result: &ExtractionResult, truth: &GroundTruthSidecar) -> AccuracyRecord {
    let (bm, bmiss, bsp, bacc) = blob_accuracy(&result.blobs, truth);
    let (em, emiss, esp, eacc, eprec) = edge_accuracy(&result.blobs, &result.arrows, truth);
    AccuracyRecord {
        model_id: model_id.to_string(),
        blob_accuracy: bacc,
        edge_accuracy: eacc,
        blobs_matched: bm,
        blobs_missed: bmiss,
        blobs_spurious: bsp,
        edges_matched: em,
        edges_missed: emiss,
        edges_spurious: esp,
        edge_precision: eprec,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::{BBox, SidecarEdge};
    use proptest::prelude::*;

    fn truth(n: usize) -> GroundTruthSidecar {
        GroundTruthSidecar {
            model_id: "m".into(),
            style: "StyleK".into(),
            scale: 1,
            width: 200,
            height: 60 * n as u32,
            nodes: (0..n)
                .map(|i| SidecarNode {
                    id: format!("n{i}"),
                    label: "Dense (10)".into(),
                    kind: "Dense".into(),
                    bbox: BBox::new(20, 60 * i as u32, 120, 40),
                })
                .collect(),
            edges: (1..n)
                .map(|i| SidecarEdge {
                    src: format!("n{}", i - 1),
                    dst: format!("n{i}"),
                    polyline: vec![],
                })
                .collect(),
        }
    }

    fn perfect(t: &GroundTruthSidecar) -> (Vec<Blob>, Vec<Arrow>) {
        let blobs = t
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| Blob {
                id: format!("b{i}"),
                bbox: n.bbox,
                text: n.label.clone(),
                kind: n.kind.to_ascii_lowercase(),
                distance: Some(0),
                confidence: 1.0,
            })
            .collect();
        let arrows = (1..t.nodes.len())
            .map(|i| Arrow {
                src: format!("b{}", i - 1),
                dst: format!("b{i}"),
                polyline: vec![],
            })
            .collect();
        (blobs, arrows)
    }

    #[test]
    fn perfect_extraction() {
        let t = truth(7);
        let (b, a) = perfect(&t);
        assert_eq!(blob_accuracy(&b, &t), (7, 0, 0, 100.0));
        assert_eq!(edge_accuracy(&b, &a, &t), (6, 0, 0, 100.0, 100.0));
    }

    #[test]
    fn missing_blob_and_wrong_label() {
        let t = truth(10);
        let (mut b, _) = perfect(&t);
        b.pop();
        assert_eq!(blob_accuracy(&b, &t).3, 90.0);
        b[0].kind = "Conv2D".into();
        assert_eq!(blob_accuracy(&b, &t).0, 8);
        b[1].bbox = BBox::new(0, 0, 1, 1);
        assert_eq!(blob_accuracy(&b, &t).0, 7);
    }

    #[test]
    fn reversed_arrow_is_wrong() {
        let t = truth(5);
        let (b, mut a) = perfect(&t);
        let r = &mut a[2];
        std::mem::swap(&mut r.src, &mut r.dst);
        let (m, missed, spurious, acc, prec) = edge_accuracy(&b, &a, &t);
        assert_eq!((m, missed, spurious), (3, 1, 1));
        assert_eq!((acc, prec), (75.0, 75.0));
    }

    #[test]
    fn duplicate_arrows_claim_one_edge() {
        let t = truth(2);
        let (b, mut a) = perfect(&t);
        a.push(a[0].clone());
        assert_eq!(edge_accuracy(&b, &a, &t), (1, 0, 1, 100.0, 50.0));
    }

    #[test]
    fn greedy_prefers_higher_iou() {
        let t = truth(1);
        let mk = |id: &str, bbox| Blob {
            id: id.into(),
            bbox,
            text: String::new(),
            kind: "Dense".into(),
            distance: None,
            confidence: 0.0,
        };
        let blobs = vec![mk("a", BBox::new(30, 0, 120, 40)), mk("b", BBox::new(20, 0, 120, 40))];
        assert_eq!(match_blobs(&blobs, &t.nodes), vec![(1, 0, 1.0)]);
    }

    proptest! {
        #[test]
        fn accuracy_ignores_ordering(n in 1usize..9, seed in any::<u64>()) {
            let t = truth(n);
            let (mut b, mut a) = perfect(&t);
            a.truncate(seed as usize % n);
            b.truncate(n - (seed as usize / 7) % n);
            let before = (blob_accuracy(&b, &t), edge_accuracy(&b, &a, &t));
            let mut rng = crate::rng::Rng::seed_from_u64(seed);
            rng.shuffle(&mut b);
            rng.shuffle(&mut a);
            prop_assert_eq!(before, (blob_accuracy(&b, &t), edge_accuracy(&b, &a, &t)));
            let rec = blob_accuracy(&b, &t).3;
            prop_assert!((0.0..=100.0).contains(&rec));
        }
    }
}
